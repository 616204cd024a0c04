use rand::SeedableRng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::harness::aggregate::{run_replicas, EstimateRecord, Replica};
use crate::harness::stream::{child_seed, domain, Stream};
use crate::reproduction::{CumulantReport, ReproductionLaw};
use crate::spine::{AuxOptions, AuxiliaryBuilder, SpineSampler};

/// `n psi'(theta) + y`, the level matching deviation `y`.
pub fn tail_level(cumulants: &CumulantReport, n: usize, y: f64) -> f64 {
    n as f64 * cumulants.psi_prime + y
}

/// Spinal importance-sampling estimate of `P(M_n >= a)`.
///
/// Each replica samples the spine, returns 0 when `S_n < a`, and otherwise
/// grows the sibling subtrees (window 0) and returns
/// `exp(n psi - theta S_n) / D_n({0})` on `{D_n((0, inf)) = 0}`.
/// The estimator is unbiased whenever `psi(theta)` and `psi'(theta)` are
/// finite, lattice or not; only pruning (bounded by `bias_bound`) departs
/// from exactness.
pub fn spinal_tail(law: &ReproductionLaw, theta: f64, n: usize, a: f64, replicas: u64, seed: u64) -> Result<EstimateRecord> {
    spinal_tail_with(law, theta, n, a, replicas, seed, AuxOptions::estimator())
}

pub fn spinal_tail_with(
    law: &ReproductionLaw,
    theta: f64,
    n: usize,
    a: f64,
    replicas: u64,
    seed: u64,
    opts: AuxOptions,
) -> Result<EstimateRecord> {
    let builder = AuxiliaryBuilder::new(law, theta, n, opts)?;
    let cum = law.tilted_cumulants(theta)?;
    let psi = cum.psi;
    let nf = n as f64;
    let level = law.level_units(a);
    let log_scale = nf * psi - theta * a.max(nf * cum.psi_prime);
    let agg = run_replicas(seed, domain::SPINAL, replicas, |_, rng| {
        let mut spine_rng = Stream::from_rng(&mut *rng);
        let mut tree_rng = Stream::from_rng(&mut *rng);
        let spine = builder.sample_spine(n, &mut spine_rng);
        if spine.end() < level {
            return Replica::exact(0.0);
        }
        let r = builder.decorate(&spine, &mut tree_rng);
        if r.capped {
            return Replica::Invalid;
        }
        let rel = (nf * psi - theta * r.s_n - log_scale).exp();
        if r.count_above_zero > 0 {
            Replica::exact(0.0)
        } else {
            Replica::Value { x: rel / r.count_at_zero as f64, bias: rel * r.prune_bias_bound.min(1.0) }
        }
    })?;
    Ok(EstimateRecord::from_aggregate(&agg, log_scale, seed))
}

/// `E Z_n([a, inf)) = exp(n psi) E(exp(-theta S_n) 1{S_n >= a})` through the
/// tilted walk alone.
pub fn mean_count(law: &ReproductionLaw, theta: f64, n: usize, a: f64, replicas: u64, seed: u64) -> Result<EstimateRecord> {
    let sampler = SpineSampler::new(law, theta)?;
    let cum = law.tilted_cumulants(theta)?;
    let nf = n as f64;
    let level = law.level_units(a);
    let log_scale = nf * cum.psi - theta * a.max(nf * cum.psi_prime);
    let agg = run_replicas(seed, domain::WALK, replicas, |_, rng| {
        let s = sampler.sample_walk_end(law, n, rng);
        if s < level {
            Replica::exact(0.0)
        } else {
            Replica::exact((nf * cum.psi - theta * law.to_real(s) - log_scale).exp())
        }
    })?;
    Ok(EstimateRecord::from_aggregate(&agg, log_scale, seed))
}

/// Logarithm of the precise large-deviation approximation
/// `C / (sqrt(2 pi n) sigma theta) exp(-y^2/(2 sigma^2 n) - theta y - n rate)`.
pub fn log_asymptotic_tail(cumulants: &CumulantReport, c_value: f64, n: usize, y: f64) -> f64 {
    let nf = n as f64;
    let s2 = cumulants.sigma2;
    c_value.ln()
        - 0.5 * (2.0 * std::f64::consts::PI * nf).ln()
        - 0.5 * s2.ln()
        - cumulants.theta.ln()
        - y * y / (2.0 * s2 * nf)
        - cumulants.theta * y
        - nf * cumulants.rate
}

pub fn asymptotic_tail(cumulants: &CumulantReport, c_value: f64, n: usize, y: f64) -> f64 {
    log_asymptotic_tail(cumulants, c_value, n, y).exp()
}

#[derive(Debug, Clone, Serialize)]
pub struct LdpPoint {
    pub n: usize,
    pub log_p: f64,
    pub log_stderr: f64,
    pub estimate: EstimateRecord,
}

#[derive(Debug, Clone, Serialize)]
pub struct LdpReport {
    pub x: f64,
    pub theta: f64,
    pub psi_star: f64,
    /// Least-squares slope of `-log P(M_n >= n x)` against `n`.
    pub slope: f64,
    pub intercept: f64,
    pub points: Vec<LdpPoint>,
}

/// Empirical decay rate of `P(M_n >= n x)` over `n_grid`, next to `psi*(x)`.
pub fn ldp_rate(law: &ReproductionLaw, x: f64, n_grid: &[usize], replicas: u64, seed: u64) -> Result<LdpReport> {
    ldp_rate_with(law, x, n_grid, replicas, seed, AuxOptions::estimator())
}

pub fn ldp_rate_with(
    law: &ReproductionLaw,
    x: f64,
    n_grid: &[usize],
    replicas: u64,
    seed: u64,
    opts: AuxOptions,
) -> Result<LdpReport> {
    if n_grid.len() < 2 {
        return Err(Error::InvalidArgument("rate regression needs at least two values of n".into()));
    }
    let point = law.legendre(x)?;
    let theta = point.maximizer.interior().ok_or(Error::OutsideRegime(x))?;
    let speed = law.critical_speed()?;
    if speed.supercritical && x <= speed.x_star {
        return Err(Error::OutsideRegime(x));
    }
    let mut points = Vec::with_capacity(n_grid.len());
    for (k, &n) in n_grid.iter().enumerate() {
        let estimate = spinal_tail_with(law, theta, n, n as f64 * x, replicas, child_seed(seed, k as u64), opts)?;
        if estimate.mean <= 0.0 {
            return Err(Error::NoAcceptedSamples);
        }
        points.push(LdpPoint {
            n,
            log_p: estimate.log_mean,
            log_stderr: estimate.relative_stderr(),
            estimate,
        });
    }
    let m = points.len() as f64;
    let mx = points.iter().map(|p| p.n as f64).sum::<f64>() / m;
    let my = points.iter().map(|p| -p.log_p).sum::<f64>() / m;
    let sxy: f64 = points.iter().map(|p| (p.n as f64 - mx) * (-p.log_p - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.n as f64 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("rate regression needs distinct values of n".into()));
    }
    let slope = sxy / sxx;
    Ok(LdpReport { x, theta, psi_star: point.value, slope, intercept: my - slope * mx, points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reproduction::fixtures::*;

    #[test]
    fn single_child_is_exact() {
        let law = single_child(1);
        let rec = spinal_tail(&law, 1.0, 5, 5.0, 1000, 0).unwrap();
        assert_eq!(rec.mean, 1.0);
        assert_eq!(rec.stderr, 0.0);
        let rec = spinal_tail(&law, 1.0, 5, 5.5, 1000, 0).unwrap();
        assert_eq!(rec.mean, 0.0);
    }

    #[test]
    fn c2pm1_first_generation() {
        let law = c2pm1();
        let rec = spinal_tail(&law, 1.0, 1, 1.0, 100_000, 1).unwrap();
        assert!((rec.mean - 0.75).abs() < 3.0 * rec.stderr, "{rec:?}");
    }

    #[test]
    fn asymptotic_formula_algebra() {
        let cum = binary_gaussian().tilted_cumulants(1.5).unwrap();
        let base = log_asymptotic_tail(&cum, 0.4, 50, 0.0);
        let expected = 0.4f64.ln() - 0.5 * (2.0 * std::f64::consts::PI * 50.0).ln() - 1.5f64.ln() - 50.0 * cum.rate;
        assert!((base - expected).abs() < 1e-12);
        let doubled = log_asymptotic_tail(&cum, 0.4, 100, 0.0);
        assert!((doubled - base - (-50.0 * cum.rate - 0.5 * 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn mean_count_examples() {
        let law = ReproductionLaw::poisson_gaussian(2.0, 0.0, 1.0).unwrap();
        let rec = mean_count(&law, 1.0, 1, 0.0, 100_000, 2).unwrap();
        assert!((rec.mean - 1.0).abs() < 3.0 * rec.stderr, "{rec:?}");
        // four paths reach +2, each with probability 1/4
        let rec = mean_count(&c2pm1(), 0.7, 2, 2.0, 10_000, 3).unwrap();
        assert!((rec.mean - 1.0).abs() < 3.0 * rec.stderr, "{rec:?}");
    }

    #[test]
    fn ldp_rejects_boundary() {
        assert_eq!(ldp_rate(&c2pm1(), 1.0, &[5, 10], 10, 0).unwrap_err(), Error::OutsideRegime(1.0));
        assert_eq!(ldp_rate(&binary_gaussian(), 1.0, &[5, 10], 10, 0).unwrap_err(), Error::OutsideRegime(1.0));
    }
}
