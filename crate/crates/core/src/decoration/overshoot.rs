use rand::{Rng, SeedableRng};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::harness::aggregate::par_map_indexed;
use crate::harness::stream::{child_seed, domain, Stream};
use crate::reproduction::ReproductionLaw;
use crate::spine::{AuxOptions, AuxiliaryBuilder};

/// Resamples used to calibrate the weighted KS distance.
pub const BOOTSTRAP_RESAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightedSample {
    pub value: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OvershootReport {
    pub theta: f64,
    pub n: usize,
    pub replicas: u64,
    pub capped: u64,
    /// Positive-weight samples sorted by value.
    pub samples: Vec<WeightedSample>,
    /// `(sum w)^2 / sum w^2`
    pub effective_size: f64,
    pub mean: f64,
    pub mean_stderr: f64,
    /// Weighted KS distance against `Exp(theta)`.
    pub ks_distance: f64,
    /// Bootstrap 99% quantile of the weighted KS statistic.
    pub ks_critical_99: f64,
    pub ks_reject: bool,
    pub prune_bias_bound: f64,
}

/// Importance-weighted samples of `M_n - n psi'(theta)` given
/// `M_n >= n psi'(theta)`.
///
/// A replica contributes the value `S_n - n psi'` with weight
/// `exp(-theta (S_n - n psi')) / D_n({0})` when `S_n >= n psi'` and
/// `D_n((0, inf)) = 0`, and nothing otherwise.
pub fn conditioned_overshoot(law: &ReproductionLaw, theta: f64, n: usize, replicas: u64, seed: u64) -> Result<OvershootReport> {
    conditioned_overshoot_with(law, theta, n, replicas, seed, AuxOptions::estimator())
}

pub fn conditioned_overshoot_with(
    law: &ReproductionLaw,
    theta: f64,
    n: usize,
    replicas: u64,
    seed: u64,
    opts: AuxOptions,
) -> Result<OvershootReport> {
    let builder = AuxiliaryBuilder::new(law, theta, n, opts)?;
    let cum = law.tilted_cumulants(theta)?;
    let centre = n as f64 * cum.psi_prime;
    let level = law.level_units(centre);
    // None: capped; Some(None): zero weight
    let raw: Vec<Option<Option<(WeightedSample, f64)>>> =
        par_map_indexed(seed, domain::OVERSHOOT, 0..replicas, |_, rng| {
            let mut spine_rng = Stream::from_rng(&mut *rng);
            let mut tree_rng = Stream::from_rng(&mut *rng);
            let spine = builder.sample_spine(n, &mut spine_rng);
            if spine.end() < level {
                return Some(None);
            }
            let r = builder.decorate(&spine, &mut tree_rng);
            if r.capped {
                return None;
            }
            if r.count_above_zero > 0 {
                return Some(None);
            }
            let value = r.s_n - centre;
            let weight = (-theta * value).exp() / r.count_at_zero as f64;
            Some(Some((WeightedSample { value, weight }, weight * r.prune_bias_bound.min(1.0))))
        });
    let capped = raw.iter().filter(|r| r.is_none()).count() as u64;
    let mut bias = 0.0;
    let mut samples: Vec<WeightedSample> = Vec::new();
    for (s, b) in raw.into_iter().flatten().flatten() {
        samples.push(s);
        bias += b;
    }
    let used = replicas - capped;
    if samples.is_empty() {
        return Err(Error::NoAcceptedSamples);
    }
    samples.sort_by(|a, b| a.value.total_cmp(&b.value));
    let (mean, mean_stderr) = weighted_mean(&samples);
    let total: f64 = samples.iter().map(|s| s.weight).sum();
    let sq: f64 = samples.iter().map(|s| s.weight * s.weight).sum();
    let ks_distance = weighted_ks_exp(&samples, theta);
    let ks_critical_99 = bootstrap_ks_quantile(&samples, used, BOOTSTRAP_RESAMPLES, 0.99, child_seed(seed, 1));
    Ok(OvershootReport {
        theta,
        n,
        replicas,
        capped,
        effective_size: total * total / sq,
        mean,
        mean_stderr,
        ks_distance,
        ks_critical_99,
        ks_reject: ks_distance > ks_critical_99,
        prune_bias_bound: bias / total,
        samples,
    })
}

/// Ratio-estimator mean and its delta-method standard error.
pub fn weighted_mean(samples: &[WeightedSample]) -> (f64, f64) {
    let total: f64 = samples.iter().map(|s| s.weight).sum();
    let mean = samples.iter().map(|s| s.weight * s.value).sum::<f64>() / total;
    let var: f64 = samples.iter().map(|s| (s.weight * (s.value - mean)).powi(2)).sum();
    (mean, var.sqrt() / total)
}

/// Ends of runs of equal values in a sorted sample, with the normalised
/// cumulative weight at each end.
fn ecdf_steps(samples: &[WeightedSample], weight: impl Fn(usize) -> f64) -> Vec<(usize, f64)> {
    let total: f64 = (0..samples.len()).map(&weight).sum();
    let mut out = Vec::new();
    let mut cum = 0.0;
    for i in 0..samples.len() {
        cum += weight(i);
        if i + 1 == samples.len() || samples[i + 1].value != samples[i].value {
            out.push((i, cum / total));
        }
    }
    out
}

/// `sup |F_w - F|` against `Exp(theta)` for a weighted sample sorted by value.
pub fn weighted_ks_exp(samples: &[WeightedSample], theta: f64) -> f64 {
    let cdf = |x: f64| if x <= 0.0 { 0.0 } else { -(-theta * x).exp_m1() };
    let mut d: f64 = 0.0;
    let mut before = 0.0;
    for (i, f) in ecdf_steps(samples, |i| samples[i].weight) {
        let g = cdf(samples[i].value);
        d = d.max((f - g).abs()).max((before - g).abs());
        before = f;
    }
    d
}

/// Quantile `q` of `sup |F*_w - F_w|` over bootstrap resamples of all
/// `population` replicas, of which the first `samples.len()` carry weight.
pub fn bootstrap_ks_quantile(samples: &[WeightedSample], population: u64, resamples: usize, q: f64, seed: u64) -> f64 {
    let k = samples.len();
    let base = ecdf_steps(samples, |i| samples[i].weight);
    let mut stats: Vec<f64> = par_map_indexed(seed, domain::BOOTSTRAP, 0..resamples as u64, |_, rng| {
        let mut counts = vec![0u32; k];
        for _ in 0..population {
            let j = rng.random_range(0..population);
            if (j as usize) < k {
                counts[j as usize] += 1;
            }
        }
        let star = ecdf_steps(samples, |i| counts[i] as f64 * samples[i].weight);
        base.iter().zip(&star).map(|((_, f), (_, g))| (f - g).abs()).fold(0.0, f64::max)
    });
    stats.retain(|d| d.is_finite());
    stats.sort_by(f64::total_cmp);
    if stats.is_empty() {
        return f64::NAN;
    }
    let idx = ((q * stats.len() as f64).ceil() as usize).clamp(1, stats.len()) - 1;
    stats[idx]
}
