use serde::Serialize;

use crate::error::{Error, Result};
use crate::harness::aggregate::{run_replicas, EstimateRecord, Replica};
use crate::harness::stream::domain;
use crate::reproduction::ReproductionLaw;
use crate::spine::SpineSampler;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GKind {
    /// `g(x) = exp(-theta x) 1{x >= 0}`
    ExpTail,
    /// `g = 1_[0, h)`
    Interval { h: f64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct LltReport {
    pub g: GKind,
    pub n: usize,
    pub y: f64,
    /// `sqrt(n) exp(y^2 / (2 sigma^2 n)) E g(S_n - n psi' + y)`
    pub estimate: EstimateRecord,
    /// `(integral of g) / (sqrt(2 pi) sigma)`
    pub limit: f64,
    pub relative_error: f64,
}

/// Local limit check for the tilted walk against the Gaussian local value.
pub fn llt_check(
    law: &ReproductionLaw,
    theta: f64,
    n: usize,
    g: GKind,
    y: f64,
    replicas: u64,
    seed: u64,
) -> Result<LltReport> {
    if law.is_lattice() {
        return Err(Error::Lattice);
    }
    let cum = law.tilted_cumulants(theta)?;
    let sampler = SpineSampler::new(law, theta)?;
    let nf = n as f64;
    let sigma = cum.sigma();
    let integral = match g {
        GKind::ExpTail => 1.0 / theta,
        GKind::Interval { h } => h,
    };
    let limit = integral / ((2.0 * std::f64::consts::PI).sqrt() * sigma);
    let log_scale = 0.5 * nf.ln() + y * y / (2.0 * cum.sigma2 * nf);
    let agg = run_replicas(seed, domain::WALK, replicas, |_, rng| {
        let x = sampler.sample_walk_end(law, n, rng) - nf * cum.psi_prime + y;
        let v = match g {
            GKind::ExpTail if x >= 0.0 => (-theta * x).exp(),
            GKind::Interval { h } if (0.0..h).contains(&x) => 1.0,
            _ => 0.0,
        };
        Replica::exact(v)
    })?;
    let estimate = EstimateRecord::from_aggregate(&agg, log_scale, seed);
    let relative_error = estimate.mean / limit - 1.0;
    Ok(LltReport { g, n, y, estimate, limit, relative_error })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reproduction::fixtures::*;

    #[test]
    fn lattice_rejected() {
        assert_eq!(llt_check(&c2pm1(), 1.0, 10, GKind::ExpTail, 0.0, 10, 0).unwrap_err(), Error::Lattice);
    }

    #[test]
    fn limits() {
        let law = binary_gaussian();
        let rep = llt_check(&law, 1.5, 100, GKind::ExpTail, 0.0, 1000, 0).unwrap();
        assert!((rep.limit - 0.265962).abs() < 1e-6);
        let rep = llt_check(&law, 1.5, 100, GKind::Interval { h: 0.5 }, 0.0, 1000, 0).unwrap();
        assert!((rep.limit - 0.199471).abs() < 1e-6);
    }
}
