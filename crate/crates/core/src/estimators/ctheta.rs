use serde::Serialize;

use crate::error::{Error, Result};
use crate::harness::aggregate::{par_map_indexed, run_replicas, EstimateRecord, Replica};
use crate::harness::stream::{child_seed, domain};
use crate::reproduction::ReproductionLaw;
use crate::spine::{AuxOptions, AuxiliaryBuilder};

/// Depth of the pilot run that picks `n_max` when none is given.
pub const PILOT_N: usize = 200;
/// Realizations in the pilot and in the stabilization diagnostic.
pub const PILOT_REPLICAS: u64 = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CVariant {
    /// `E 1{D((0, inf)) = 0} / D({0})`
    Weighted,
    /// `P(D((0, inf)) = 0, bar D = 0)`
    Indicator,
}

impl CVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            CVariant::Weighted => "weighted",
            CVariant::Indicator => "indicator",
        }
    }

    fn stream_domain(self) -> u64 {
        match self {
            CVariant::Weighted => domain::CTHETA,
            CVariant::Indicator => domain::CTHETA + 64,
        }
    }
}

impl std::str::FromStr for CVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<CVariant> {
        match s {
            "weighted" => Ok(CVariant::Weighted),
            "indicator" => Ok(CVariant::Indicator),
            other => Err(Error::InvalidArgument(format!("unknown variant `{other}`"))),
        }
    }
}

/// Quantiles of the last generation contributing an atom at or above 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stabilization {
    pub n: usize,
    pub realizations: u64,
    pub median: usize,
    pub q99: usize,
    pub q999: usize,
    /// The 99.9% quantile is below `n / 2`.
    pub stabilized: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CThetaReport {
    pub variant: CVariant,
    pub n_max: usize,
    /// `n_max` came from the pilot run rather than the caller.
    pub n_max_from_pilot: bool,
    /// `theta psi'(theta) > psi(theta)`; without it the estimate is not
    /// meaningful.
    pub as1: bool,
    pub estimate: EstimateRecord,
    pub stabilization: Stabilization,
}

fn quantile(sorted: &[usize], q: f64) -> usize {
    if sorted.is_empty() {
        return 0;
    }
    let idx = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1;
    sorted[idx]
}

/// Last contributing generations of full realizations at depth `n`, built
/// with `opts` but without early exit.
pub fn stabilization_profile(
    law: &ReproductionLaw,
    theta: f64,
    n: usize,
    realizations: u64,
    seed: u64,
    opts: AuxOptions,
) -> Result<Stabilization> {
    let opts = AuxOptions { stop_at_positive: false, keep_atoms: false, ..opts };
    let builder = AuxiliaryBuilder::new(law, theta, n, opts)?;
    let mut last: Vec<usize> = par_map_indexed(seed, domain::PILOT, 0..realizations, |_, rng| {
        builder.build(n, rng).last_contributing_generation
    });
    last.sort_unstable();
    let q999 = quantile(&last, 0.999);
    Ok(Stabilization {
        n,
        realizations,
        median: quantile(&last, 0.5),
        q99: quantile(&last, 0.99),
        q999,
        stabilized: (q999 as f64) < n as f64 / 2.0,
    })
}

/// Smallest `n` whose pilot 99.9% quantile of the last contributing
/// generation is below `n / 2`.
pub fn default_n_max(law: &ReproductionLaw, theta: f64, seed: u64, opts: AuxOptions) -> Result<(usize, Stabilization)> {
    let pilot = stabilization_profile(law, theta, PILOT_N, PILOT_REPLICAS, seed, opts)?;
    let n = (2 * pilot.q999 + 1).min(PILOT_N);
    Ok((n.max(1), pilot))
}

/// Monte Carlo estimate of `C(theta)` from realizations of `D_{n_max}`.
pub fn c_theta(
    law: &ReproductionLaw,
    theta: f64,
    n_max: Option<usize>,
    replicas: u64,
    variant: CVariant,
    seed: u64,
) -> Result<CThetaReport> {
    c_theta_with(law, theta, n_max, replicas, variant, seed, AuxOptions::estimator())
}

pub fn c_theta_with(
    law: &ReproductionLaw,
    theta: f64,
    n_max: Option<usize>,
    replicas: u64,
    variant: CVariant,
    seed: u64,
    opts: AuxOptions,
) -> Result<CThetaReport> {
    let as1 = law.tilted_cumulants(theta)?.rate > 0.0;
    let (n_max, stabilization, from_pilot) = match n_max {
        Some(n) => {
            let diag = stabilization_profile(law, theta, n, replicas.min(PILOT_REPLICAS), child_seed(seed, 1), opts)?;
            (n, diag, false)
        }
        None => {
            let (n, pilot) = default_n_max(law, theta, child_seed(seed, 1), opts)?;
            (n, pilot, true)
        }
    };
    let builder = AuxiliaryBuilder::new(law, theta, n_max, opts)?;
    let agg = run_replicas(seed, variant.stream_domain(), replicas, |_, rng| {
        let r = builder.build(n_max, rng);
        if r.capped {
            return Replica::Invalid;
        }
        let x = match variant {
            CVariant::Weighted => r.weighted_indicator(),
            CVariant::Indicator => r.lexicographic_indicator(),
        };
        let bias = if r.truncated { 0.0 } else { r.prune_bias_bound.min(1.0) };
        Replica::Value { x, bias }
    })?;
    Ok(CThetaReport {
        variant,
        n_max,
        n_max_from_pilot: from_pilot,
        as1,
        estimate: EstimateRecord::from_aggregate(&agg, 0.0, seed),
        stabilization,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub theta: f64,
    pub estimate: EstimateRecord,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub variant: CVariant,
    pub n_max: usize,
    pub points: Vec<SweepPoint>,
    /// Largest `|C(t_{i+1}) - C(t_i)|` in units of the combined standard error.
    pub max_jump_sigmas: f64,
}

/// `C(theta)` across a grid of tilts, with the largest adjacent jump.
pub fn theta_sweep(
    law: &ReproductionLaw,
    thetas: &[f64],
    n_max: usize,
    replicas: u64,
    variant: CVariant,
    seed: u64,
    opts: AuxOptions,
) -> Result<SweepReport> {
    let mut points = Vec::with_capacity(thetas.len());
    for (k, &theta) in thetas.iter().enumerate() {
        let builder = AuxiliaryBuilder::new(law, theta, n_max, opts)?;
        let agg = run_replicas(child_seed(seed, k as u64), variant.stream_domain(), replicas, |_, rng| {
            let r = builder.build(n_max, rng);
            if r.capped {
                return Replica::Invalid;
            }
            let x = match variant {
                CVariant::Weighted => r.weighted_indicator(),
                CVariant::Indicator => r.lexicographic_indicator(),
            };
            Replica::Value { x, bias: if r.truncated { 0.0 } else { r.prune_bias_bound.min(1.0) } }
        })?;
        points.push(SweepPoint { theta, estimate: EstimateRecord::from_aggregate(&agg, 0.0, seed) });
    }
    let max_jump_sigmas = points
        .windows(2)
        .map(|w| {
            let (a, b) = (&w[0].estimate, &w[1].estimate);
            let se = (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
            let d = (a.mean - b.mean).abs();
            if se > 0.0 {
                d / se
            } else if d == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        })
        .fold(0.0, f64::max);
    Ok(SweepReport { variant, n_max, points, max_jump_sigmas })
}
