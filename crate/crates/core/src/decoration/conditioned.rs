use serde::Serialize;

use crate::error::{Error, Result};
use crate::harness::aggregate::par_map_indexed;
use crate::harness::stream::domain;
use crate::reproduction::ReproductionLaw;
use crate::tree_sim::{forward_final, PointMeasure};

/// Largest depth accepted by the naive conditioned sampler.
pub const MAX_CONDITIONED_N: usize = 12;
/// Largest decay rate, in nats per generation, accepted by the naive sampler.
pub const MAX_CONDITIONED_RATE: f64 = 0.4;

const BATCH: u64 = 8192;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionedSample {
    pub index: u64,
    /// Generation-`n` positions seen from the maximum, restricted to
    /// `[-window, 0]`.
    pub atoms: PointMeasure,
    /// `M_n - n psi'(theta)`
    pub overshoot: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionedReport {
    pub theta: f64,
    pub n: usize,
    pub window: f64,
    pub samples: Vec<ConditionedSample>,
    pub attempts: u64,
    pub capped: u64,
    pub acceptance_rate: f64,
}

/// Extremal processes of plain forward runs conditioned on
/// `M_n >= n psi'(theta)`, by rejection.
pub fn conditioned_extremal(
    law: &ReproductionLaw,
    theta: f64,
    n: usize,
    target_accepted: usize,
    window: f64,
    cap: u64,
    seed: u64,
) -> Result<ConditionedReport> {
    let cum = law.tilted_cumulants(theta)?;
    if n > MAX_CONDITIONED_N {
        return Err(Error::InvalidArgument(format!("naive conditioning needs n <= {MAX_CONDITIONED_N}, got {n}")));
    }
    if cum.rate > MAX_CONDITIONED_RATE {
        return Err(Error::InvalidArgument(format!(
            "naive conditioning needs rate <= {MAX_CONDITIONED_RATE} nats per generation, got {}",
            cum.rate
        )));
    }
    let centre = n as f64 * cum.psi_prime;
    let level = law.level_units(centre);
    let grid = law.grid();
    let mut samples = Vec::with_capacity(target_accepted);
    let mut attempts = 0u64;
    let mut accepted = 0u64;
    let mut capped = 0u64;
    while samples.len() < target_accepted {
        let batch = par_map_indexed(seed, domain::CONDITIONED, attempts..attempts + BATCH, |i, rng| {
            let units = forward_final(law, n, cap, rng).map_err(|_| ())?;
            let top = units.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if top < level {
                return Ok(None);
            }
            let atoms = PointMeasure::from_units(units.iter().map(|u| u - top), grid).restricted_above(-window);
            Ok(Some(ConditionedSample { index: i, atoms, overshoot: law.to_real(top) - centre }))
        });
        attempts += BATCH;
        for outcome in batch {
            match outcome {
                Err(()) => capped += 1,
                Ok(None) => {}
                Ok(Some(s)) => {
                    accepted += 1;
                    if samples.len() < target_accepted {
                        samples.push(s);
                    }
                }
            }
        }
        if accepted == 0 && attempts >= 1_000_000 {
            return Err(Error::NoAcceptedSamples);
        }
    }
    Ok(ConditionedReport {
        theta,
        n,
        window,
        samples,
        attempts,
        capped,
        acceptance_rate: accepted as f64 / attempts as f64,
    })
}
