use rand::Rng;
use serde::Serialize;

use super::point::{MaxDisplacement, PointMeasure};
use crate::error::{Error, Result};
use crate::harness::aggregate::{run_replicas, EstimateRecord, Replica};
use crate::harness::stream::domain;
use crate::reproduction::{log_sum_exp, ReproductionLaw};

/// Default population cap for forward runs.
pub const DEFAULT_CAP: u64 = 1_000_000;

/// A naive estimate is flagged once more than this fraction of replicas hit
/// the population cap.
pub const MAX_INVALID_FRACTION: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenerationSnapshot {
    pub n: usize,
    /// Empty when `capped`.
    pub positions: PointMeasure,
    pub max: MaxDisplacement,
    pub population: u64,
    /// The population exceeded the cap during this generation. Positions,
    /// maximum and population are then meaningless.
    pub capped: bool,
}

impl GenerationSnapshot {
    fn from_units(n: usize, units: &[f64], law: &ReproductionLaw) -> GenerationSnapshot {
        let positions = PointMeasure::from_units(units.iter().copied(), law.grid());
        let max = positions.max_location().map_or(MaxDisplacement::NegInf, MaxDisplacement::At);
        GenerationSnapshot { n, population: units.len() as u64, positions, max, capped: false }
    }

    fn capped(n: usize) -> GenerationSnapshot {
        GenerationSnapshot {
            n,
            positions: PointMeasure::empty(),
            max: MaxDisplacement::NegInf,
            population: 0,
            capped: true,
        }
    }
}

/// Advances one generation. Returns false when the population would exceed
/// `cap`; `next` is then incomplete.
pub(crate) fn step_generation<R: Rng + ?Sized>(
    law: &ReproductionLaw,
    current: &[f64],
    next: &mut Vec<f64>,
    brood: &mut Vec<f64>,
    cap: u64,
    rng: &mut R,
) -> bool {
    next.clear();
    for &x in current {
        brood.clear();
        law.sample_brood(rng, brood);
        if (next.len() + brood.len()) as u64 > cap {
            return false;
        }
        next.extend(brood.iter().map(|d| x + d));
    }
    true
}

/// Simulates generations `0..=n`. Stops after the first capped generation,
/// which is included with `capped` set.
pub fn run_forward<R: Rng + ?Sized>(law: &ReproductionLaw, n: usize, cap: u64, rng: &mut R) -> Vec<GenerationSnapshot> {
    let mut current = vec![0.0];
    let mut next = Vec::new();
    let mut brood = Vec::new();
    let mut out = vec![GenerationSnapshot::from_units(0, &current, law)];
    for g in 1..=n {
        if !step_generation(law, &current, &mut next, &mut brood, cap, rng) {
            out.push(GenerationSnapshot::capped(g));
            break;
        }
        std::mem::swap(&mut current, &mut next);
        out.push(GenerationSnapshot::from_units(g, &current, law));
    }
    out
}

/// Positions of generation `n` in grid units, unsorted.
pub fn forward_final<R: Rng + ?Sized>(law: &ReproductionLaw, n: usize, cap: u64, rng: &mut R) -> Result<Vec<f64>> {
    let mut current = vec![0.0];
    let mut next = Vec::new();
    let mut brood = Vec::new();
    for _ in 0..n {
        if current.is_empty() {
            break;
        }
        if !step_generation(law, &current, &mut next, &mut brood, cap, rng) {
            return Err(Error::Capped);
        }
        std::mem::swap(&mut current, &mut next);
    }
    Ok(current)
}

/// Positions seen from the rightmost particle.
pub fn extremal_process(snapshot: &GenerationSnapshot) -> Result<PointMeasure> {
    if snapshot.capped {
        return Err(Error::Capped);
    }
    match snapshot.max {
        MaxDisplacement::NegInf => Err(Error::Extinct),
        MaxDisplacement::At(m) => Ok(snapshot.positions.shifted(-m)),
    }
}

/// `W_n = sum_{|u|=n} exp(theta V(u) - n psi)`, zero on extinction.
pub fn additive_martingale(snapshot: &GenerationSnapshot, theta: f64, psi_theta: f64) -> Result<f64> {
    if snapshot.capped {
        return Err(Error::Capped);
    }
    if snapshot.positions.is_empty() {
        return Ok(0.0);
    }
    let n = snapshot.n as f64;
    let log_w = log_sum_exp(
        snapshot
            .positions
            .atoms()
            .iter()
            .map(|a| (a.multiplicity as f64).ln() + theta * a.location - n * psi_theta),
    );
    Ok(log_w.exp())
}

/// Plain Monte Carlo frequency of `{M_n >= a}`. Capped replicas are excluded
/// and counted.
pub fn naive_tail(law: &ReproductionLaw, n: usize, a: f64, replicas: u64, cap: u64, seed: u64) -> Result<EstimateRecord> {
    let level = law.level_units(a);
    let agg = run_replicas(seed, domain::FORWARD, replicas, |_, rng| match forward_final(law, n, cap, rng) {
        Ok(units) => Replica::exact(if units.iter().any(|&x| x >= level) { 1.0 } else { 0.0 }),
        Err(_) => Replica::Invalid,
    })?;
    Ok(EstimateRecord::from_aggregate(&agg, 0.0, seed))
}
