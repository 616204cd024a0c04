use serde::Serialize;

use crate::error::{Error, Result};
use crate::harness::aggregate::par_map_indexed;
use crate::harness::stream::{child_seed, domain};
use crate::harness::Moments;
use crate::reproduction::{ReproductionLaw, Regime};
use crate::spine::{AuxOptions, AuxiliaryBuilder};
use crate::tree_sim::DEFAULT_CAP;

#[derive(Debug, Clone, Serialize)]
pub struct ProfilePoint {
    pub n: usize,
    pub replicas: u64,
    pub capped: u64,
    pub mean: f64,
    pub stderr: f64,
    pub median: u64,
    pub p99: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProfileReport {
    pub theta: f64,
    pub points: Vec<ProfilePoint>,
}

/// Distribution of the total mass `D_n(R)` at each `n` of the grid, with no
/// window and no pruning. Grid points use independent streams.
pub fn atom_count_profile(
    law: &ReproductionLaw,
    theta: f64,
    n_grid: &[usize],
    replicas: u64,
    seed: u64,
) -> Result<ProfileReport> {
    if law.regime() == Regime::Supercritical {
        return Err(Error::Supercritical);
    }
    let max_n = n_grid.iter().copied().max().unwrap_or(0);
    let opts = AuxOptions { window: f64::INFINITY, prune_delta: 0.0, cap: DEFAULT_CAP, stop_at_positive: false, keep_atoms: false };
    let builder = AuxiliaryBuilder::new(law, theta, max_n, opts)?;
    let mut points = Vec::with_capacity(n_grid.len());
    for (k, &n) in n_grid.iter().enumerate() {
        let counts: Vec<Option<u64>> = par_map_indexed(child_seed(seed, k as u64), domain::PROFILE, 0..replicas, |_, rng| {
            let r = builder.build(n, rng);
            (!r.capped).then_some(r.atoms_in_window)
        });
        let mut valid: Vec<u64> = counts.iter().flatten().copied().collect();
        let capped = replicas - valid.len() as u64;
        if valid.is_empty() {
            return Err(Error::ZeroCount);
        }
        let m = Moments::from_slice(&valid.iter().map(|&c| c as f64).collect::<Vec<_>>());
        valid.sort_unstable();
        let q = |p: f64| valid[((p * valid.len() as f64).ceil() as usize).clamp(1, valid.len()) - 1];
        points.push(ProfilePoint {
            n,
            replicas: valid.len() as u64,
            capped,
            mean: m.mean,
            stderr: m.stderr(),
            median: q(0.5),
            p99: q(0.99),
        });
    }
    Ok(ProfileReport { theta, points })
}
