use serde::Serialize;

use crate::error::{Error, Result};
use crate::harness::aggregate::par_map_indexed;
use crate::harness::stream::domain;
use crate::reproduction::ReproductionLaw;
use crate::spine::{AuxOptions, AuxiliaryBuilder, DEFAULT_PRUNE_DELTA};
use crate::tree_sim::{PointMeasure, DEFAULT_CAP};

/// Abort when fewer than this fraction of attempts is accepted...
pub const MIN_ACCEPTANCE: f64 = 1e-4;
/// ...after this many attempts.
pub const MIN_ATTEMPTS: u64 = 1_000_000;

const BATCH: u64 = 4096;

/// One draw of the decoration, with where it came from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecorationSample {
    /// Stream index of the accepted realization.
    pub index: u64,
    /// Atoms in `[-window, 0]`; the atom at 0 is the spine tip.
    pub atoms: PointMeasure,
    pub n: usize,
    pub s_n: f64,
    pub prune_bias_bound: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecorationReport {
    pub theta: f64,
    pub n_max: usize,
    pub window: f64,
    pub samples: Vec<DecorationSample>,
    pub attempts: u64,
    /// Capped realizations, counted as rejections.
    pub capped: u64,
    /// Accepted fraction of `attempts`; estimates `C(theta)`.
    pub acceptance_rate: f64,
    pub acceptance_stderr: f64,
    /// Set when the window is zero and every sample is the single atom at 0.
    pub window_too_small: bool,
}

/// Default window for decoration sampling.
pub fn default_window(theta: f64) -> f64 {
    10.0 / theta
}

/// Rejection sampler for the decoration: realizations of `D_{n_max}` in
/// `[-window, inf)` are accepted when they have no atom above 0 and no tie at
/// 0 from a sibling ranked before the spine child.
///
/// Attempts run in batches of indexed streams and accepted samples are kept
/// in index order, so the output depends only on the seed.
pub fn sample_decoration(
    law: &ReproductionLaw,
    theta: f64,
    n_max: usize,
    target_accepted: usize,
    window: f64,
    seed: u64,
) -> Result<DecorationReport> {
    sample_decoration_with(law, theta, n_max, target_accepted, seed, AuxOptions {
        window,
        prune_delta: DEFAULT_PRUNE_DELTA,
        cap: DEFAULT_CAP,
        stop_at_positive: true,
        keep_atoms: true,
    })
}

pub fn sample_decoration_with(
    law: &ReproductionLaw,
    theta: f64,
    n_max: usize,
    target_accepted: usize,
    seed: u64,
    opts: AuxOptions,
) -> Result<DecorationReport> {
    let opts = AuxOptions { stop_at_positive: true, keep_atoms: true, ..opts };
    let builder = AuxiliaryBuilder::new(law, theta, n_max, opts)?;
    let mut samples = Vec::with_capacity(target_accepted);
    let mut attempts = 0u64;
    let mut accepted = 0u64;
    let mut capped = 0u64;
    while samples.len() < target_accepted {
        if attempts >= MIN_ATTEMPTS && (accepted as f64) < MIN_ACCEPTANCE * attempts as f64 {
            return Err(Error::AcceptanceTooLow {
                rate: accepted as f64 / attempts as f64,
                attempts,
                floor: MIN_ACCEPTANCE,
            });
        }
        let batch = par_map_indexed(seed, domain::DECORATION, attempts..attempts + BATCH, |i, rng| {
            let r = builder.build(n_max, rng);
            if r.capped {
                return Err(());
            }
            if r.count_above_zero > 0 || r.bar_count > 0 {
                return Ok(None);
            }
            let atoms = r.atoms.expect("atoms requested");
            assert_eq!(atoms.mass_above(0.0), 0, "accepted decoration has mass above 0");
            Ok(Some(DecorationSample { index: i, atoms, n: r.n, s_n: r.s_n, prune_bias_bound: r.prune_bias_bound }))
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
    }
    let p = accepted as f64 / attempts as f64;
    Ok(DecorationReport {
        theta,
        n_max,
        window: opts.window,
        samples,
        attempts,
        capped,
        acceptance_rate: p,
        acceptance_stderr: (p * (1.0 - p) / attempts as f64).sqrt(),
        window_too_small: opts.window == 0.0,
    })
}

/// One CSV line per atom: `sample_id,location,multiplicity`.
pub fn decoration_csv(samples: &[DecorationSample]) -> String {
    let mut out = String::from("sample_id,location,multiplicity\n");
    for (id, s) in samples.iter().enumerate() {
        for a in s.atoms.atoms() {
            out.push_str(&format!("{id},{},{}\n", crate::harness::report::format_f64(a.location), a.multiplicity));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reproduction::fixtures::*;

    #[test]
    fn single_child_is_dirac() {
        let rep = sample_decoration(&single_child(1), 1.0, 30, 50, 10.0, 0).unwrap();
        assert_eq!(rep.acceptance_rate, 1.0);
        assert!(rep.samples.iter().all(|s| s.atoms == PointMeasure::dirac(0.0)));
        assert!(!rep.window_too_small);
    }

    #[test]
    fn zero_window_collapses() {
        let rep = sample_decoration(&binary_gaussian(), 1.5, 20, 100, 0.0, 1).unwrap();
        assert!(rep.window_too_small);
        assert!(rep.samples.iter().all(|s| s.atoms == PointMeasure::dirac(0.0)));
        assert!(rep.acceptance_rate > 0.0 && rep.acceptance_rate < 1.0);
    }

    #[test]
    fn samples_live_below_zero() {
        let rep = sample_decoration(&binary_gaussian(), 1.5, 20, 100, 4.0, 2).unwrap();
        assert_eq!(rep.samples.len(), 100);
        for s in &rep.samples {
            assert_eq!(s.atoms.mass_at(0.0), 1);
            assert_eq!(s.atoms.mass_above(0.0), 0);
            assert!(s.atoms.atoms()[0].location >= -4.0);
        }
        assert!(rep.samples.windows(2).all(|w| w[0].index < w[1].index));
    }

    #[test]
    fn lattice_ties_respect_ranking() {
        let rep = sample_decoration(&c2pm1(), 1.0, 3, 200, f64::INFINITY, 3).unwrap();
        for s in &rep.samples {
            assert_eq!(s.atoms.mass_above(0.0), 0);
            assert_eq!(s.atoms.total_mass(), 8);
        }
        assert!(rep.samples.iter().any(|s| s.atoms.mass_at(0.0) > 1));
    }

    #[test]
    fn csv_lists_atoms() {
        let s = DecorationSample { index: 0, atoms: PointMeasure::from_points([0.0, -1.5, -1.5]), n: 2, s_n: 0.0, prune_bias_bound: 0.0 };
        assert_eq!(decoration_csv(&[s]), "sample_id,location,multiplicity\n0,-1.5,2\n0,0.0,1\n");
    }
}
