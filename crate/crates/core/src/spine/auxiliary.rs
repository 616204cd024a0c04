use rand::{Rng, SeedableRng};
use serde::Serialize;

use super::brood::{SizeBiasedBrood, SpineSampler};
use super::prune::PruneTable;
use crate::error::{Error, Result};
use crate::harness::stream::Stream;
use crate::reproduction::ReproductionLaw;
use crate::tree_sim::{PointMeasure, DEFAULT_CAP};

pub const DEFAULT_PRUNE_DELTA: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AuxOptions {
    /// Atoms below `-window` are discarded at birth. May be infinite.
    pub window: f64,
    /// Per-particle pruning threshold on expected lost atoms; 0 disables.
    pub prune_delta: f64,
    /// Largest live subtree generation before the realization is abandoned.
    pub cap: u64,
    /// Stop at the first atom above 0. Enough for every estimator, which
    /// gives such realizations weight zero.
    pub stop_at_positive: bool,
    pub keep_atoms: bool,
}

impl AuxOptions {
    /// Settings for tail and `C(theta)` estimation: window 0, early exit.
    pub fn estimator() -> AuxOptions {
        AuxOptions {
            window: 0.0,
            prune_delta: DEFAULT_PRUNE_DELTA,
            cap: DEFAULT_CAP,
            stop_at_positive: true,
            keep_atoms: false,
        }
    }

    /// Complete realizations restricted to `[-window, inf)`.
    pub fn full(window: f64) -> AuxOptions {
        AuxOptions { window, stop_at_positive: false, keep_atoms: true, ..AuxOptions::estimator() }
    }
}

/// The spine part of a realization: `n` size-biased broods and the partial
/// sums `S_1..S_n` (grid units).
#[derive(Debug, Clone, PartialEq)]
pub struct Spine {
    pub broods: Vec<SizeBiasedBrood>,
    pub s_units: Vec<f64>,
}

impl Spine {
    pub fn len(&self) -> usize {
        self.broods.len()
    }

    pub fn is_empty(&self) -> bool {
        self.broods.is_empty()
    }

    /// `S_n` in grid units.
    pub fn end(&self) -> f64 {
        self.s_units.last().copied().unwrap_or(0.0)
    }
}

/// One draw of the auxiliary point process `D_n`, seen from the spine tip.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuxiliaryRealization {
    pub n: usize,
    pub window: f64,
    /// Atoms in `[-window, inf)`, including the atom of the tip at 0.
    /// `None` unless requested.
    pub atoms: Option<PointMeasure>,
    pub s_n: f64,
    pub s_path: Vec<f64>,
    /// `D_n({0})`, at least 1.
    pub count_at_zero: u64,
    /// `D_n((0, inf))`.
    pub count_above_zero: u64,
    /// Subtree atoms at exactly 0 descending from siblings ranked before the
    /// spine child.
    pub bar_count: u64,
    /// Sum of the pruning charges; an upper bound on the expected number of
    /// atoms in the window lost to pruning.
    pub prune_bias_bound: f64,
    pub pruned: u64,
    /// Largest spine generation whose subtrees put an atom in the window,
    /// 0 if none did.
    pub last_contributing_generation: usize,
    /// Per generation `k = 1..n`: highest atom in the window coming from the
    /// generation-`k` siblings.
    pub level_max: Vec<Option<f64>>,
    /// Atoms in the window, the tip included.
    pub atoms_in_window: u64,
    /// Subtree particles simulated, a work measure.
    pub particles: u64,
    pub capped: bool,
    /// Construction stopped at the first atom above 0; the counts are
    /// incomplete.
    pub truncated: bool,
}

impl AuxiliaryRealization {
    /// `1 / D({0})` on `{D((0, inf)) = 0}`, else 0.
    pub fn weighted_indicator(&self) -> f64 {
        if self.count_above_zero == 0 {
            1.0 / self.count_at_zero as f64
        } else {
            0.0
        }
    }

    /// `1{D((0, inf)) = 0, bar D = 0}`.
    pub fn lexicographic_indicator(&self) -> f64 {
        if self.count_above_zero == 0 && self.bar_count == 0 {
            1.0
        } else {
            0.0
        }
    }
}

/// Builds auxiliary realizations for one law, tilt and option set.
#[derive(Debug, Clone)]
pub struct AuxiliaryBuilder<'a> {
    law: &'a ReproductionLaw,
    sampler: SpineSampler,
    prune: PruneTable,
    opts: AuxOptions,
    window_units: f64,
}

impl<'a> AuxiliaryBuilder<'a> {
    /// `max_n` bounds the generations later passed to [`Self::build`].
    pub fn new(law: &'a ReproductionLaw, theta: f64, max_n: usize, opts: AuxOptions) -> Result<AuxiliaryBuilder<'a>> {
        if !(opts.window >= 0.0) {
            return Err(Error::InvalidArgument(format!("window must be non-negative, got {}", opts.window)));
        }
        if !(opts.prune_delta >= 0.0) {
            return Err(Error::InvalidArgument(format!("prune delta must be non-negative, got {}", opts.prune_delta)));
        }
        let sampler = SpineSampler::new(law, theta)?;
        let prune = if opts.window.is_finite() {
            PruneTable::new(law, max_n, opts.prune_delta)?
        } else {
            PruneTable::disabled(law)
        };
        Ok(AuxiliaryBuilder { law, sampler, prune, opts, window_units: law.to_units(opts.window) })
    }

    pub fn sampler(&self) -> &SpineSampler {
        &self.sampler
    }

    pub fn options(&self) -> &AuxOptions {
        &self.opts
    }

    pub fn sample_spine<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Spine {
        let mut broods = Vec::with_capacity(n);
        let mut s_units = Vec::with_capacity(n);
        let mut s = 0.0;
        for _ in 0..n {
            let b = self.sampler.sample(self.law, rng);
            s += b.spine_displacement();
            s_units.push(s);
            broods.push(b);
        }
        Spine { broods, s_units }
    }

    /// Spine and subtrees from two child streams of `rng`, so the
    /// realization at `n` is a restriction of the one at `n + 1`.
    pub fn build<R: Rng>(&self, n: usize, rng: &mut R) -> AuxiliaryRealization {
        let mut spine_rng = Stream::from_rng(rng);
        let mut tree_rng = Stream::from_rng(rng);
        let spine = self.sample_spine(n, &mut spine_rng);
        self.decorate(&spine, &mut tree_rng)
    }

    /// Grows the sibling subtrees of `spine`.
    ///
    /// A sibling at generation `k` starts at `b_k(i) - S_k` and runs for
    /// `k - 1` further generations; its leaves are the atoms.
    pub fn decorate<R: Rng + ?Sized>(&self, spine: &Spine, rng: &mut R) -> AuxiliaryRealization {
        let law = self.law;
        let n = spine.len();
        let w = self.window_units;
        let grid = law.grid();
        let mut out = AuxiliaryRealization {
            n,
            window: self.opts.window,
            atoms: None,
            s_n: law.to_real(spine.end()),
            s_path: spine.s_units.iter().map(|s| law.to_real(*s)).collect(),
            count_at_zero: 1,
            count_above_zero: 0,
            bar_count: 0,
            prune_bias_bound: 0.0,
            pruned: 0,
            last_contributing_generation: 0,
            level_max: vec![None; n],
            atoms_in_window: 1,
            particles: 0,
            capped: false,
            truncated: false,
        };
        let mut kept: Vec<f64> = if self.opts.keep_atoms { vec![0.0] } else { Vec::new() };
        let mut current: Vec<(f64, bool)> = Vec::new();
        let mut next: Vec<(f64, bool)> = Vec::new();
        let mut brood: Vec<f64> = Vec::new();

        'levels: for k in 1..=n {
            let b = &spine.broods[k - 1];
            let s_k = spine.s_units[k - 1];
            current.clear();
            for (i, d) in b.displacements.iter().enumerate() {
                if i != b.spine_index {
                    current.push((d - s_k, i < b.spine_index));
                }
            }
            let mut remaining = k - 1;
            while remaining > 0 && !current.is_empty() {
                next.clear();
                let radius = self.prune.radius(remaining);
                for &(p, lex) in &current {
                    let distance = -w - p;
                    if self.prune.unreachable(distance, remaining) {
                        continue;
                    }
                    if distance > radius {
                        out.pruned += 1;
                        out.prune_bias_bound += self.prune.charge(distance, remaining);
                        continue;
                    }
                    brood.clear();
                    law.sample_brood(rng, &mut brood);
                    next.extend(brood.iter().map(|d| (p + d, lex)));
                    if next.len() as u64 > self.opts.cap {
                        out.capped = true;
                        break 'levels;
                    }
                }
                out.particles += next.len() as u64;
                std::mem::swap(&mut current, &mut next);
                remaining -= 1;
            }
            for &(p, lex) in &current {
                if p < -w {
                    continue;
                }
                out.atoms_in_window += 1;
                out.last_contributing_generation = k;
                let real = p / grid;
                let slot = &mut out.level_max[k - 1];
                *slot = Some(slot.map_or(real, |m: f64| m.max(real)));
                if self.opts.keep_atoms {
                    kept.push(p);
                }
                if p > 0.0 {
                    out.count_above_zero += 1;
                    if self.opts.stop_at_positive {
                        out.truncated = true;
                        break 'levels;
                    }
                } else if p == 0.0 {
                    out.count_at_zero += 1;
                    if lex {
                        out.bar_count += 1;
                    }
                }
            }
        }
        if self.opts.keep_atoms {
            out.atoms = Some(PointMeasure::from_units(kept, grid));
        }
        out
    }
}

/// One full realization of `D_n` restricted to `[-window, inf)`.
pub fn build_auxiliary<R: Rng>(
    law: &ReproductionLaw,
    theta: f64,
    n: usize,
    window: f64,
    prune_delta: f64,
    cap: u64,
    rng: &mut R,
) -> Result<AuxiliaryRealization> {
    let opts = AuxOptions { window, prune_delta, cap, stop_at_positive: false, keep_atoms: true };
    Ok(AuxiliaryBuilder::new(law, theta, n, opts)?.build(n, rng))
}

/// Fraction of realizations on which every generation `l >= c` keeps its
/// subtree atoms below `-epsilon l`.
pub fn stabilization_fraction(realizations: &[AuxiliaryRealization], c: usize, epsilon: f64) -> Result<f64> {
    if realizations.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut hits = 0usize;
    for r in realizations {
        let needed = epsilon * r.n as f64;
        if r.window < needed {
            return Err(Error::WindowTooSmall { window: r.window, needed });
        }
        if r.truncated {
            return Err(Error::Truncated);
        }
        let stable = r
            .level_max
            .iter()
            .enumerate()
            .skip(c.saturating_sub(1))
            .all(|(i, m)| m.is_none_or(|m| m < -epsilon * (i + 1) as f64));
        if stable {
            hits += 1;
        }
    }
    Ok(hits as f64 / realizations.len() as f64)
}
