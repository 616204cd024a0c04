//! Reproduction laws of the branching random walk.
//!
//! A law describes one particle's brood: how many children it has and where
//! they land relative to the parent. Four families are supported:
//!
//! * `tabulated`: finitely many joint outcomes with exact rational
//!   probabilities and displacements. Displacements within a row may be
//!   arbitrarily correlated. Tabulated laws are always lattice laws, and
//!   positions are tracked in exact integer grid units so that ties between
//!   particles are detected without rounding.
//! * `poisson_gaussian`, `fixed_gaussian`, `mixed_gaussian`: a random number
//!   of children (Poisson, fixed, or a finite distribution) each displaced by
//!   an independent normal variable.
//!
//! Positions handed around the simulator are in *grid units*: for tabulated
//! laws one unit is `1 / grid()`, for the Gaussian families one unit is `1.0`.
//! Use [`ReproductionLaw::to_real`] and [`ReproductionLaw::to_units`] to
//! convert.

mod assumptions;
mod cumulants;
mod parse;

pub use assumptions::{AssumptionReport, LatticeSpan, Regime};
pub use cumulants::{CriticalSpeed, CumulantReport, LegendrePoint, Maximizer};
pub use parse::{load_law, parse_law, parse_rational};
pub(crate) use cumulants::log_sum_exp;

use std::fmt;

use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{CheckedAdd, One, Signed, ToPrimitive, Zero};
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal, weighted::WeightedIndex};

use crate::error::{Error, Result};

pub type Rational = Ratio<i64>;

/// Largest grid magnitude accepted for a tabulated displacement, in units.
/// Keeps sums over many generations exactly representable in an `f64`.
const MAX_GRID_UNITS: i64 = 1 << 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LawKind {
    Tabulated,
    PoissonGaussian,
    FixedGaussian,
    MixedGaussian,
}

impl LawKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LawKind::Tabulated => "tabulated",
            LawKind::PoissonGaussian => "poisson_gaussian",
            LawKind::FixedGaussian => "fixed_gaussian",
            LawKind::MixedGaussian => "mixed_gaussian",
        }
    }
}

/// One joint offspring outcome of a tabulated law.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub prob: Rational,
    /// Sorted non-increasing, matching the ranked children of the brood.
    pub displacements: Vec<Rational>,
}

#[derive(Debug, Clone)]
pub struct TabulatedLaw {
    rows: Vec<Row>,
    grid: i64,
    units: Vec<Vec<f64>>,
    row_index: WeightedIndex<f64>,
}

impl TabulatedLaw {
    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    /// Number of grid units per unit length.
    pub fn grid(&self) -> i64 {
        self.grid
    }

    /// Row displacements in grid units (exact integers stored as `f64`).
    pub fn row_units(&self, j: usize) -> &[f64] {
        &self.units[j]
    }

    pub(crate) fn sample_row<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.row_index.sample(rng)
    }
}

#[derive(Debug, Clone)]
pub enum Offspring {
    Poisson { mu: f64, dist: Poisson<f64> },
    Fixed(u32),
    Finite { probs: Vec<(u32, Rational)>, index: WeightedIndex<f64> },
}

impl Offspring {
    pub fn mean(&self) -> f64 {
        match self {
            Offspring::Poisson { mu, .. } => *mu,
            Offspring::Fixed(b) => f64::from(*b),
            Offspring::Finite { probs, .. } => probs
                .iter()
                .map(|(k, p)| f64::from(*k) * ratio_f64(p))
                .sum(),
        }
    }

    pub(crate) fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        match self {
            Offspring::Poisson { dist, .. } => dist.sample(rng) as usize,
            Offspring::Fixed(b) => *b as usize,
            Offspring::Finite { probs, index } => probs[index.sample(rng)].0 as usize,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GaussianLaw {
    pub offspring: Offspring,
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone)]
pub enum ReproductionLaw {
    Tabulated(TabulatedLaw),
    Gaussian(LawKind, GaussianLaw),
}

pub(crate) fn ratio_f64(r: &Rational) -> f64 {
    // numer/denom as f64 division is correctly rounded for |values| < 2^53
    *r.numer() as f64 / *r.denom() as f64
}

impl ReproductionLaw {
    /// Builds a tabulated law from `(probability, displacements)` rows.
    pub fn tabulated(rows: Vec<(Rational, Vec<Rational>)>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Schema("tabulated law needs at least one row".into()));
        }
        let mut total = Rational::zero();
        for (p, _) in &rows {
            if p.is_negative() || *p > Rational::one() {
                return Err(Error::Schema(format!("row probability {p} outside [0, 1]")));
            }
            total = total
                .checked_add(p)
                .ok_or_else(|| Error::Schema("probability overflow".into()))?;
        }
        if total != Rational::one() {
            return Err(Error::ProbabilitySum(format_ratio_decimal(&total)));
        }
        if rows.iter().all(|(p, d)| p.is_zero() || d.is_empty()) {
            return Err(Error::AllExtinct);
        }

        let grid = rows
            .iter()
            .flat_map(|(_, d)| d.iter())
            .fold(1i64, |acc, d| acc.lcm(d.denom()));
        let mut out_rows = Vec::with_capacity(rows.len());
        let mut units = Vec::with_capacity(rows.len());
        for (prob, mut displacements) in rows {
            displacements.sort_by(|a, b| b.cmp(a));
            let mut row_units = Vec::with_capacity(displacements.len());
            for d in &displacements {
                let u = d
                    .numer()
                    .checked_mul(grid / d.denom())
                    .filter(|u| u.abs() <= MAX_GRID_UNITS)
                    .ok_or_else(|| {
                        Error::Schema(format!("displacement {d} too large for the common grid 1/{grid}"))
                    })?;
                row_units.push(u as f64);
            }
            units.push(row_units);
            out_rows.push(Row { prob, displacements });
        }
        let weights: Vec<f64> = out_rows.iter().map(|r| ratio_f64(&r.prob)).collect();
        let row_index = WeightedIndex::new(&weights)
            .map_err(|e| Error::Schema(format!("row weights: {e}")))?;
        Ok(ReproductionLaw::Tabulated(TabulatedLaw { rows: out_rows, grid, units, row_index }))
    }

    pub fn poisson_gaussian(mu: f64, mean: f64, sd: f64) -> Result<Self> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(Error::Schema(format!("mu must be positive, got {mu}")));
        }
        check_gaussian(mean, sd)?;
        let dist = Poisson::new(mu).map_err(|e| Error::Schema(format!("poisson: {e}")))?;
        Ok(ReproductionLaw::Gaussian(
            LawKind::PoissonGaussian,
            GaussianLaw { offspring: Offspring::Poisson { mu, dist }, mean, sd },
        ))
    }

    pub fn fixed_gaussian(b: u32, mean: f64, sd: f64) -> Result<Self> {
        if b == 0 {
            return Err(Error::AllExtinct);
        }
        check_gaussian(mean, sd)?;
        Ok(ReproductionLaw::Gaussian(
            LawKind::FixedGaussian,
            GaussianLaw { offspring: Offspring::Fixed(b), mean, sd },
        ))
    }

    pub fn mixed_gaussian(probs: Vec<(u32, Rational)>, mean: f64, sd: f64) -> Result<Self> {
        check_gaussian(mean, sd)?;
        if probs.is_empty() {
            return Err(Error::Schema("mixed_gaussian needs offspring probabilities".into()));
        }
        let mut total = Rational::zero();
        for (_, p) in &probs {
            if p.is_negative() || *p > Rational::one() {
                return Err(Error::Schema(format!("offspring probability {p} outside [0, 1]")));
            }
            total += p;
        }
        if total != Rational::one() {
            return Err(Error::ProbabilitySum(format_ratio_decimal(&total)));
        }
        if probs.iter().all(|(k, p)| *k == 0 || p.is_zero()) {
            return Err(Error::AllExtinct);
        }
        let weights: Vec<f64> = probs.iter().map(|(_, p)| ratio_f64(p)).collect();
        let index =
            WeightedIndex::new(&weights).map_err(|e| Error::Schema(format!("offspring weights: {e}")))?;
        Ok(ReproductionLaw::Gaussian(
            LawKind::MixedGaussian,
            GaussianLaw { offspring: Offspring::Finite { probs, index }, mean, sd },
        ))
    }

    pub fn kind(&self) -> LawKind {
        match self {
            ReproductionLaw::Tabulated(_) => LawKind::Tabulated,
            ReproductionLaw::Gaussian(kind, _) => *kind,
        }
    }

    /// Grid units per unit length (1 for continuous families).
    pub fn grid(&self) -> f64 {
        match self {
            ReproductionLaw::Tabulated(t) => t.grid as f64,
            ReproductionLaw::Gaussian(..) => 1.0,
        }
    }

    #[inline]
    pub fn to_real(&self, units: f64) -> f64 {
        match self {
            ReproductionLaw::Tabulated(t) => units / t.grid as f64,
            ReproductionLaw::Gaussian(..) => units,
        }
    }

    #[inline]
    pub fn to_units(&self, x: f64) -> f64 {
        match self {
            ReproductionLaw::Tabulated(t) => x * t.grid as f64,
            ReproductionLaw::Gaussian(..) => x,
        }
    }

    /// Level `a` in grid units. On a lattice the level is rounded up to the
    /// next site, so `x >= level` decides `x >= a` exactly for particle
    /// positions `x`.
    pub fn level_units(&self, a: f64) -> f64 {
        match self {
            ReproductionLaw::Tabulated(t) => {
                let u = a * t.grid as f64;
                let r = u.round();
                if (u - r).abs() <= 1e-9 * r.abs().max(1.0) {
                    r
                } else {
                    u.ceil()
                }
            }
            ReproductionLaw::Gaussian(..) => a,
        }
    }

    pub fn is_lattice(&self) -> bool {
        matches!(self, ReproductionLaw::Tabulated(_))
    }

    pub fn as_tabulated(&self) -> Option<&TabulatedLaw> {
        match self {
            ReproductionLaw::Tabulated(t) => Some(t),
            ReproductionLaw::Gaussian(..) => None,
        }
    }

    /// Mean number of children, `E Z1(R)`.
    pub fn mean_offspring(&self) -> f64 {
        match self {
            ReproductionLaw::Tabulated(t) => t
                .rows
                .iter()
                .map(|r| ratio_f64(&r.prob) * r.displacements.len() as f64)
                .sum(),
            ReproductionLaw::Gaussian(_, g) => g.offspring.mean(),
        }
    }

    /// Mean number of children as an exact rational, when the law has one.
    pub fn mean_offspring_exact(&self) -> Option<Rational> {
        match self {
            ReproductionLaw::Tabulated(t) => Some(
                t.rows
                    .iter()
                    .map(|r| r.prob * Rational::from_integer(r.displacements.len() as i64))
                    .sum(),
            ),
            ReproductionLaw::Gaussian(_, g) => match &g.offspring {
                Offspring::Fixed(b) => Some(Rational::from_integer(i64::from(*b))),
                Offspring::Finite { probs, .. } => Some(
                    probs.iter().map(|(k, p)| p * Rational::from_integer(i64::from(*k))).sum(),
                ),
                Offspring::Poisson { .. } => None,
            },
        }
    }

    /// Exact offspring-count distribution for laws with finite support.
    pub fn offspring_distribution(&self) -> Option<Vec<(u32, Rational)>> {
        match self {
            ReproductionLaw::Tabulated(t) => {
                let mut acc: Vec<(u32, Rational)> = Vec::new();
                for r in &t.rows {
                    let k = r.displacements.len() as u32;
                    match acc.iter_mut().find(|(c, _)| *c == k) {
                        Some(slot) => slot.1 += r.prob,
                        None => acc.push((k, r.prob)),
                    }
                }
                acc.sort_by_key(|(k, _)| *k);
                Some(acc)
            }
            ReproductionLaw::Gaussian(_, g) => match &g.offspring {
                Offspring::Fixed(b) => Some(vec![(*b, Rational::one())]),
                Offspring::Finite { probs, .. } => Some(probs.clone()),
                Offspring::Poisson { .. } => None,
            },
        }
    }

    /// `P(Z1(R) >= 2) > 0`.
    pub fn has_branching(&self) -> bool {
        match self {
            ReproductionLaw::Tabulated(t) => {
                t.rows.iter().any(|r| !r.prob.is_zero() && r.displacements.len() >= 2)
            }
            ReproductionLaw::Gaussian(_, g) => match &g.offspring {
                Offspring::Poisson { .. } => true,
                Offspring::Fixed(b) => *b >= 2,
                Offspring::Finite { probs, .. } => probs.iter().any(|(k, p)| *k >= 2 && !p.is_zero()),
            },
        }
    }

    /// Essential supremum of a single displacement, `None` when unbounded.
    pub fn max_displacement(&self) -> Option<Rational> {
        match self {
            ReproductionLaw::Tabulated(t) => t
                .rows
                .iter()
                .filter(|r| !r.prob.is_zero())
                .filter_map(|r| r.displacements.first().copied())
                .max(),
            ReproductionLaw::Gaussian(..) => None,
        }
    }

    /// Samples one brood, pushing child displacements (grid units) onto `out`.
    #[inline]
    pub fn sample_brood<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut Vec<f64>) {
        match self {
            ReproductionLaw::Tabulated(t) => {
                let j = t.sample_row(rng);
                out.extend_from_slice(&t.units[j]);
            }
            ReproductionLaw::Gaussian(_, g) => {
                let k = g.offspring.sample(rng);
                for _ in 0..k {
                    let z: f64 = StandardNormal.sample(rng);
                    out.push(g.mean + g.sd * z);
                }
            }
        }
    }
}

fn check_gaussian(mean: f64, sd: f64) -> Result<()> {
    if !mean.is_finite() {
        return Err(Error::Schema(format!("mean must be finite, got {mean}")));
    }
    if !(sd > 0.0 && sd.is_finite()) {
        return Err(Error::Schema(format!("sd must be positive, got {sd}")));
    }
    Ok(())
}

/// Renders a rational as a short decimal for messages ("1.1", "0.333333").
fn format_ratio_decimal(r: &Rational) -> String {
    let v = r.to_f64().unwrap_or(f64::NAN);
    let s = format!("{v:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    s.to_string()
}

impl fmt::Display for ReproductionLaw {
    /// Canonical law-file text; parsing it back yields the same law.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "kind = {}", self.kind().as_str())?;
        match self {
            ReproductionLaw::Tabulated(t) => {
                for r in &t.rows {
                    write!(f, "row = {} :", r.prob)?;
                    for d in &r.displacements {
                        write!(f, " {d}")?;
                    }
                    writeln!(f)?;
                }
            }
            ReproductionLaw::Gaussian(_, g) => {
                match &g.offspring {
                    Offspring::Poisson { mu, .. } => writeln!(f, "mu = {mu:?}")?,
                    Offspring::Fixed(b) => writeln!(f, "b = {b}")?,
                    Offspring::Finite { probs, .. } => {
                        for (k, p) in probs {
                            writeln!(f, "offspring = {k} : {p}")?;
                        }
                    }
                }
                writeln!(f, "mean = {:?}", g.mean)?;
                writeln!(f, "sd = {:?}", g.sd)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn r(n: i64, d: i64) -> Rational {
        Rational::new(n, d)
    }

    pub fn int(n: i64) -> Rational {
        Rational::from_integer(n)
    }

    /// Two children, each at +1 or -1: rows (+1,+1) 1/4, (+1,-1) 1/2, (-1,-1) 1/4.
    pub fn c2pm1() -> ReproductionLaw {
        ReproductionLaw::tabulated(vec![
            (r(1, 4), vec![int(1), int(1)]),
            (r(1, 2), vec![int(1), int(-1)]),
            (r(1, 4), vec![int(-1), int(-1)]),
        ])
        .unwrap()
    }

    /// Exactly one child displaced by `d`.
    pub fn single_child(d: i64) -> ReproductionLaw {
        ReproductionLaw::tabulated(vec![(int(1), vec![int(d)])]).unwrap()
    }

    pub fn binary_gaussian() -> ReproductionLaw {
        ReproductionLaw::fixed_gaussian(2, 0.0, 1.0).unwrap()
    }

    pub fn subcritical() -> ReproductionLaw {
        ReproductionLaw::mixed_gaussian(vec![(0, r(3, 5)), (2, r(2, 5))], 0.0, 1.0).unwrap()
    }

    pub fn critical() -> ReproductionLaw {
        ReproductionLaw::mixed_gaussian(vec![(0, r(1, 2)), (2, r(1, 2))], 0.0, 1.0).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn tabulated_rows_sorted_and_gridded() {
        let law = ReproductionLaw::tabulated(vec![
            (r(1, 2), vec![r(-1, 2), r(1, 3)]),
            (r(1, 2), vec![int(1)]),
        ])
        .unwrap();
        let t = law.as_tabulated().unwrap();
        assert_eq!(t.grid(), 6);
        assert_eq!(t.row_units(0), &[2.0, -3.0]);
        assert_eq!(t.row_units(1), &[6.0]);
        assert_eq!(law.to_real(2.0), 1.0 / 3.0);
    }

    #[test]
    fn probability_sum_is_exact() {
        let err = ReproductionLaw::tabulated(vec![
            (r(1, 2), vec![int(1)]),
            (r(3, 5), vec![int(0)]),
        ])
        .unwrap_err();
        assert_eq!(err, Error::ProbabilitySum("1.1".into()));
        assert_eq!(err.to_string(), "probabilities sum to 1.1");
    }

    #[test]
    fn all_extinct_rejected() {
        let err = ReproductionLaw::tabulated(vec![(int(1), vec![])]).unwrap_err();
        assert_eq!(err, Error::AllExtinct);
        let err = ReproductionLaw::mixed_gaussian(vec![(0, int(1))], 0.0, 1.0).unwrap_err();
        assert_eq!(err, Error::AllExtinct);
    }

    #[test]
    fn offspring_summaries() {
        assert_eq!(c2pm1().mean_offspring_exact(), Some(int(2)));
        assert_eq!(subcritical().mean_offspring_exact(), Some(r(4, 5)));
        assert!(!single_child(1).has_branching());
        assert!(c2pm1().has_branching());
        assert_eq!(c2pm1().max_displacement(), Some(int(1)));
        assert_eq!(c2pm1().offspring_distribution(), Some(vec![(2, int(1))]));
    }

    #[test]
    fn brood_sizes_follow_family() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut buf = Vec::new();
        for _ in 0..100 {
            buf.clear();
            binary_gaussian().sample_brood(&mut rng, &mut buf);
            assert_eq!(buf.len(), 2);
            buf.clear();
            subcritical().sample_brood(&mut rng, &mut buf);
            assert!(buf.len() == 0 || buf.len() == 2);
        }
    }
}
