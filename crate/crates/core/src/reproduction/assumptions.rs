use num_integer::Integer;
use num_traits::{One, Zero};
use serde::Serialize;

use super::{Rational, ReproductionLaw};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Supercritical,
    Critical,
    Subcritical,
}

/// All displacements lie in `offset + span * Z`. A zero span means every
/// displacement is identical.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatticeSpan {
    pub offset: String,
    pub span: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub theta: f64,
    /// `P(Z1(R) >= 2) > 0`
    pub asn: bool,
    /// `psi(theta) < inf` and `theta psi'(theta) > psi(theta)`
    pub as1: bool,
    /// tilted variance in `(0, inf)`
    pub as2: bool,
    /// L log L moment; holds for every built-in family
    pub as3: bool,
    /// non-lattice
    pub as4: bool,
    pub lattice: Option<LatticeSpan>,
    pub regime: Regime,
    pub psi_zero: f64,
    pub rate: Option<f64>,
    pub sigma2: Option<f64>,
}

impl AssumptionReport {
    pub fn all_hold(&self) -> bool {
        self.asn && self.as1 && self.as2 && self.as3 && self.as4
    }
}

impl ReproductionLaw {
    pub fn regime(&self) -> Regime {
        match self.mean_offspring_exact() {
            Some(m) => match m.cmp(&Rational::one()) {
                std::cmp::Ordering::Greater => Regime::Supercritical,
                std::cmp::Ordering::Equal => Regime::Critical,
                std::cmp::Ordering::Less => Regime::Subcritical,
            },
            None => {
                let m = self.mean_offspring();
                if m > 1.0 {
                    Regime::Supercritical
                } else if m < 1.0 {
                    Regime::Subcritical
                } else {
                    Regime::Critical
                }
            }
        }
    }

    /// Smallest lattice containing every displacement of a tabulated law.
    /// Continuous families return `None`.
    pub fn lattice_span(&self) -> Option<(Rational, Rational)> {
        let t = self.as_tabulated()?;
        let values: Vec<Rational> = t
            .rows()
            .iter()
            .filter(|r| !r.prob.is_zero())
            .flat_map(|r| r.displacements.iter().copied())
            .collect();
        let offset = values.iter().copied().min()?;
        let grid = t.grid();
        // differences are integers in grid units; their gcd is the span
        let g = values
            .iter()
            .map(|d| ((d - offset) * Rational::from_integer(grid)).to_integer())
            .fold(0i64, |acc, v| acc.gcd(&v.abs()));
        Some((offset, Rational::new(g, grid)))
    }

    pub fn check_assumptions(&self, theta: f64) -> AssumptionReport {
        let cumulants = if theta > 0.0 { self.tilted_cumulants(theta).ok() } else { None };
        let lattice = self.lattice_span();
        let psi_zero = self.log_laplace(0.0).unwrap_or(f64::NAN);
        AssumptionReport {
            theta,
            asn: self.has_branching(),
            as1: cumulants.map(|c| c.rate > 0.0).unwrap_or(false),
            as2: cumulants.map(|c| c.sigma2 > 0.0 && c.sigma2.is_finite()).unwrap_or(false),
            as3: true,
            as4: lattice.is_none(),
            lattice: lattice.map(|(o, s)| LatticeSpan { offset: o.to_string(), span: s.to_string() }),
            regime: self.regime(),
            psi_zero,
            rate: cumulants.map(|c| c.rate),
            sigma2: cumulants.map(|c| c.sigma2),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::*;
    use super::*;

    #[test]
    fn c2pm1_is_lattice_and_fails_as1() {
        let rep = c2pm1().check_assumptions(1.0);
        assert!(!rep.as4);
        assert_eq!(c2pm1().lattice_span(), Some((int(-1), int(2))));
        assert!(!rep.as1);
        assert!((rep.rate.unwrap() - (0.761594 - 1.126928)).abs() < 1e-5);
        assert!(rep.asn);
        assert_eq!(rep.regime, Regime::Supercritical);
    }

    #[test]
    fn binary_gaussian_satisfies_everything() {
        let rep = binary_gaussian().check_assumptions(1.5);
        assert!(rep.all_hold(), "{rep:?}");
        assert!((rep.rate.unwrap() - 0.43185).abs() < 1e-5);
        assert!((rep.psi_zero - 2f64.ln()).abs() < 1e-15);
        assert_eq!(rep.regime, Regime::Supercritical);
    }

    #[test]
    fn single_child_fails_asn() {
        let rep = single_child(1).check_assumptions(1.0);
        assert!(!rep.asn);
        assert_eq!(rep.regime, Regime::Critical);
        assert_eq!(single_child(1).lattice_span(), Some((int(1), int(0))));
    }

    #[test]
    fn regimes_are_exact() {
        assert_eq!(subcritical().regime(), Regime::Subcritical);
        assert_eq!(critical().regime(), Regime::Critical);
        let half = ReproductionLaw::tabulated(vec![
            (r(1, 3), vec![r(1, 2), r(-1, 3)]),
            (r(2, 3), vec![r(1, 6)]),
        ])
        .unwrap();
        assert_eq!(half.lattice_span(), Some((r(-1, 3), r(1, 6))));
    }
}
