//! Log-Laplace transform, tilted cumulants, Legendre transform and the
//! critical speed.

use num_traits::Zero;
use serde::Serialize;

use super::{ratio_f64, ReproductionLaw};
use crate::error::{Error, Result};

/// Number of bisection steps used by the Legendre and speed solvers.
const BISECTION_STEPS: usize = 80;

/// Doubling stops here; any tilt this large is treated as divergent.
const MAX_BRACKET: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CumulantReport {
    pub theta: f64,
    /// `psi(theta)`
    pub psi: f64,
    /// Mean of the tilted step, `psi'(theta)`.
    pub psi_prime: f64,
    /// Variance of the tilted step.
    pub sigma2: f64,
    /// `theta * psi'(theta) - psi(theta)`
    pub rate: f64,
}

impl CumulantReport {
    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", content = "theta", rename_all = "snake_case")]
pub enum Maximizer {
    Interior(f64),
    /// Supremum attained at `theta = 0` (x at or below the mean drift).
    Origin,
    /// Supremum approached only as `theta -> infinity`.
    Infinity,
}

impl Maximizer {
    pub fn interior(self) -> Option<f64> {
        match self {
            Maximizer::Interior(t) => Some(t),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LegendrePoint {
    pub x: f64,
    /// `psi*(x)`, possibly `+inf` beyond the support.
    pub value: f64,
    pub maximizer: Maximizer,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalSpeed {
    pub x_star: f64,
    pub theta_star: Option<f64>,
    /// False when `psi(0) <= 0`; `x_star` is then only the infimum of
    /// `psi(theta)/theta`, not a front speed.
    pub supercritical: bool,
    /// The infimum is approached as `theta -> infinity`.
    pub boundary: bool,
}

impl ReproductionLaw {
    /// `psi(theta) = log E sum_{|u|=1} exp(theta V(u))`.
    pub fn log_laplace(&self, theta: f64) -> Result<f64> {
        if theta < 0.0 || theta.is_nan() {
            return Err(Error::NegativeTheta(theta));
        }
        let psi = match self {
            ReproductionLaw::Tabulated(t) => {
                let terms = tilted_terms(t, theta);
                log_sum_exp(terms.iter().map(|(l, _)| *l))
            }
            ReproductionLaw::Gaussian(_, g) => {
                g.offspring.mean().ln() + theta * g.mean + 0.5 * theta * theta * g.sd * g.sd
            }
        };
        if psi.is_finite() {
            Ok(psi)
        } else {
            Err(Error::NonFinite("log_laplace"))
        }
    }

    pub fn tilted_cumulants(&self, theta: f64) -> Result<CumulantReport> {
        if theta < 0.0 || theta.is_nan() {
            return Err(Error::NegativeTheta(theta));
        }
        let psi = self.log_laplace(theta)?;
        let (psi_prime, sigma2) = match self {
            ReproductionLaw::Tabulated(t) => {
                let terms = tilted_terms(t, theta);
                let mut mean = 0.0;
                for (l, d) in &terms {
                    mean += (l - psi).exp() * d;
                }
                let mut var = 0.0;
                for (l, d) in &terms {
                    var += (l - psi).exp() * (d - mean) * (d - mean);
                }
                (mean, var)
            }
            ReproductionLaw::Gaussian(_, g) => (g.mean + theta * g.sd * g.sd, g.sd * g.sd),
        };
        let rate = theta * psi_prime - psi;
        if !(psi_prime.is_finite() && sigma2.is_finite() && rate.is_finite()) {
            return Err(Error::NonFinite("tilted_cumulants"));
        }
        Ok(CumulantReport { theta, psi, psi_prime, sigma2, rate })
    }

    fn psi_prime(&self, theta: f64) -> Result<f64> {
        match self {
            ReproductionLaw::Gaussian(_, g) => Ok(g.mean + theta * g.sd * g.sd),
            _ => Ok(self.tilted_cumulants(theta)?.psi_prime),
        }
    }

    pub(crate) fn psi_prime_at_zero(&self) -> Result<f64> {
        self.psi_prime(0.0)
    }

    /// `log E #{children at the maximal displacement}` for bounded laws.
    fn log_mass_at_max(&self) -> Option<f64> {
        let t = self.as_tabulated()?;
        let dmax = self.max_displacement()?;
        let mass: f64 = t
            .rows()
            .iter()
            .filter(|r| !r.prob.is_zero())
            .map(|r| ratio_f64(&r.prob) * r.displacements.iter().filter(|d| **d == dmax).count() as f64)
            .sum();
        Some(mass.ln())
    }

    /// `psi*(x) = sup_{theta >= 0} (theta x - psi(theta))`.
    ///
    /// The maximizer is bracketed by doubling from `theta = 1` and refined by
    /// bisection on the monotone derivative `x - psi'(theta)`.
    pub fn legendre(&self, x: f64) -> Result<LegendrePoint> {
        if !x.is_finite() {
            return Err(Error::InvalidArgument(format!("legendre needs finite x, got {x}")));
        }
        if x <= self.psi_prime(0.0)? {
            return Ok(LegendrePoint { x, value: -self.log_laplace(0.0)?, maximizer: Maximizer::Origin });
        }
        if let Some(dmax) = self.max_displacement() {
            let dmax = ratio_f64(&dmax);
            if x > dmax {
                return Ok(LegendrePoint { x, value: f64::INFINITY, maximizer: Maximizer::Infinity });
            }
            if x == dmax {
                let value = -self.log_mass_at_max().expect("bounded law");
                return Ok(LegendrePoint { x, value, maximizer: Maximizer::Infinity });
            }
        }
        let mut hi = 1.0;
        while self.psi_prime(hi)? < x {
            hi *= 2.0;
            if hi > MAX_BRACKET {
                return Err(Error::NoConvergence(format!("legendre bracket for x = {x}")));
            }
        }
        let mut lo = if hi > 1.0 { hi / 2.0 } else { 0.0 };
        for _ in 0..BISECTION_STEPS {
            let mid = 0.5 * (lo + hi);
            if self.psi_prime(mid)? < x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let theta = 0.5 * (lo + hi);
        let value = theta * x - self.log_laplace(theta)?;
        Ok(LegendrePoint { x, value, maximizer: Maximizer::Interior(theta) })
    }

    /// `x* = inf_{theta > 0} psi(theta) / theta`.
    pub fn critical_speed(&self) -> Result<CriticalSpeed> {
        let psi0 = self.log_laplace(0.0)?;
        if psi0 < 0.0 {
            return Ok(CriticalSpeed {
                x_star: f64::NEG_INFINITY,
                theta_star: None,
                supercritical: false,
                boundary: false,
            });
        }
        if psi0 == 0.0 {
            // psi/theta is increasing, the infimum is the limit psi'(0)
            return Ok(CriticalSpeed {
                x_star: self.psi_prime(0.0)?,
                theta_star: None,
                supercritical: false,
                boundary: false,
            });
        }
        let rate = |theta: f64| -> Result<f64> {
            let c = self.tilted_cumulants(theta)?;
            Ok(c.rate)
        };
        if let (Some(dmax), Some(log_mass)) = (self.max_displacement(), self.log_mass_at_max()) {
            // rate(theta) increases to -log_mass; no root when that limit is <= 0
            if -log_mass <= 0.0 {
                return Ok(CriticalSpeed {
                    x_star: ratio_f64(&dmax),
                    theta_star: None,
                    supercritical: true,
                    boundary: true,
                });
            }
        }
        let mut hi = 1.0;
        while rate(hi)? < 0.0 {
            hi *= 2.0;
            if hi > MAX_BRACKET {
                return Err(Error::NoConvergence("critical speed bracket".into()));
            }
        }
        let mut lo = if hi > 1.0 { hi / 2.0 } else { 0.0 };
        for _ in 0..BISECTION_STEPS {
            let mid = 0.5 * (lo + hi);
            if rate(mid)? < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let theta = 0.5 * (lo + hi);
        Ok(CriticalSpeed {
            x_star: self.log_laplace(theta)? / theta,
            theta_star: Some(theta),
            supercritical: true,
            boundary: false,
        })
    }
}

/// `(log p_j + theta d_ji, d_ji)` over all children of all rows with `p_j > 0`.
fn tilted_terms(t: &super::TabulatedLaw, theta: f64) -> Vec<(f64, f64)> {
    let mut terms = Vec::new();
    for r in t.rows() {
        if r.prob.is_zero() {
            continue;
        }
        let lp = ratio_f64(&r.prob).ln();
        for d in &r.displacements {
            let d = ratio_f64(d);
            terms.push((lp + theta * d, d));
        }
    }
    terms
}

pub(crate) fn log_sum_exp<I: Iterator<Item = f64> + Clone>(xs: I) -> f64 {
    let m = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.map(|x| (x - m).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::*;
    use super::super::ReproductionLaw;
    use super::*;

    /// Brute-force oracle: psi(theta) = log sum_j p_j sum_i exp(theta d_ji).
    fn brute_psi(rows: &[(f64, Vec<f64>)], theta: f64) -> f64 {
        rows.iter()
            .map(|(p, ds)| p * ds.iter().map(|d| (theta * d).exp()).sum::<f64>())
            .sum::<f64>()
            .ln()
    }

    fn c2pm1_rows() -> Vec<(f64, Vec<f64>)> {
        vec![(0.25, vec![1.0, 1.0]), (0.5, vec![1.0, -1.0]), (0.25, vec![-1.0, -1.0])]
    }

    #[test]
    fn log_laplace_examples() {
        let pg = ReproductionLaw::poisson_gaussian(2.0, 0.0, 1.0).unwrap();
        assert!((pg.log_laplace(1.0).unwrap() - (2f64.ln() + 0.5)).abs() < 1e-15);
        assert!((c2pm1().log_laplace(0.0).unwrap() - 2f64.ln()).abs() < 1e-15);
        let expected = brute_psi(&c2pm1_rows(), 1.0);
        assert!((expected - 1.126928).abs() < 1e-6);
        assert!((c2pm1().log_laplace(1.0).unwrap() - expected).abs() < 1e-12 * expected);
        assert_eq!(c2pm1().log_laplace(-0.1), Err(Error::NegativeTheta(-0.1)));
    }

    #[test]
    fn tilted_cumulant_examples() {
        let pg = ReproductionLaw::poisson_gaussian(2.0, 0.0, 1.0).unwrap();
        let c = pg.tilted_cumulants(1.5).unwrap();
        assert!((c.psi_prime - 1.5).abs() < 1e-15);
        assert!((c.sigma2 - 1.0).abs() < 1e-15);
        assert!((c.rate - (2.25 - (2f64.ln() + 1.125))).abs() < 1e-14);
        assert!((c.rate - 0.43185).abs() < 1e-5);

        let c0 = c2pm1().tilted_cumulants(0.0).unwrap();
        assert!(c0.psi_prime.abs() < 1e-15);
        assert!((c0.sigma2 - 1.0).abs() < 1e-15);

        // finite-sum oracle: tilted weights e^{theta d} / (e + e^{-1}) per child pair
        let c1 = c2pm1().tilted_cumulants(1.0).unwrap();
        let (e, ei) = (1f64.exp(), (-1f64).exp());
        let mean = (e - ei) / (e + ei);
        assert!((c1.psi_prime - mean).abs() < 1e-14);
        assert!((c1.psi_prime - 0.761594).abs() < 1e-6);
        assert!((c1.sigma2 - (1.0 - mean * mean)).abs() < 1e-14);
        assert!((c1.sigma2 - 0.419974).abs() < 1e-6);
    }

    #[test]
    fn legendre_examples() {
        let pg = ReproductionLaw::poisson_gaussian(2.0, 0.0, 1.0).unwrap();
        let lp = pg.legendre(2.0).unwrap();
        assert!((lp.value - (2.0 - 2f64.ln())).abs() < 1e-10);
        assert!((lp.maximizer.interior().unwrap() - 2.0).abs() < 1e-10);

        let lp = c2pm1().legendre(1.0).unwrap();
        assert_eq!(lp.maximizer, Maximizer::Infinity);
        assert_eq!(lp.value, 0.0);
        // monotone-limit oracle: theta - psi(theta) = -log(1 + e^{-2 theta}) increases to 0
        for theta in [1.0, 5.0, 10.0] {
            let v = theta - c2pm1().log_laplace(theta).unwrap();
            assert!(v < 0.0 && (v + (1.0 + (-2.0 * theta).exp()).ln()).abs() < 1e-12);
        }
        assert_eq!(c2pm1().legendre(1.5).unwrap().value, f64::INFINITY);

        let lp = pg.legendre(-1.0).unwrap();
        assert_eq!(lp.maximizer, Maximizer::Origin);
        assert!((lp.value + 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn legendre_duality_at_smooth_points() {
        for law in [binary_gaussian(), c2pm1(), subcritical()] {
            for theta0 in [0.3, 0.8, 1.5, 2.5] {
                let c = law.tilted_cumulants(theta0).unwrap();
                let lp = law.legendre(c.psi_prime).unwrap();
                let t = lp.maximizer.interior().unwrap();
                assert!((t - theta0).abs() < 1e-9, "{t} vs {theta0}");
                assert!((lp.value - c.rate).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn critical_speed_examples() {
        let pg = ReproductionLaw::poisson_gaussian(2.0, 0.0, 1.0).unwrap();
        let cs = pg.critical_speed().unwrap();
        assert!((cs.x_star - (2.0 * 2f64.ln()).sqrt()).abs() < 1e-9);
        assert!((cs.x_star - 1.177410).abs() < 1e-6);
        assert!(cs.supercritical && !cs.boundary);

        let cs = single_child(3).critical_speed().unwrap();
        assert!(!cs.supercritical);
        assert_eq!(cs.x_star, 3.0);

        // ties at the top make the critical set boundary: x* = max displacement
        let cs = c2pm1().critical_speed().unwrap();
        assert!(cs.boundary);
        assert_eq!(cs.x_star, 1.0);
        assert!(c2pm1().legendre(0.999).unwrap().value < 0.0);

        let cs = subcritical().critical_speed().unwrap();
        assert_eq!(cs.x_star, f64::NEG_INFINITY);
    }

    #[test]
    fn speed_is_root_of_rate_function() {
        let law = ReproductionLaw::tabulated(vec![
            (r(1, 3), vec![int(2), int(0), int(-1)]),
            (r(2, 3), vec![int(1), int(-2)]),
        ])
        .unwrap();
        let cs = law.critical_speed().unwrap();
        assert!(!cs.boundary);
        assert!(law.legendre(cs.x_star).unwrap().value.abs() < 1e-9);
        assert!(law.legendre(cs.x_star - 0.05).unwrap().value < 0.0);
        assert!(law.legendre(cs.x_star + 0.05).unwrap().value > 0.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn psi_is_convex(t1 in 0.0f64..3.0, gap1 in 0.01f64..2.0, gap2 in 0.01f64..2.0) {
                for law in [c2pm1(), binary_gaussian(), subcritical()] {
                    let (t2, t3) = (t1 + gap1, t1 + gap1 + gap2);
                    let (p1, p2, p3) = (law.log_laplace(t1).unwrap(), law.log_laplace(t2).unwrap(), law.log_laplace(t3).unwrap());
                    let lin = p1 + (p3 - p1) * (t2 - t1) / (t3 - t1);
                    prop_assert!(p2 <= lin + 1e-12);
                }
            }

            #[test]
            fn psi_star_nondecreasing_convex(x1 in -1.0f64..0.95, gap in 0.001f64..0.02) {
                let law = c2pm1();
                let (x2, x3) = (x1 + gap, x1 + 2.0 * gap);
                if x3 < 1.0 {
                    let (a, b, c) = (law.legendre(x1).unwrap().value, law.legendre(x2).unwrap().value, law.legendre(x3).unwrap().value);
                    prop_assert!(a <= b + 1e-12 && b <= c + 1e-12);
                    prop_assert!(b <= 0.5 * (a + c) + 1e-9);
                }
            }

            #[test]
            fn tabulated_psi_matches_brute_force(theta in 0.0f64..6.0) {
                let exact = brute_psi(&c2pm1_rows(), theta);
                let got = c2pm1().log_laplace(theta).unwrap();
                prop_assert!((got - exact).abs() <= 1e-12 * exact.abs().max(1.0));
            }

            #[test]
            fn sign_of_psi_star_around_speed(dx in 0.01f64..1.0) {
                let law = binary_gaussian();
                let xs = law.critical_speed().unwrap().x_star;
                prop_assert!(law.legendre(xs - dx).unwrap().value < 0.0);
                prop_assert!(law.legendre(xs + dx).unwrap().value > 0.0);
                prop_assert!(law.legendre(xs).unwrap().value.abs() < 1e-9);
            }
        }
    }
}
