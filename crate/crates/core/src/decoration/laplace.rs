use rand::seq::SliceRandom;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::harness::aggregate::{par_map_indexed, Moments};
use crate::harness::stream::domain;
use crate::reproduction::{parse_rational, ratio_f64};
use crate::tree_sim::PointMeasure;

/// Non-negative piecewise-linear test function, zero outside its first and
/// last breakpoints.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bump {
    points: Vec<(f64, f64)>,
}

impl Bump {
    /// Breakpoints `(x, phi(x))` with strictly increasing `x`.
    pub fn new(points: Vec<(f64, f64)>) -> Result<Bump> {
        if points.len() < 2 {
            return Err(Error::InvalidArgument("a bump needs at least two breakpoints".into()));
        }
        if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite() || *y < 0.0) {
            return Err(Error::InvalidArgument("bump breakpoints must be finite with non-negative values".into()));
        }
        if points.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::InvalidArgument("bump breakpoints must be strictly increasing".into()));
        }
        Ok(Bump { points })
    }

    /// Tent of the given height on `[centre - half_width, centre + half_width]`.
    pub fn triangle(centre: f64, half_width: f64, height: f64) -> Result<Bump> {
        Bump::new(vec![(centre - half_width, 0.0), (centre, height), (centre + half_width, 0.0)])
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn eval(&self, x: f64) -> f64 {
        let p = &self.points;
        if x < p[0].0 || x > p[p.len() - 1].0 {
            return 0.0;
        }
        let i = p.partition_point(|(px, _)| *px <= x);
        if i == p.len() {
            return p[i - 1].1;
        }
        let (x0, y0) = p[i - 1];
        let (x1, y1) = p[i];
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }

    /// `<mu, phi>`
    pub fn pair(&self, mu: &PointMeasure) -> f64 {
        mu.integrate(|x| self.eval(x))
    }
}

impl std::str::FromStr for Bump {
    type Err = Error;

    /// `x:y,x:y,...` with rational or decimal entries.
    fn from_str(s: &str) -> Result<Bump> {
        let points = s
            .split(',')
            .map(|pair| {
                let (x, y) = pair
                    .split_once(':')
                    .ok_or_else(|| Error::InvalidArgument(format!("bump breakpoint {pair:?} is not x:y")))?;
                Ok((ratio_f64(&parse_rational(x)?), ratio_f64(&parse_rational(y)?)))
            })
            .collect::<Result<Vec<_>>>()?;
        Bump::new(points)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct LaplaceReport {
    pub mean_a: f64,
    pub stderr_a: f64,
    pub mean_b: f64,
    pub stderr_b: f64,
    pub size_a: usize,
    pub size_b: usize,
    /// `mean_a - mean_b`
    pub difference: f64,
    pub permutations: u64,
    /// Two-sided permutation p-value, `(1 + #{|T*| >= |T|}) / (1 + permutations)`.
    pub p_value: f64,
}

/// Two-sample permutation test on `exp(-<mu, phi>)`.
pub fn laplace_compare(
    samples_a: &[PointMeasure],
    samples_b: &[PointMeasure],
    phi: &Bump,
    permutations: u64,
    seed: u64,
) -> Result<LaplaceReport> {
    if samples_a.is_empty() || samples_b.is_empty() {
        return Err(Error::EmptySample);
    }
    let fa: Vec<f64> = samples_a.iter().map(|m| (-phi.pair(m)).exp()).collect();
    let fb: Vec<f64> = samples_b.iter().map(|m| (-phi.pair(m)).exp()).collect();
    let ma = Moments::from_slice(&fa);
    let mb = Moments::from_slice(&fb);
    let observed = (ma.mean - mb.mean).abs();
    let pooled: Vec<f64> = fa.iter().chain(&fb).copied().collect();
    let total: f64 = pooled.iter().sum();
    let na = fa.len();
    let nb = fb.len();
    let hits: u64 = par_map_indexed(seed, domain::PERMUTATION, 0..permutations, |_, rng| {
        let mut v = pooled.clone();
        v.shuffle(rng);
        let sa: f64 = v[..na].iter().sum();
        let d = (sa / na as f64 - (total - sa) / nb as f64).abs();
        // guard against rounding making an identical split look larger
        u64::from(d >= observed - 1e-12 * observed.max(1e-300))
    })
    .into_iter()
    .sum();
    Ok(LaplaceReport {
        mean_a: ma.mean,
        stderr_a: ma.stderr(),
        mean_b: mb.mean,
        stderr_b: mb.stderr(),
        size_a: na,
        size_b: nb,
        difference: ma.mean - mb.mean,
        permutations,
        p_value: (1 + hits) as f64 / (1 + permutations) as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn tent_values() {
        let b = Bump::triangle(-1.0, 1.0, 2.0).unwrap();
        assert_eq!(b.eval(-1.0), 2.0);
        assert_eq!(b.eval(-1.5), 1.0);
        assert_eq!(b.eval(0.0), 0.0);
        assert_eq!(b.eval(0.5), 0.0);
        assert_eq!(b.eval(-2.5), 0.0);
        let mu = PointMeasure::from_atoms([(-1.0, 2), (-0.5, 1)]);
        assert_eq!(b.pair(&mu), 5.0);
    }

    #[test]
    fn parse_breakpoints() {
        let b: Bump = "-3:0,-2:1/2,-1:0".parse().unwrap();
        assert_eq!(b.points(), &[(-3.0, 0.0), (-2.0, 0.5), (-1.0, 0.0)]);
        assert!("1:0,0:1".parse::<Bump>().is_err());
        assert!("0:-1,1:0".parse::<Bump>().is_err());
        assert!("0".parse::<Bump>().is_err());
    }

    #[test]
    fn zero_function_gives_one() {
        let phi = Bump::new(vec![(-2.0, 0.0), (-1.0, 0.0)]).unwrap();
        let a = vec![PointMeasure::from_points([0.0, -1.5]); 5];
        let b = vec![PointMeasure::dirac(0.0); 7];
        let r = laplace_compare(&a, &b, &phi, 99, 0).unwrap();
        assert_eq!((r.mean_a, r.mean_b, r.stderr_a, r.stderr_b), (1.0, 1.0, 0.0, 0.0));
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn identical_sets_do_not_differ() {
        let phi = Bump::triangle(-1.0, 1.0, 1.0).unwrap();
        let a: Vec<_> = (0..40).map(|i| PointMeasure::from_points([0.0, -0.05 * i as f64])).collect();
        let r = laplace_compare(&a, &a, &phi, 199, 1).unwrap();
        assert_eq!(r.mean_a, r.mean_b);
        assert_eq!(r.p_value, 1.0);
        assert_eq!(laplace_compare(&a, &[], &phi, 10, 0).unwrap_err(), Error::EmptySample);
    }

    #[test]
    fn separated_sets_reject() {
        let phi = Bump::triangle(-1.0, 1.0, 1.0).unwrap();
        let a = vec![PointMeasure::dirac(-1.0); 30];
        let b = vec![PointMeasure::dirac(-3.0); 30];
        let r = laplace_compare(&a, &b, &phi, 499, 2).unwrap();
        assert!(r.p_value < 0.01);
    }

    proptest! {
        #[test]
        fn bump_is_nonnegative_and_supported(xs in proptest::collection::vec(0.01f64..2.0, 2..6), ys in proptest::collection::vec(0.0f64..3.0, 6), t in -20.0f64..20.0) {
            let mut x = -10.0;
            let pts: Vec<(f64, f64)> = xs.iter().zip(&ys).map(|(dx, y)| { x += dx; (x, *y) }).collect();
            let b = Bump::new(pts.clone()).unwrap();
            let v = b.eval(t);
            prop_assert!(v >= 0.0);
            if t < pts[0].0 || t > pts[pts.len() - 1].0 {
                prop_assert_eq!(v, 0.0);
            }
            let hi = ys.iter().cloned().fold(0.0, f64::max);
            prop_assert!(v <= hi + 1e-12);
        }
    }
}
