use std::collections::HashMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::reproduction::{Rational, ReproductionLaw, TabulatedLaw};

/// Largest particle tree (`max brood ^ n` leaves) the oracle accepts.
pub const ENUMERATION_LIMIT: u128 = 10_000_000;

struct Enumerator<'a> {
    law: &'a TabulatedLaw,
    probs: Vec<BigRational>,
    // P(M_k < t) for a particle at 0, t in grid units
    memo: HashMap<(usize, i64), BigRational>,
}

impl Enumerator<'_> {
    fn below(&mut self, k: usize, t: i64) -> BigRational {
        if k == 0 {
            return if 0 < t { BigRational::one() } else { BigRational::zero() };
        }
        if let Some(v) = self.memo.get(&(k, t)) {
            return v.clone();
        }
        let mut total = BigRational::zero();
        for j in 0..self.law.rows().len() {
            if self.probs[j].is_zero() {
                continue;
            }
            let mut prod = self.probs[j].clone();
            for i in 0..self.law.row_units(j).len() {
                let d = self.law.row_units(j)[i] as i64;
                let q = self.below(k - 1, t - d);
                if q.is_zero() {
                    prod = q;
                    break;
                }
                prod *= q;
            }
            total += prod;
        }
        self.memo.insert((k, t), total.clone());
        total
    }
}

/// Exact `P(M_n >= a)` for a tabulated law, with extinction counted as
/// `M_n = -inf`.
///
/// Uses `P(M_k < t) = sum_j p_j prod_i P(M_{k-1} < t - d_{j,i})` over the
/// joint outcomes of one brood.
pub fn enumerate_tail(law: &ReproductionLaw, n: usize, a: Rational) -> Result<BigRational> {
    let t = law.as_tabulated().ok_or(Error::NotTabulated)?;
    let max_brood = t.rows().iter().map(|r| r.displacements.len()).max().unwrap_or(0) as u128;
    let leaves = (0..n).try_fold(1u128, |acc, _| acc.checked_mul(max_brood.max(1))).unwrap_or(u128::MAX);
    if leaves > ENUMERATION_LIMIT {
        return Err(Error::EnumerationTooLarge { leaves, limit: ENUMERATION_LIMIT });
    }
    // particles sit on integer grid units, so M >= a iff M >= ceil(a * grid)
    let threshold = (a * Rational::from_integer(t.grid())).ceil().to_integer();
    let probs = t
        .rows()
        .iter()
        .map(|r| BigRational::new(BigInt::from(*r.prob.numer()), BigInt::from(*r.prob.denom())))
        .collect();
    let mut e = Enumerator { law: t, probs, memo: HashMap::new() };
    Ok(BigRational::one() - e.below(n, threshold))
}

pub fn big_ratio_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reproduction::fixtures::*;

    fn big(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn c2pm1_values() {
        let law = c2pm1();
        assert_eq!(enumerate_tail(&law, 1, int(1)).unwrap(), big(3, 4));
        assert_eq!(enumerate_tail(&law, 2, int(2)).unwrap(), big(39, 64));
        assert_eq!(enumerate_tail(&law, 2, int(-2)).unwrap(), big(1, 1));
        // M_2 >= 0 fails only when all four grandchildren sit at -2 or below
        let p0 = enumerate_tail(&law, 2, int(0)).unwrap();
        assert_eq!(p0, enumerate_tail(&law, 2, r(-1, 2)).unwrap());
    }

    #[test]
    fn c2pm1_second_generation_by_hand() {
        // K children at +1 with K ~ Bin(2, 1/2); each has both children at -1
        // with probability 1/4, so P(M_2 < 2) = E (1/4)^K
        let expected = big(1, 4) + big(1, 2) * big(1, 4) + big(1, 4) * big(1, 16);
        assert_eq!(enumerate_tail(&c2pm1(), 2, int(2)).unwrap(), BigRational::one() - expected);
    }

    #[test]
    fn extinction_counts_as_minus_infinity() {
        let law = ReproductionLaw::tabulated(vec![(r(1, 2), vec![]), (r(1, 2), vec![int(1)])]).unwrap();
        assert_eq!(enumerate_tail(&law, 3, int(-100)).unwrap(), big(1, 8));
    }

    #[test]
    fn size_limit() {
        let err = enumerate_tail(&c2pm1(), 30, int(0)).unwrap_err();
        assert!(matches!(err, Error::EnumerationTooLarge { .. }));
        assert_eq!(enumerate_tail(&binary_gaussian(), 1, int(0)), Err(Error::NotTabulated));
    }
}
