use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::reproduction::{ratio_f64, Rational};
use crate::tree_sim::big_ratio_f64;

/// Exact iteration stops once the denominator passes this many bits; the
/// rest of the recursion runs in floating point.
pub const EXACT_BITS: u64 = 16_384;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GwSurvival {
    pub n: usize,
    /// `P(Y_n > 0) = 1 - q_n`
    pub survival: f64,
    /// `log P(Y_n > 0)`, accurate even when `survival` underflows.
    pub log_survival: f64,
    /// Exact survival as `p/q` when the whole recursion stayed rational.
    pub exact: Option<String>,
    /// Last generation computed exactly.
    pub exact_through: usize,
}

/// Survival of a Galton-Watson process with the given offspring law:
/// `q_0 = 0`, `q_k = f(q_{k-1})` with `f` the generating function.
///
/// The recursion is exact while the rationals stay small. It then switches
/// to the survival form `t_k = sum_j p_j (1 - (1 - t_{k-1})^j)`, evaluated
/// with `expm1`/`ln_1p` so that tiny survival probabilities keep full
/// relative precision. The log is tracked separately to survive underflow.
pub fn gw_survival(offspring: &[(u32, Rational)], n: usize) -> Result<GwSurvival> {
    let total: Rational = offspring.iter().map(|(_, p)| *p).sum();
    if total != Rational::one() {
        return Err(Error::ProbabilitySum(format!("{}", ratio_f64(&total))));
    }
    let probs: Vec<(u32, BigRational)> = offspring
        .iter()
        .map(|(k, p)| (*k, BigRational::new(BigInt::from(*p.numer()), BigInt::from(*p.denom()))))
        .collect();
    let mut q = BigRational::zero();
    let mut k = 0;
    while k < n && q.denom().bits() <= EXACT_BITS {
        q = pgf(&probs, &q);
        k += 1;
    }
    let exact_through = k;
    let t_exact = BigRational::one() - &q;
    if k == n {
        let survival = big_ratio_f64(&t_exact);
        return Ok(GwSurvival {
            n,
            survival,
            log_survival: log_big(&t_exact),
            exact: Some(format!("{t_exact}")),
            exact_through,
        });
    }
    // scaled form: t = exp(log_t); keep log_t to avoid underflow
    let pf: Vec<(f64, f64)> = offspring.iter().map(|(j, p)| (f64::from(*j), ratio_f64(p))).collect();
    let mut log_t = log_big(&t_exact);
    for _ in k..n {
        let t = log_t.exp();
        log_t = if t > 1e-300 {
            let s: f64 = pf.iter().map(|(j, p)| p * -(j * (-t).ln_1p()).exp_m1()).sum();
            s.ln()
        } else {
            // (1 - (1-t)^j) / t -> j, so t_k ~ m t_{k-1}
            let m: f64 = pf.iter().map(|(j, p)| j * p).sum();
            log_t + m.ln()
        };
    }
    Ok(GwSurvival { n, survival: log_t.exp(), log_survival: log_t, exact: None, exact_through })
}

fn pgf(probs: &[(u32, BigRational)], s: &BigRational) -> BigRational {
    let mut acc = BigRational::zero();
    for (k, p) in probs {
        acc += p * num_traits::pow::pow(s.clone(), *k as usize);
    }
    acc
}

fn log_big(r: &BigRational) -> f64 {
    if r.is_zero() {
        return f64::NEG_INFINITY;
    }
    // ln(a/b) = ln a - ln b with each computed from its leading bits
    fn ln_int(x: &BigInt) -> f64 {
        let bits = x.bits();
        let shift = bits.saturating_sub(60);
        let top: BigInt = x >> shift;
        let v: f64 = num_traits::ToPrimitive::to_f64(&top).unwrap_or(f64::NAN);
        v.ln() + shift as f64 * std::f64::consts::LN_2
    }
    ln_int(r.numer()) - ln_int(r.denom())
}
