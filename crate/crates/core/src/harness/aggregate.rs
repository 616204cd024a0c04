//! Order-independent aggregation of replica results.
//!
//! Replicas are grouped in fixed-size blocks by index. Each block keeps
//! Welford moments; blocks are merged pairwise-exactly in index order, so the
//! result depends only on `(seed, replicas, config)` and never on the number
//! of threads.

use rayon::prelude::*;
use serde::Serialize;

use super::stream::{derive_stream_in, Stream};
use crate::error::{Error, Result};

/// Replicas per aggregation block. Part of the determinism contract.
pub const BLOCK: u64 = 512;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub count: u64,
    pub mean: f64,
    /// Sum of squared deviations from the mean.
    pub m2: f64,
}

impl Moments {
    #[inline]
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&self, other: &Moments) -> Moments {
        if other.count == 0 {
            return *self;
        }
        if self.count == 0 {
            return *other;
        }
        let n = (self.count + other.count) as f64;
        let (na, nb) = (self.count as f64, other.count as f64);
        let d = other.mean - self.mean;
        Moments {
            count: self.count + other.count,
            mean: self.mean + d * nb / n,
            m2: self.m2 + other.m2 + d * d * na * nb / n,
        }
    }

    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn stderr(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.variance() / self.count as f64).sqrt()
        }
    }

    pub fn from_slice(xs: &[f64]) -> Moments {
        let mut m = Moments::default();
        for &x in xs {
            m.push(x);
        }
        m
    }
}

/// Statistics of one block of replicas.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Partial {
    pub index: u64,
    pub moments: Moments,
    /// Sum of per-replica bias bounds.
    pub bias: f64,
    pub invalid: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Aggregate {
    pub moments: Moments,
    pub bias: f64,
    pub invalid: u64,
}

/// Merges partials in index order regardless of the order given.
pub fn aggregate(partials: &[Partial]) -> Result<Aggregate> {
    let mut sorted: Vec<&Partial> = partials.iter().collect();
    sorted.sort_by_key(|p| p.index);
    let mut out = Aggregate::default();
    for p in sorted {
        out.moments = out.moments.merge(&p.moments);
        out.bias += p.bias;
        out.invalid += p.invalid;
    }
    if out.moments.count == 0 {
        return Err(Error::ZeroCount);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Replica {
    /// A usable replica value together with its bias bound.
    Value { x: f64, bias: f64 },
    /// Capped or otherwise unusable; counted, never averaged.
    Invalid,
}

impl Replica {
    pub fn exact(x: f64) -> Replica {
        Replica::Value { x, bias: 0.0 }
    }
}

/// Evaluates `f` on `replicas` indexed streams in parallel and aggregates.
pub fn run_replicas<F>(seed: u64, domain: u64, replicas: u64, f: F) -> Result<Aggregate>
where
    F: Fn(u64, &mut Stream) -> Replica + Sync,
{
    let blocks = replicas.div_ceil(BLOCK);
    let partials: Vec<Partial> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut p = Partial { index: b, ..Partial::default() };
            for i in b * BLOCK..((b + 1) * BLOCK).min(replicas) {
                let mut rng = derive_stream_in(seed, domain, i);
                match f(i, &mut rng) {
                    Replica::Value { x, bias } => {
                        p.moments.push(x);
                        p.bias += bias;
                    }
                    Replica::Invalid => p.invalid += 1,
                }
            }
            p
        })
        .collect();
    aggregate(&partials)
}

/// Maps `f` over indices `range` with one stream per index, preserving order.
pub fn par_map_indexed<T, F>(seed: u64, domain: u64, range: std::ops::Range<u64>, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, &mut Stream) -> T + Sync,
{
    range
        .into_par_iter()
        .map(|i| f(i, &mut derive_stream_in(seed, domain, i)))
        .collect()
}

/// Monte Carlo estimate with provenance.
///
/// Replica values are averaged after dividing by `exp(log_scale)`, which
/// keeps tail probabilities of order `e^-300` representable; `mean`,
/// `stderr` and `bias_bound` are reported on the natural scale and
/// `log_mean` carries the full-precision logarithm.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateRecord {
    pub mean: f64,
    pub stderr: f64,
    #[serde(serialize_with = "super::report::ser_f64")]
    pub log_mean: f64,
    pub log_scale: f64,
    pub replicas: u64,
    pub invalid_replicas: u64,
    pub bias_bound: f64,
    pub seed: u64,
    pub config_digest: String,
}

impl EstimateRecord {
    pub fn from_aggregate(agg: &Aggregate, log_scale: f64, seed: u64) -> EstimateRecord {
        let m = &agg.moments;
        let scale = log_scale.exp();
        EstimateRecord {
            mean: m.mean * scale,
            stderr: m.stderr() * scale,
            log_mean: m.mean.ln() + log_scale,
            log_scale,
            replicas: m.count,
            invalid_replicas: agg.invalid,
            bias_bound: agg.bias / m.count as f64 * scale,
            seed,
            config_digest: String::new(),
        }
    }

    /// Standard error relative to the mean.
    pub fn relative_stderr(&self) -> f64 {
        self.stderr / self.mean
    }

    /// Fraction of replicas excluded as invalid.
    pub fn invalid_fraction(&self) -> f64 {
        self.invalid_replicas as f64 / (self.replicas + self.invalid_replicas) as f64
    }

    pub fn with_digest(mut self, digest: String) -> EstimateRecord {
        self.config_digest = digest;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn partial(index: u64, xs: &[f64]) -> Partial {
        Partial { index, moments: Moments::from_slice(xs), bias: 0.0, invalid: 0 }
    }

    #[test]
    fn single_partial_is_identity() {
        let p = partial(0, &[1.0, 2.0, 4.0]);
        let agg = aggregate(&[p]).unwrap();
        assert_eq!(agg.moments, p.moments);
    }

    #[test]
    fn two_blocks_match_direct() {
        let a = [0.5, 1.25, -3.0, 7.5];
        let b = [2.0, 2.5, 1e-3];
        let agg = aggregate(&[partial(1, &b), partial(0, &a)]).unwrap();
        let all: Vec<f64> = a.iter().chain(&b).copied().collect();
        let n = all.len() as f64;
        let mean = all.iter().sum::<f64>() / n;
        let var = all.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((agg.moments.mean - mean).abs() <= 1e-12 * mean.abs());
        assert!((agg.moments.variance() - var).abs() <= 1e-12 * var);
    }

    #[test]
    fn empty_is_an_error() {
        assert_eq!(aggregate(&[]), Err(Error::ZeroCount));
        let p = Partial { index: 0, invalid: 3, ..Partial::default() };
        assert_eq!(aggregate(&[p]), Err(Error::ZeroCount));
    }

    #[test]
    fn replicas_independent_of_thread_count() {
        let f = |_: u64, rng: &mut Stream| Replica::exact(rng.random::<f64>());
        let a = run_replicas(3, 0, 5000, f).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| run_replicas(3, 0, 5000, f).unwrap());
        assert_eq!(a, b);
        assert_eq!(a.moments.count, 5000);
    }

    proptest! {
        #[test]
        fn permutation_invariant(
            blocks in proptest::collection::vec(proptest::collection::vec(-1e3f64..1e3, 1..20), 1..12),
            seed in any::<u64>(),
        ) {
            let partials: Vec<Partial> = blocks.iter().enumerate().map(|(i, xs)| partial(i as u64, xs)).collect();
            let base = aggregate(&partials).unwrap();
            let mut shuffled = partials.clone();
            let mut rng = super::super::stream::derive_stream(seed, 0);
            for i in (1..shuffled.len()).rev() {
                shuffled.swap(i, rng.random_range(0..=i));
            }
            let again = aggregate(&shuffled).unwrap();
            prop_assert_eq!(base.moments.mean.to_bits(), again.moments.mean.to_bits());
            prop_assert_eq!(base.moments.m2.to_bits(), again.moments.m2.to_bits());
        }
    }
}
