//! Forward simulation of the branching random walk under its original law,
//! an exact enumeration oracle for small lattice instances, and the plain
//! Monte Carlo tail estimator.

mod enumerate;
mod forward;
mod point;

pub use enumerate::{big_ratio_f64, enumerate_tail, ENUMERATION_LIMIT};
pub use forward::{
    additive_martingale, extremal_process, forward_final, naive_tail, run_forward, GenerationSnapshot, DEFAULT_CAP,
    MAX_INVALID_FRACTION,
};
pub use point::{Atom, MaxDisplacement, PointMeasure};
