//! Simulation and estimation toolkit for upper large deviations of the
//! maximal displacement of a branching random walk.
//!
//! The central piece is the spinal importance-sampling estimator: the
//! probability `P(M_n >= a)` is rewritten as an expectation over a tilted
//! random walk (the spine) decorated by independent sibling subtrees viewed
//! backwards from the spine tip. See [`spine`] and [`estimators`].

pub mod decoration;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod reproduction;
pub mod spine;
pub mod tree_sim;

pub use error::{Error, Result};
pub use reproduction::{LawKind, Rational, ReproductionLaw};
