//! The decoration point process seen from the maximum, the conditioned
//! overshoot, and finiteness diagnostics for the auxiliary process.

mod conditioned;
mod laplace;
mod overshoot;
mod profile;
mod sample;

pub use conditioned::{conditioned_extremal, ConditionedReport, ConditionedSample, MAX_CONDITIONED_N, MAX_CONDITIONED_RATE};
pub use laplace::{laplace_compare, Bump, LaplaceReport};
pub use overshoot::{
    bootstrap_ks_quantile, conditioned_overshoot, conditioned_overshoot_with, weighted_ks_exp, weighted_mean,
    OvershootReport, WeightedSample, BOOTSTRAP_RESAMPLES,
};
pub use profile::{atom_count_profile, ProfilePoint, ProfileReport};
pub use sample::{
    decoration_csv, default_window, sample_decoration, sample_decoration_with, DecorationReport, DecorationSample,
    MIN_ACCEPTANCE, MIN_ATTEMPTS,
};
