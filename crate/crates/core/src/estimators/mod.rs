//! Estimators built on the spine: tail probabilities, the constant `C(theta)`,
//! mean particle counts, the precise asymptotic formula, empirical decay
//! rates, Galton-Watson survival and the local limit check.

mod ctheta;
mod gw;
mod llt;
mod tail;

pub use crate::harness::aggregate::EstimateRecord;
pub use ctheta::{
    c_theta, c_theta_with, default_n_max, stabilization_profile, theta_sweep, CThetaReport, CVariant, Stabilization, SweepPoint,
    SweepReport, PILOT_N, PILOT_REPLICAS,
};
pub use gw::{gw_survival, GwSurvival, EXACT_BITS};
pub use llt::{llt_check, GKind, LltReport};
pub use tail::{
    asymptotic_tail, ldp_rate, ldp_rate_with, log_asymptotic_tail, mean_count, spinal_tail, spinal_tail_with, tail_level, LdpPoint,
    LdpReport,
};
