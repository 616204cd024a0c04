//! The size-biased spine and the auxiliary point process seen backwards from
//! the spine tip.
//!
//! Under the measure tilted by the additive martingale, the branching random
//! walk is a spine (a random walk with size-biased broods) decorated by
//! ordinary subtrees. Reversing time along the spine gives the auxiliary
//! process
//!
//! ```text
//! D_n = delta_0 + sum_{k=1..n} sum_{i != w_k} sum_{|u| = k-1} delta(b_k(i) + V^{(i,k)}(u) - S_k)
//! ```
//!
//! where `b_k` is the ranked `k`-th brood, `w_k` the spine child and `S_k`
//! the walk. `D_n` increases in `n`.

mod auxiliary;
mod brood;
mod prune;

pub use auxiliary::{
    build_auxiliary, stabilization_fraction, AuxOptions, AuxiliaryBuilder, AuxiliaryRealization, Spine,
    DEFAULT_PRUNE_DELTA,
};
pub use brood::{sample_size_biased, SizeBiasedBrood, SpineSampler};
pub use prune::PruneTable;
