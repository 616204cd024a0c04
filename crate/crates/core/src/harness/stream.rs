//! Indexed random streams.
//!
//! Every replica draws from its own ChaCha8 stream keyed by
//! `(master seed, domain, index)`. The ChaCha stream id carries the domain in
//! its top 24 bits and the index in the low 40, so streams for different
//! indices never overlap and results do not depend on which thread ran which
//! replica.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

const INDEX_BITS: u32 = 40;

/// Streams used by an estimator are grouped in domains so that, for example,
/// a pilot run and the main run under one seed do not share draws.
pub mod domain {
    pub const DEFAULT: u64 = 0;
    pub const FORWARD: u64 = 1;
    pub const SPINAL: u64 = 2;
    pub const CTHETA: u64 = 3;
    pub const PILOT: u64 = 4;
    pub const WALK: u64 = 5;
    pub const DECORATION: u64 = 6;
    pub const OVERSHOOT: u64 = 7;
    pub const BOOTSTRAP: u64 = 8;
    pub const PERMUTATION: u64 = 9;
    pub const PROFILE: u64 = 10;
    pub const CONDITIONED: u64 = 11;
}

pub fn derive_stream(master_seed: u64, index: u64) -> Stream {
    derive_stream_in(master_seed, domain::DEFAULT, index)
}

pub fn derive_stream_in(master_seed: u64, domain: u64, index: u64) -> Stream {
    assert!(index < 1 << INDEX_BITS, "stream index {index} out of range");
    assert!(domain < 1 << (64 - INDEX_BITS), "stream domain {domain} out of range");
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream((domain << INDEX_BITS) | index);
    rng
}

/// Seed for sub-computation `k` of a run, e.g. one point of a grid sweep.
pub fn child_seed(master_seed: u64, k: u64) -> u64 {
    use rand::RngCore;
    derive_stream_in(master_seed, (1 << (64 - INDEX_BITS)) - 1, k).next_u64()
}
