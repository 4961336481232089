//! Named seed derivation. Every random stream in the crate is a child of a
//! single master seed, so a partial rerun (one replication, one window)
//! sees exactly the numbers it would see inside a full run.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Child seed number `stream` of `parent`.
pub fn derive(parent: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(parent);
    rng.set_stream(stream);
    rng.next_u64()
}

/// Child seed along a path, e.g. `derive_path(seed, &[rep, FOLDS])`.
pub fn derive_path(parent: u64, path: &[u64]) -> u64 {
    path.iter().fold(parent, |s, k| derive(s, *k))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stream tags used below a replication or window seed.
pub mod tag {
    pub const DATA: u64 = 0;
    pub const FOLDS: u64 = 1;
    pub const PROBE: u64 = 2;
    /// Replication `i` of a scenario lives at stream `REP_BASE + i`.
    pub const REP_BASE: u64 = 1_000;
    /// Case `k` of a simulation run lives at stream `CASE_BASE + k`.
    pub const CASE_BASE: u64 = 100;
    /// Tracking window `w` lives at stream `WINDOW_BASE + w`.
    pub const WINDOW_BASE: u64 = 10_000;
}
