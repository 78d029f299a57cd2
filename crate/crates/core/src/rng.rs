//! Seeded random streams.
//!
//! Every random source in the crate is a ChaCha8 generator derived from a
//! `u64` seed and a stream id, so runs are reproducible bit-for-bit and
//! independent consumers never share state.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Stream ids separating the consumers of one seed.
pub mod stream {
    pub const ENV: u64 = 1;
    pub const POLICY: u64 = 2;
    pub const INIT: u64 = 3;
    pub const SHUFFLE: u64 = 4;
    pub const BASELINE: u64 = 5;
}

pub fn seeded(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn seeded_stream(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Generator for episode `episode` of evaluation seed `seed`.
///
/// All strategies evaluated on the same `(seed, episode)` observe the same
/// channel realizations.
pub fn episode_stream(seed: u64, episode: u64) -> SimRng {
    seeded_stream(seed, EPISODE_STREAM_BASE | episode)
}

/// Policy-side generator for evaluation episode `episode`, independent of
/// the environment's [`episode_stream`].
pub fn policy_episode_stream(seed: u64, episode: u64) -> SimRng {
    seeded_stream(seed, POLICY_EPISODE_STREAM_BASE | episode)
}

const EPISODE_STREAM_BASE: u64 = 1 << 40;
const POLICY_EPISODE_STREAM_BASE: u64 = 2 << 40;
