//! Seeded random streams.
//!
//! Every stochastic operation draws from a ChaCha stream derived from
//! `(seed, stream id)`, so a run is bit-reproducible from its config and seed
//! and the consumers never share a generator.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream ids used by the harness. Any other id is free for callers.
pub mod streams {
    pub const ENV: u64 = 0;
    pub const INJECT: u64 = 1;
    pub const EPISODES: u64 = 2;
    pub const CLASS: u64 = 3;
    pub const SUBSAMPLE: u64 = 4;
    pub const PROBES: u64 = 5;
}

pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
