//! Deterministic random streams.
//!
//! Every stochastic routine takes a master seed and derives one ChaCha stream per
//! logical unit of work (a simulation round, a restart, a component). Stream `i`
//! of seed `s` does not depend on how many other streams were drawn, so serial and
//! parallel runs see identical numbers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream `index` of the master `seed`.
pub fn stream(seed: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Derives a child master seed, for nesting independent sub-experiments under one seed.
pub fn child_seed(seed: u64, index: u64) -> u64 {
    use rand::RngCore;
    stream(seed, index.wrapping_add(1 << 62)).next_u64()
}
