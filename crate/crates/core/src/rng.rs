//! Seeded random streams.
//!
//! Every random quantity in the crate comes from a ChaCha8 generator keyed by a
//! 64-bit seed and a stream index, so results do not depend on platform, thread
//! count, or evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Generator for stream `stream` under `seed`.
pub fn stream(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Seed for repetition `rep` of an experiment run with `base`.
///
/// Drawn from a dedicated stream so neighbouring base seeds do not share
/// repetition seeds.
pub fn rep_seed(base: u64, rep: u64) -> u64 {
    use rand::RngCore;
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(u64::MAX);
    rng.set_word_pos(2 * rep as u128);
    rng.next_u64()
}
