//! Seed splitting: every independent task gets its own ChaCha stream.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Generator for task `index` under the run seed `seed`. The seed picks the
/// key and the index picks the stream, so tasks never share random numbers
/// and results do not depend on which thread runs which task.
pub fn task_rng(seed: u64, index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
