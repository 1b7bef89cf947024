//! Counter-based random streams.
//!
//! Item `k` of any batch draws from ChaCha8 keyed by the master seed with
//! stream id `k`, so its output depends on `(master_seed, k)` alone and never
//! on scheduling or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Independent stream `index` under `master_seed`.
pub fn stream(master_seed: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}
