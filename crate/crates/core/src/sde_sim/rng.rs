//! Deterministic per-path random-number substreams.
//!
//! Every path draws from its own counter-based stream: the global seed
//! keys a ChaCha12 cipher and the path index selects the stream (the
//! cipher nonce). Distinct indices give independent streams, and the same
//! (seed, index) pair reproduces the same draws on any thread count.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// RNG for one path: ChaCha12 keyed by `seed` on stream `path_index`.
pub fn path_rng(seed: u64, path_index: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(path_index);
    rng
}

/// Substream key: global seed plus path index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStream {
    pub seed: u64,
    pub path_index: u64,
}

impl RngStream {
    /// Instantiate the stream's generator.
    pub fn rng(&self) -> ChaCha12Rng {
        path_rng(self.seed, self.path_index)
    }
}
