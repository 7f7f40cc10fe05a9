//! Counter-based deterministic RNG streams.
//!
//! Every stochastic routine in the crate derives its generator from a master
//! seed plus a list of stream identifiers (trial index, receiver index, ...),
//! so parallel and serial execution orders produce identical draws.

use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;
use sha2::{Digest, Sha256};

/// Generator for the stream keyed by `(master, ids...)`.
pub fn stream_rng(master: u64, ids: &[u64]) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    for id in ids {
        hasher.update(id.to_le_bytes());
    }
    let digest = hasher.finalize();
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&digest[..32]);
    ChaCha8Rng::from_seed(seed)
}
