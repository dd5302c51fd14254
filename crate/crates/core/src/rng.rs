//! Named, seed-derived random streams.
//!
//! Every random quantity comes from its own ChaCha20 stream whose key is the
//! SHA-256 of (master seed, stream name, trial index, network size). Streams for
//! different trials or sizes never overlap, so trials can run in any order.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StreamSeed {
    pub master: u64,
    pub trial: u64,
}

impl StreamSeed {
    pub fn new(master: u64) -> Self {
        StreamSeed { master, trial: 0 }
    }

    pub fn with_trial(self, trial: u64) -> Self {
        StreamSeed { trial, ..self }
    }
}

pub const WEIGHTS: &str = "weights";
pub const THRESHOLDS: &str = "thresholds";
pub const NOISE: &str = "noise";
pub const INITIAL: &str = "initial";

pub fn substream(seed: StreamSeed, name: &str, size: usize) -> ChaCha20Rng {
    let mut h = Sha256::new();
    h.update(b"ratenet-stream");
    h.update(seed.master.to_le_bytes());
    h.update((name.len() as u64).to_le_bytes());
    h.update(name.as_bytes());
    h.update(seed.trial.to_le_bytes());
    h.update((size as u64).to_le_bytes());
    let digest = h.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha20Rng::from_seed(key)
}
