//! Seeded random streams.
//!
//! Every utterance gets its own stream whose seed is a stable hash of the
//! master seed and the utterance id, so adding or reordering utterances
//! never perturbs the output for the others.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Derives the per-utterance seed from the master seed and an id.
pub fn sub_seed(master: u64, id: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(id.as_bytes());
    let digest = h.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

/// A ChaCha stream that remembers the seed it was created from.
#[derive(Debug, Clone)]
pub struct AugRng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl AugRng {
    pub fn new(seed: u64) -> Self {
        AugRng {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Stream for one utterance under a master seed.
    pub fn for_utterance(master: u64, id: &str) -> Self {
        AugRng::new(sub_seed(master, id))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

impl RngCore for AugRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.inner.try_fill_bytes(dest)
    }
}
