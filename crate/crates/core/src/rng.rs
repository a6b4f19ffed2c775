//! Seeded randomness shared by every stage.
//!
//! All stochastic steps draw from [`ChaCha8Rng`], whose output stream is
//! fixed across platforms and releases. A pipeline-wide seed is split into
//! per-stage seeds by hashing the stage name together with the seed, so one
//! integer reproduces a whole run while stages stay independent.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type StageRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> StageRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// First eight bytes (little endian) of `SHA-256(seed_le || stage)`.
pub fn derive_seed(seed: u64, stage: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(stage.as_bytes());
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}
