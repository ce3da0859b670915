//! Named sub-seed derivation.
//!
//! A sub-seed is the first eight bytes (little-endian) of
//! `SHA-256(root_le_bytes || 0x1f || label_0 || 0x1f || label_1 ...)`.
//! Each pipeline stage draws from its own label, so changing one stage's
//! randomness never perturbs another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub const SPLIT: &str = "split";
pub const INIT: &str = "init";
pub const SHUFFLE: &str = "shuffle";
pub const SMOTE: &str = "smote";
pub const SELECTION: &str = "selection";
pub const CORPUS: &str = "corpus";

pub fn derive(root: u64, labels: &[&str]) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(root.to_le_bytes());
    for label in labels {
        hasher.update([0x1f]);
        hasher.update(label.as_bytes());
    }
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

/// Seed for one institution's work in one federation round.
pub fn round_seed(root: u64, round: usize, institution: &str) -> u64 {
    derive(root, &["round", &round.to_string(), institution])
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
