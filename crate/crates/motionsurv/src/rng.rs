//! Deterministic stream derivation.
//!
//! Every random draw in the toolkit flows from a single master seed through
//! named, counter-addressed sub-streams. A stream is identified by a label
//! plus a list of integer indices (subject number, bootstrap replicate,
//! particle id, ...), so independent units of work get independent RNGs
//! regardless of evaluation order or thread scheduling.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Derive an independent RNG from `(master, label, indices)`.
///
/// The mapping is a SHA-256 hash of the canonical encoding of the inputs, so
/// two streams collide only if their identifiers are equal.
pub fn stream(master: u64, label: &str, indices: &[u64]) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    hasher.update((label.len() as u64).to_le_bytes());
    hasher.update(label.as_bytes());
    for &ix in indices {
        hasher.update(ix.to_le_bytes());
    }
    let digest = hasher.finalize();
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(seed)
}

/// Derive a 64-bit sub-seed instead of a full RNG, for handing a seed across
/// an API boundary (e.g. a trainer that seeds itself).
pub fn subseed(master: u64, label: &str, indices: &[u64]) -> u64 {
    use rand::RngCore;
    stream(master, label, indices).next_u64()
}
