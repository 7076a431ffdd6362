//! Seed derivation for reproducible, parallel-safe random streams.
//!
//! Every stochastic component draws from its own ChaCha8 stream whose seed
//! is a hash of the master seed plus a structural label (stage name,
//! user id, genre id, tree index, ...). Streams are therefore independent
//! of scheduling order and identical across runs and platforms.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Derive a 32-byte seed from a master seed and a list of labels.
pub fn derive_seed(master: u64, labels: &[&str]) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    for label in labels {
        hasher.update([0x1f]); // unit separator; keeps ("ab","c") != ("a","bc")
        hasher.update(label.as_bytes());
    }
    hasher.finalize().into()
}

/// A seeded stream for the given labels.
pub fn stream(master: u64, labels: &[&str]) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(derive_seed(master, labels))
}

/// Draw an index from an unnormalized non-negative weight vector.
///
/// Returns `None` when the total weight is zero. Inverse-CDF over the
/// slice order, so results are reproducible for a fixed stream.
pub fn sample_weighted<R: rand::Rng>(rng: &mut R, weights: &[f64]) -> Option<usize> {
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return None;
    }
    let mut target = rng.random::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        target -= w;
        if target < 0.0 {
            return Some(i);
        }
    }
    // Rounding can leave target at ~0; fall back to the last positive weight.
    weights.iter().rposition(|&w| w > 0.0)
}
