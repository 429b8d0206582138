//! Deterministic stream derivation.
//!
//! Every random stream in the engine is keyed by a SHA-256 digest of the
//! root seed, a purpose tag, and integer qualifiers. Streams with different
//! tags or qualifiers are statistically independent, so e.g. re-seeding the
//! training sampler never perturbs the noise canvases.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::volume::{LatentVolume, VolumeShape};

/// Derive a 256-bit stream key from the root seed, a purpose tag and
/// integer qualifiers.
pub fn derive_key(root: u64, tag: &str, parts: &[i64]) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(root.to_le_bytes());
    hasher.update((tag.len() as u64).to_le_bytes());
    hasher.update(tag.as_bytes());
    for p in parts {
        hasher.update(p.to_le_bytes());
    }
    hasher.finalize().into()
}

/// RNG seeded from a derived key.
pub fn stream_rng(root: u64, tag: &str, parts: &[i64]) -> ChaCha12Rng {
    ChaCha12Rng::from_seed(derive_key(root, tag, parts))
}

/// Standard-normal volume drawn from the given stream.
pub fn noise_volume(shape: VolumeShape, rng: &mut ChaCha12Rng) -> Result<LatentVolume> {
    shape.validate()?;
    let values = (0..shape.len())
        .map(|_| {
            let z: f32 = StandardNormal.sample(rng);
            z
        })
        .collect();
    LatentVolume::from_values(shape, values)
}
