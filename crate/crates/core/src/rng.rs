//! Deterministic random streams.
//!
//! Every random draw in the crate comes from a ChaCha20 keystream
//! (`rand_chacha::ChaCha20Rng`). Keys are 32-byte SHA-256 digests: a
//! [`Stream`] is a node in a tree whose children are keyed by
//! `SHA-256(parent_key || "split" || index_le64)`, so any trial or branch can
//! be reconstructed from the master seed alone regardless of scheduling.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

/// The concrete generator handed to every randomized operation.
pub type StreamRng = ChaCha20Rng;

const ROOT_DOMAIN: &[u8] = b"pdextract/stream/v1";

/// A position in the stream-splitting tree.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Stream {
    key: [u8; 32],
}

impl Stream {
    pub fn root(master_seed: u64) -> Self {
        let mut h = Sha256::new();
        h.update(ROOT_DOMAIN);
        h.update(master_seed.to_le_bytes());
        Stream { key: h.finalize().into() }
    }

    /// Keyed directly by a 32-byte digest.
    pub fn from_key(key: [u8; 32]) -> Self {
        Stream { key }
    }

    pub fn child(&self, index: u64) -> Self {
        let mut h = Sha256::new();
        h.update(self.key);
        h.update(b"split");
        h.update(index.to_le_bytes());
        Stream { key: h.finalize().into() }
    }

    /// Shorthand for `self.child(a).child(b)`.
    pub fn grandchild(&self, a: u64, b: u64) -> Self {
        self.child(a).child(b)
    }

    pub fn rng(&self) -> StreamRng {
        ChaCha20Rng::from_seed(self.key)
    }

    pub fn key(&self) -> &[u8; 32] {
        &self.key
    }
}

/// Uniform double in `[0, 1)` built from the top 53 bits of one `u64`.
#[inline]
pub fn uniform_f64<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Box–Muller pair of independent standard normals in double precision.
///
/// `u1` is mapped to `(0, 1]` so the logarithm is always finite.
#[inline]
pub fn gaussian_pair<R: RngCore + ?Sized>(rng: &mut R) -> (f64, f64) {
    let u1 = 1.0 - uniform_f64(rng);
    let u2 = uniform_f64(rng);
    let radius = (-2.0 * u1.ln()).sqrt();
    let angle = std::f64::consts::TAU * u2;
    (radius * angle.cos(), radius * angle.sin())
}

/// Uniform bits, one `u64` consumed per 64 bits.
pub fn random_bits<R: RngCore + ?Sized>(rng: &mut R, len: usize) -> Vec<bool> {
    let mut out = Vec::with_capacity(len);
    while out.len() < len {
        let word = rng.next_u64();
        let take = (len - out.len()).min(64);
        out.extend((0..take).map(|i| (word >> i) & 1 == 1));
    }
    out
}
