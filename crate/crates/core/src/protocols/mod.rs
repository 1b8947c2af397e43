//! One-time pad, bit commitment and private-key encryption built on
//! pseudodeterministic generators, plus exact binding analysis over toy
//! generators.
//!
//! Every scheme evaluates its λ generator branches on streams
//! `stream.child(i)`, so a session is reproducible from one [`Stream`].
//!
//! [`Stream`]: crate::rng::Stream

pub mod binding;
pub mod commitment;
pub mod majority;
pub mod potp;
pub mod ske;

pub use binding::{bad_set, binding_search, lex_first_argmax, BestCollision, BindingReport, ToyGenerator};
pub use commitment::{Adversary, CommitTranscript, Commitment, Decommitment, Verdict};
pub use majority::{majority_string, MajorityResult};
pub use potp::{Potp, PotpCiphertext};
pub use ske::{Ske, SkeCiphertext};

use crate::bits::{BitString, SeedKey, SeedRole};
use crate::error::{Error, Result};

/// Parses a λ²-bit key into λ sub-keys of λ bits.
pub(crate) fn split_key(key: &BitString, lambda: usize) -> Result<Vec<BitString>> {
    if key.len() != lambda * lambda {
        return Err(Error::LengthMismatch { what: "protocol key", expected: lambda * lambda, actual: key.len() });
    }
    Ok(SeedKey::new(key.clone(), SeedRole::QprfKey)
        .split(lambda, SeedRole::QprgSeed)?
        .into_iter()
        .map(|s| s.bits)
        .collect())
}
