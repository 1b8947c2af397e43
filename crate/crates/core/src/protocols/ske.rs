use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::majority::{majority_string, MajorityResult};
use super::split_key;
use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::generators::PseudodetFunction;
use crate::rng::Stream;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkeCiphertext {
    pub nonce: BitString,
    pub blocks: Vec<BitString>,
}

/// Nonce-based private-key encryption: `c = (r, m ⊕ F(k_1, r), …, m ⊕ F(k_λ, r))`.
pub struct Ske<'f, F> {
    f: &'f F,
    lambda: usize,
}

impl<'f, F: PseudodetFunction> Ske<'f, F> {
    pub fn new(f: &'f F, lambda: usize) -> Result<Self> {
        if f.key_len() != lambda {
            return Err(Error::LengthMismatch { what: "function key", expected: lambda, actual: f.key_len() });
        }
        Ok(Ske { f, lambda })
    }

    pub fn message_len(&self) -> usize {
        self.f.output_len()
    }

    pub fn nonce_len(&self) -> usize {
        self.f.input_len()
    }

    pub fn gen_key<R: RngCore + ?Sized>(&self, rng: &mut R) -> BitString {
        BitString::random(rng, self.lambda * self.lambda)
    }

    fn pads(&self, key: &BitString, nonce: &BitString, stream: &Stream) -> Result<Vec<BitString>> {
        split_key(key, self.lambda)?
            .par_iter()
            .enumerate()
            .map(|(i, k)| self.f.eval(k, nonce, &mut stream.child(i as u64).rng()))
            .collect()
    }

    /// Draws the nonce from `stream` itself and branch randomness from its
    /// children.
    pub fn encrypt(&self, key: &BitString, message: &BitString, stream: &Stream) -> Result<SkeCiphertext> {
        if message.len() != self.message_len() {
            return Err(Error::LengthMismatch { what: "message", expected: self.message_len(), actual: message.len() });
        }
        let nonce = BitString::random(&mut stream.rng(), self.nonce_len());
        let blocks = self.pads(key, &nonce, stream)?.iter().map(|p| message.xor(p)).collect::<Result<_>>()?;
        Ok(SkeCiphertext { nonce, blocks })
    }

    pub fn decrypt(&self, key: &BitString, ct: &SkeCiphertext, stream: &Stream) -> Result<MajorityResult> {
        if ct.blocks.len() != self.lambda {
            return Err(Error::LengthMismatch { what: "ciphertext blocks", expected: self.lambda, actual: ct.blocks.len() });
        }
        if ct.nonce.len() != self.nonce_len() {
            return Err(Error::LengthMismatch { what: "nonce", expected: self.nonce_len(), actual: ct.nonce.len() });
        }
        let candidates = self
            .pads(key, &ct.nonce, stream)?
            .iter()
            .zip(&ct.blocks)
            .map(|(p, c)| c.xor(p))
            .collect::<Result<Vec<_>>>()?;
        majority_string(&candidates)
    }
}
