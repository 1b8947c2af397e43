use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::majority::{majority_string, MajorityResult};
use super::split_key;
use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::generators::PseudodetGenerator;
use crate::rng::Stream;

/// λ blocks `c_i = m ⊕ G(k_i)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PotpCiphertext {
    pub blocks: Vec<BitString>,
}

/// Pseudorandom one-time pad over a pseudodeterministic generator.
pub struct Potp<'g, G> {
    gen: &'g G,
    lambda: usize,
}

impl<'g, G: PseudodetGenerator> Potp<'g, G> {
    /// In faithful mode the generator must stretch: `ℓ > λ²`.
    pub fn new(gen: &'g G, lambda: usize, faithful: bool) -> Result<Self> {
        if gen.seed_len() != lambda {
            return Err(Error::LengthMismatch { what: "generator seed", expected: lambda, actual: gen.seed_len() });
        }
        if faithful && gen.output_len() <= lambda * lambda {
            return Err(Error::InvalidParameter(format!(
                "output length {} does not exceed key length {}",
                gen.output_len(),
                lambda * lambda
            )));
        }
        Ok(Potp { gen, lambda })
    }

    pub fn message_len(&self) -> usize {
        self.gen.output_len()
    }

    pub fn gen_key<R: RngCore + ?Sized>(&self, rng: &mut R) -> BitString {
        BitString::random(rng, self.lambda * self.lambda)
    }

    fn pads(&self, key: &BitString, stream: &Stream) -> Result<Vec<BitString>> {
        split_key(key, self.lambda)?
            .par_iter()
            .enumerate()
            .map(|(i, k)| self.gen.generate(k, &mut stream.child(i as u64).rng()))
            .collect()
    }

    pub fn encrypt(&self, key: &BitString, message: &BitString, stream: &Stream) -> Result<PotpCiphertext> {
        if message.len() != self.message_len() {
            return Err(Error::LengthMismatch { what: "message", expected: self.message_len(), actual: message.len() });
        }
        let blocks = self.pads(key, stream)?.iter().map(|p| message.xor(p)).collect::<Result<_>>()?;
        Ok(PotpCiphertext { blocks })
    }

    /// Recomputes every pad and majority-votes the λ candidate messages.
    pub fn decrypt(&self, key: &BitString, ct: &PotpCiphertext, stream: &Stream) -> Result<MajorityResult> {
        if ct.blocks.len() != self.lambda {
            return Err(Error::LengthMismatch { what: "ciphertext blocks", expected: self.lambda, actual: ct.blocks.len() });
        }
        let candidates = self
            .pads(key, stream)?
            .iter()
            .zip(&ct.blocks)
            .map(|(p, c)| c.xor(p))
            .collect::<Result<Vec<_>>>()?;
        majority_string(&candidates)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{QprgConfig, QuantumPrg, SyntheticPrg};
    use crate::tomography::Backend;

    #[test]
    fn exact_backend_round_trip() {
        let gen = QuantumPrg { cfg: QprgConfig::desk(3, 4096, Backend::Exact, 0.01).unwrap() };
        let potp = Potp::new(&gen, 3, false).unwrap();
        let root = Stream::root(10);
        for t in 0..100 {
            let mut rng = root.grandchild(t, 0).rng();
            let key = potp.gen_key(&mut rng);
            let m = BitString::random(&mut rng, potp.message_len());
            let ct = potp.encrypt(&key, &m, &root.grandchild(t, 1)).unwrap();
            let dec = potp.decrypt(&key, &ct, &root.grandchild(t, 2)).unwrap();
            assert_eq!(dec.value, m);
            assert_eq!(dec.count, 3);
        }
    }

    #[test]
    fn zero_message_exposes_pads() {
        let gen = SyntheticPrg { seed_len: 4, output_len: 20, deviation: 0.0 };
        let potp = Potp::new(&gen, 4, true).unwrap();
        let key: BitString = "1010111100001100".parse().unwrap();
        let ct = potp.encrypt(&key, &BitString::zeros(20), &Stream::root(0)).unwrap();
        for (i, block) in ct.blocks.iter().enumerate() {
            let k = BitString::new(key.bits()[4 * i..4 * i + 4].to_vec());
            assert_eq!(block, &gen.canonical(&k));
        }
    }

    #[test]
    fn length_checks() {
        let gen = SyntheticPrg { seed_len: 4, output_len: 10, deviation: 0.0 };
        assert!(Potp::new(&gen, 4, true).is_err());
        assert!(Potp::new(&gen, 5, false).is_err());
        let potp = Potp::new(&gen, 4, false).unwrap();
        let key = BitString::zeros(16);
        assert!(potp.encrypt(&key, &BitString::zeros(9), &Stream::root(0)).is_err());
        assert!(potp.encrypt(&BitString::zeros(15), &BitString::zeros(10), &Stream::root(0)).is_err());
        let bad = PotpCiphertext { blocks: vec![BitString::zeros(10); 3] };
        assert!(potp.decrypt(&key, &bad, &Stream::root(0)).is_err());
    }
}
