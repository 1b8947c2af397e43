use std::fmt;
use std::str::FromStr;

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::generators::PseudodetGenerator;
use crate::rng::Stream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "0")]
    Zero,
    #[serde(rename = "1")]
    One,
    #[serde(rename = "reject")]
    Reject,
}

impl Verdict {
    pub fn from_bit(b: bool) -> Self {
        if b {
            Verdict::One
        } else {
            Verdict::Zero
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Zero => "0",
            Verdict::One => "1",
            Verdict::Reject => "reject",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Decommitment {
    pub bit: bool,
    pub seeds: Vec<BitString>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitTranscript {
    pub r: BitString,
    pub com: Vec<BitString>,
    pub decommit: Option<Decommitment>,
    /// Set by [`Commitment::reveal_verify`].
    pub verdict: Option<Verdict>,
    pub matches: Option<usize>,
}

/// Cheating strategies a committer can apply to an honest decommitment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Adversary {
    None,
    /// Complement every seed bit and keep the claimed bit.
    FlipSeeds,
    /// Opens one commitment both ways using the most colliding key pair;
    /// only meaningful for generators with known output distributions.
    BestCollision,
}

impl FromStr for Adversary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Adversary::None),
            "flip-seeds" => Ok(Adversary::FlipSeeds),
            "best-collision" => Ok(Adversary::BestCollision),
            other => Err(Error::Parse(format!("unknown adversary `{other}`"))),
        }
    }
}

impl fmt::Display for Adversary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Adversary::None => "none",
            Adversary::FlipSeeds => "flip-seeds",
            Adversary::BestCollision => "best-collision",
        })
    }
}

/// Bit commitment with classical messages: the receiver sends `r`, the
/// committer sends `G(k_i)` or `G(k_i) ⊕ r` for each of λ seeds.
pub struct Commitment<'g, G> {
    gen: &'g G,
    lambda: usize,
}

impl<'g, G: PseudodetGenerator> Commitment<'g, G> {
    pub fn new(gen: &'g G, lambda: usize) -> Result<Self> {
        if lambda == 0 {
            return Err(Error::InvalidParameter("lambda must be positive".into()));
        }
        if gen.output_len() != 3 * lambda {
            return Err(Error::LengthMismatch { what: "generator output", expected: 3 * lambda, actual: gen.output_len() });
        }
        if gen.seed_len() != lambda {
            return Err(Error::LengthMismatch { what: "generator seed", expected: lambda, actual: gen.seed_len() });
        }
        Ok(Commitment { gen, lambda })
    }

    pub fn lambda(&self) -> usize {
        self.lambda
    }

    /// Smallest match count the receiver accepts: `⌈2λ/3⌉`.
    pub fn threshold(&self) -> usize {
        (2 * self.lambda).div_ceil(3)
    }

    pub fn sample_r<R: RngCore + ?Sized>(&self, rng: &mut R) -> BitString {
        BitString::random(rng, 3 * self.lambda)
    }

    pub fn sample_seeds<R: RngCore + ?Sized>(&self, rng: &mut R) -> Vec<BitString> {
        (0..self.lambda).map(|_| BitString::random(rng, self.lambda)).collect()
    }

    fn evaluate(&self, seeds: &[BitString], stream: &Stream) -> Result<Vec<BitString>> {
        seeds
            .par_iter()
            .enumerate()
            .map(|(i, k)| self.gen.generate(k, &mut stream.child(i as u64).rng()))
            .collect()
    }

    pub fn commit(&self, b: bool, r: &BitString, seeds: &[BitString], stream: &Stream) -> Result<CommitTranscript> {
        if r.len() != 3 * self.lambda {
            return Err(Error::LengthMismatch { what: "receiver string", expected: 3 * self.lambda, actual: r.len() });
        }
        if seeds.len() != self.lambda {
            return Err(Error::LengthMismatch { what: "seed count", expected: self.lambda, actual: seeds.len() });
        }
        let com = self
            .evaluate(seeds, stream)?
            .into_iter()
            .map(|y| if b { y.xor(r) } else { Ok(y) })
            .collect::<Result<_>>()?;
        Ok(CommitTranscript {
            r: r.clone(),
            com,
            decommit: Some(Decommitment { bit: b, seeds: seeds.to_vec() }),
            verdict: None,
            matches: None,
        })
    }

    /// Counts blocks whose fresh recomputation matches the claimed opening.
    /// Malformed transcripts are rejected with zero matches.
    pub fn reveal_verify(&self, transcript: &mut CommitTranscript, stream: &Stream) -> Result<Verdict> {
        let (verdict, matches) = self.judge(transcript, stream)?;
        transcript.verdict = Some(verdict);
        transcript.matches = Some(matches);
        Ok(verdict)
    }

    fn judge(&self, t: &CommitTranscript, stream: &Stream) -> Result<(Verdict, usize)> {
        let Some(dec) = &t.decommit else {
            return Ok((Verdict::Reject, 0));
        };
        let well_formed = t.r.len() == 3 * self.lambda
            && t.com.len() == self.lambda
            && t.com.iter().all(|c| c.len() == 3 * self.lambda)
            && dec.seeds.len() == self.lambda
            && dec.seeds.iter().all(|k| k.len() == self.lambda);
        if !well_formed {
            return Ok((Verdict::Reject, 0));
        }
        let fresh = self.evaluate(&dec.seeds, stream)?;
        let mut n = 0;
        for (y, c) in fresh.iter().zip(&t.com) {
            let expected = if dec.bit { y.xor(&t.r)? } else { y.clone() };
            n += usize::from(&expected == c);
        }
        let verdict = if n >= self.threshold() { Verdict::from_bit(dec.bit) } else { Verdict::Reject };
        Ok((verdict, n))
    }

    /// Rewrites the decommitment according to `adversary`. Best-collision
    /// needs exact distributions and is handled in the binding module.
    pub fn tamper(&self, transcript: &mut CommitTranscript, adversary: Adversary) -> Result<()> {
        match adversary {
            Adversary::None => Ok(()),
            Adversary::FlipSeeds => {
                if let Some(dec) = transcript.decommit.as_mut() {
                    for k in &mut dec.seeds {
                        *k = k.xor(&BitString::ones(k.len()))?;
                    }
                }
                Ok(())
            }
            Adversary::BestCollision => Err(Error::InvalidParameter(
                "best-collision needs a toy generator with exact output distributions".into(),
            )),
        }
    }
}
