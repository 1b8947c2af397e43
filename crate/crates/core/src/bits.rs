//! Classical bit strings and seed keys.

use std::fmt;
use std::ops::BitXor;
use std::str::FromStr;

use rand::RngCore;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::rng::random_bits;

/// A string of bits, most significant first. Ordering is lexicographic with
/// `0 < 1`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitString(Vec<bool>);

impl BitString {
    pub fn new(bits: Vec<bool>) -> Self {
        BitString(bits)
    }

    pub fn zeros(len: usize) -> Self {
        BitString(vec![false; len])
    }

    pub fn ones(len: usize) -> Self {
        BitString(vec![true; len])
    }

    pub fn random<R: RngCore + ?Sized>(rng: &mut R, len: usize) -> Self {
        BitString(random_bits(rng, len))
    }

    /// The low `len` bits of `value`, most significant first.
    pub fn from_u64(value: u64, len: usize) -> Self {
        assert!(len <= 64);
        BitString((0..len).rev().map(|i| (value >> i) & 1 == 1).collect())
    }

    /// Big-endian integer value; only defined for strings of at most 64 bits.
    pub fn to_u64(&self) -> u64 {
        assert!(self.0.len() <= 64, "bit string too long for u64");
        self.0.iter().fold(0u64, |acc, &b| (acc << 1) | b as u64)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|b| !b)
    }

    pub fn xor(&self, other: &BitString) -> Result<BitString> {
        if self.len() != other.len() {
            return Err(Error::LengthMismatch {
                what: "xor operand",
                expected: self.len(),
                actual: other.len(),
            });
        }
        Ok(BitString(self.0.iter().zip(&other.0).map(|(a, b)| a ^ b).collect()))
    }

    pub fn concat(parts: &[BitString]) -> BitString {
        BitString(parts.iter().flat_map(|p| p.0.iter().copied()).collect())
    }

    /// Splits into consecutive chunks of `width` bits.
    pub fn chunks(&self, width: usize) -> Result<Vec<BitString>> {
        if width == 0 || self.len() % width != 0 {
            return Err(Error::LengthMismatch {
                what: "chunked string",
                expected: width.max(1) * (self.len() / width.max(1)).max(1),
                actual: self.len(),
            });
        }
        Ok(self.0.chunks(width).map(|c| BitString(c.to_vec())).collect())
    }

    /// Packs bits MSB-first into bytes, zero padded at the end.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.0
            .chunks(8)
            .map(|c| c.iter().enumerate().fold(0u8, |acc, (i, &b)| acc | ((b as u8) << (7 - i))))
            .collect()
    }

    pub fn hamming_weight(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }
}

impl BitXor for &BitString {
    type Output = BitString;

    /// Panics on length mismatch; use [`BitString::xor`] for a checked variant.
    fn bitxor(self, rhs: &BitString) -> BitString {
        self.xor(rhs).expect("xor of unequal lengths")
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for BitString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Parse(format!("unexpected character {other:?} in bit string"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(BitString)
    }
}

impl Serialize for BitString {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// What a seed is for. Determines its expected length.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeedRole {
    /// λ bits keying a state generator.
    PrsSeed,
    /// λ bits for the weak generator.
    QprgSeed,
    /// s·λ bits for the XOR-amplified generator.
    AmplifiedSeed,
    /// λ² bits for the pseudorandom function.
    QprfKey,
}

impl SeedRole {
    pub fn expected_len(self, lambda: usize, s: usize) -> usize {
        match self {
            SeedRole::PrsSeed | SeedRole::QprgSeed => lambda,
            SeedRole::AmplifiedSeed => s * lambda,
            SeedRole::QprfKey => lambda * lambda,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SeedRole::PrsSeed => "prs-seed",
            SeedRole::QprgSeed => "qprg-seed",
            SeedRole::AmplifiedSeed => "amplified-seed",
            SeedRole::QprfKey => "qprf-key",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedKey {
    pub bits: BitString,
    pub role: SeedRole,
}

impl SeedKey {
    /// Builds a seed without length validation.
    pub fn new(bits: BitString, role: SeedRole) -> Self {
        SeedKey { bits, role }
    }

    /// Builds a seed and checks its length against `(lambda, s)`.
    pub fn checked(bits: BitString, role: SeedRole, lambda: usize, s: usize) -> Result<Self> {
        let expected = role.expected_len(lambda, s);
        if bits.len() != expected {
            return Err(Error::LengthMismatch { what: "seed", expected, actual: bits.len() });
        }
        Ok(SeedKey { bits, role })
    }

    pub fn random<R: RngCore + ?Sized>(rng: &mut R, role: SeedRole, lambda: usize, s: usize) -> Self {
        SeedKey { bits: BitString::random(rng, role.expected_len(lambda, s)), role }
    }

    pub fn expect_role(&self, role: SeedRole) -> Result<()> {
        if self.role != role {
            return Err(Error::RoleMismatch {
                expected: role.name().to_string(),
                actual: self.role.name().to_string(),
            });
        }
        Ok(())
    }

    /// Same bits under a different role.
    pub fn with_role(&self, role: SeedRole) -> SeedKey {
        SeedKey { bits: self.bits.clone(), role }
    }

    /// Parses a flat key into `count` equal-width sub-seeds, left to right.
    pub fn split(&self, count: usize, role: SeedRole) -> Result<Vec<SeedKey>> {
        if count == 0 || self.bits.len() % count != 0 {
            return Err(Error::LengthMismatch {
                what: "flat key",
                expected: count * (self.bits.len() / count.max(1)),
                actual: self.bits.len(),
            });
        }
        Ok(self
            .bits
            .chunks(self.bits.len() / count)?
            .into_iter()
            .map(|bits| SeedKey { bits, role })
            .collect())
    }
}
