//! Weak and XOR-amplified pseudodeterministic generators, and the
//! pseudorandom function built from input-indexed states.
//!
//! The weak generator maps a λ-bit seed to a seeded state in dimension `d`
//! and runs the extractor once. The amplified generator XORs `s` weak
//! outputs on independent seeds; the function XORs λ extractor outputs, one
//! per λ-bit sub-key, on states indexed by the input.
//!
//! Multi-branch operations take a [`Stream`]: branch `i` draws from
//! `stream.child(i)`, so serial and parallel evaluation agree bit for bit.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bits::{BitString, SeedKey, SeedRole};
use crate::error::{Error, Result};
use crate::extractor::{compliant_config, derive_params, extract, ExtractorParams};
use crate::rng::{uniform_f64, Stream, StreamRng};
use crate::states::{SeededHaar, StateGenerator};
use crate::tomography::{Backend, TomographyConfig};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QprgConfig {
    /// Security parameter; also the seed length.
    pub lambda: usize,
    /// State-length constant: `d = λ^c` in faithful mode.
    pub c: u32,
    /// Explicit dimension for desk-scale runs. `None` means faithful mode.
    pub dim: Option<usize>,
    /// Amplification factor (1 = weak generator).
    pub s: usize,
    pub tomo: TomographyConfig,
    /// Function input length `m(λ)`; defaults to `2λ`.
    pub input_len: Option<usize>,
}

impl QprgConfig {
    /// Faithful configuration with `d = λ^c` and the given tomography.
    pub fn faithful(lambda: usize, c: u32, tomo: TomographyConfig) -> Self {
        QprgConfig { lambda, c, dim: None, s: 1, tomo, input_len: None }
    }

    /// Desk-scale configuration: `d` fixed directly, λ only sets seed length.
    /// Tomography is made compliant with `d`'s parameters (`δ = Δ/r`, and
    /// Hoeffding shots at failure probability `fail_prob` for the
    /// multinomial backend).
    pub fn desk(lambda: usize, dim: usize, backend: Backend, fail_prob: f64) -> Result<Self> {
        let params = derive_params::<f64>(dim)?;
        let tomo = compliant_config(&params, backend, fail_prob)?;
        Ok(QprgConfig { lambda, c: 6, dim: Some(dim), s: 1, tomo, input_len: None })
    }

    pub fn with_s(mut self, s: usize) -> Self {
        self.s = s;
        self
    }

    pub fn is_faithful(&self) -> bool {
        self.dim.is_none()
    }

    pub fn dimension(&self) -> Result<usize> {
        match self.dim {
            Some(d) => Ok(d),
            None => (self.lambda as u128)
                .checked_pow(self.c)
                .filter(|&d| d <= usize::MAX as u128)
                .map(|d| d as usize)
                .ok_or_else(|| Error::InvalidParameter(format!("λ^c = {}^{} overflows", self.lambda, self.c))),
        }
    }

    pub fn input_len(&self) -> usize {
        self.input_len.unwrap_or(2 * self.lambda)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambda == 0 {
            return Err(Error::InvalidParameter("lambda must be positive".into()));
        }
        if self.c < 6 {
            return Err(Error::InvalidParameter(format!("c = {} < 6 gives no stretch", self.c)));
        }
        if self.s == 0 {
            return Err(Error::InvalidParameter("s must be at least 1".into()));
        }
        self.tomo.validate()
    }

    pub fn params(&self) -> Result<ExtractorParams<f64>> {
        derive_params(self.dimension()?)
    }

    /// `ℓ = ⌊d^{1/6}⌋`.
    pub fn output_len(&self) -> Result<usize> {
        Ok(self.params()?.ell)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorOutput {
    pub bits: BitString,
    pub tie_flags: Vec<bool>,
    pub seed_echo: SeedKey,
    #[serde(default)]
    pub under_sampled: bool,
}

fn check_len(what: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::LengthMismatch { what, expected, actual });
    }
    Ok(())
}

/// Weak generator with the default seeded-Haar state source.
pub fn wqprg(seed: &SeedKey, cfg: &QprgConfig, rng: &mut StreamRng) -> Result<GeneratorOutput> {
    wqprg_with(&SeededHaar, seed, cfg, rng)
}

pub fn wqprg_with<G: StateGenerator>(
    gen: &G,
    seed: &SeedKey,
    cfg: &QprgConfig,
    rng: &mut StreamRng,
) -> Result<GeneratorOutput> {
    cfg.validate()?;
    if seed.role != SeedRole::QprgSeed && seed.role != SeedRole::PrsSeed {
        seed.expect_role(SeedRole::QprgSeed)?;
    }
    check_len("generator seed", cfg.lambda, seed.bits.len())?;
    let params = cfg.params()?;
    let state = gen.state::<f64>(&seed.with_role(SeedRole::PrsSeed), params.d)?;
    let out = extract(&state, &cfg.tomo, &params, rng)?;
    Ok(GeneratorOutput { bits: out.bits, tie_flags: out.ties, seed_echo: seed.clone(), under_sampled: out.under_sampled })
}

fn xor_fold(parts: Vec<GeneratorOutput>, seed_echo: SeedKey) -> Result<GeneratorOutput> {
    let mut iter = parts.into_iter();
    let first = iter.next().ok_or(Error::EmptyInput)?;
    let mut bits = first.bits;
    let mut ties = first.tie_flags;
    let mut under = first.under_sampled;
    for p in iter {
        bits = bits.xor(&p.bits)?;
        for (t, u) in ties.iter_mut().zip(&p.tie_flags) {
            *t |= *u;
        }
        under |= p.under_sampled;
    }
    Ok(GeneratorOutput { bits, tie_flags: ties, seed_echo, under_sampled: under })
}

/// XOR of `cfg.s` weak outputs; branch `i` uses `stream.child(i)`.
pub fn sqprg(seeds: &[SeedKey], cfg: &QprgConfig, stream: &Stream) -> Result<GeneratorOutput> {
    if seeds.len() != cfg.s {
        return Err(Error::LengthMismatch { what: "amplified seed list", expected: cfg.s, actual: seeds.len() });
    }
    let parts = seeds
        .par_iter()
        .enumerate()
        .map(|(i, seed)| wqprg(seed, cfg, &mut stream.child(i as u64).rng()))
        .collect::<Result<Vec<_>>>()?;
    let flat = SeedKey::new(BitString::concat(&seeds.iter().map(|s| s.bits.clone()).collect::<Vec<_>>()), SeedRole::AmplifiedSeed);
    xor_fold(parts, flat)
}

/// Amplified generator on a flat `s·λ`-bit key parsed left to right.
pub fn sqprg_flat(key: &SeedKey, cfg: &QprgConfig, stream: &Stream) -> Result<GeneratorOutput> {
    key.expect_role(SeedRole::AmplifiedSeed)?;
    check_len("amplified seed", cfg.s * cfg.lambda, key.bits.len())?;
    let seeds = key.split(cfg.s, SeedRole::QprgSeed)?;
    sqprg(&seeds, cfg, stream)
}

/// One branch of the function: extract from the state indexed by
/// `(sub_key, input)`.
pub fn qprf_branch(sub_key: &SeedKey, input: &BitString, cfg: &QprgConfig, rng: &mut StreamRng) -> Result<GeneratorOutput> {
    cfg.validate()?;
    check_len("function sub-key", cfg.lambda, sub_key.bits.len())?;
    check_len("function input", cfg.input_len(), input.len())?;
    let params = cfg.params()?;
    let state = SeededHaar.indexed_state::<f64>(&sub_key.with_role(SeedRole::PrsSeed), input, params.d)?;
    let out = extract(&state, &cfg.tomo, &params, rng)?;
    Ok(GeneratorOutput { bits: out.bits, tie_flags: out.ties, seed_echo: sub_key.clone(), under_sampled: out.under_sampled })
}

/// The function on a `λ²`-bit key: XOR over its λ branches.
pub fn qprf(key: &SeedKey, input: &BitString, cfg: &QprgConfig, stream: &Stream) -> Result<GeneratorOutput> {
    key.expect_role(SeedRole::QprfKey)?;
    check_len("function key", cfg.lambda * cfg.lambda, key.bits.len())?;
    let subs = key.split(cfg.lambda, SeedRole::PrsSeed)?;
    let parts = subs
        .par_iter()
        .enumerate()
        .map(|(i, k)| qprf_branch(k, input, cfg, &mut stream.child(i as u64).rng()))
        .collect::<Result<Vec<_>>>()?;
    xor_fold(parts, key.clone())
}

/// A seeded procedure whose output is fixed with high probability per seed.
pub trait PseudodetGenerator: Sync {
    fn seed_len(&self) -> usize;
    fn output_len(&self) -> usize;
    fn generate(&self, seed: &BitString, rng: &mut StreamRng) -> Result<BitString>;
}

/// A keyed, input-indexed pseudodeterministic function.
pub trait PseudodetFunction: Sync {
    fn key_len(&self) -> usize;
    fn input_len(&self) -> usize;
    fn output_len(&self) -> usize;
    fn eval(&self, key: &BitString, input: &BitString, rng: &mut StreamRng) -> Result<BitString>;
}

/// The weak generator as a [`PseudodetGenerator`].
#[derive(Clone, Copy, Debug)]
pub struct QuantumPrg {
    pub cfg: QprgConfig,
}

impl PseudodetGenerator for QuantumPrg {
    fn seed_len(&self) -> usize {
        self.cfg.lambda
    }

    fn output_len(&self) -> usize {
        self.cfg.output_len().unwrap_or(0)
    }

    fn generate(&self, seed: &BitString, rng: &mut StreamRng) -> Result<BitString> {
        Ok(wqprg(&SeedKey::new(seed.clone(), SeedRole::QprgSeed), &self.cfg, rng)?.bits)
    }
}

/// A single function branch `F(k_i, x)` with a λ-bit key.
#[derive(Clone, Copy, Debug)]
pub struct QuantumPrf {
    pub cfg: QprgConfig,
}

impl PseudodetFunction for QuantumPrf {
    fn key_len(&self) -> usize {
        self.cfg.lambda
    }

    fn input_len(&self) -> usize {
        self.cfg.input_len()
    }

    fn output_len(&self) -> usize {
        self.cfg.output_len().unwrap_or(0)
    }

    fn eval(&self, key: &BitString, input: &BitString, rng: &mut StreamRng) -> Result<BitString> {
        Ok(qprf_branch(&SeedKey::new(key.clone(), SeedRole::PrsSeed), input, &self.cfg, rng)?.bits)
    }
}

/// Deterministic SHA-256 expansion used by the synthetic generators.
fn expand(domain: &[u8], parts: &[&BitString], len: usize) -> BitString {
    let mut bits = Vec::with_capacity(len);
    let mut counter = 0u64;
    while bits.len() < len {
        let mut h = Sha256::new();
        h.update(domain);
        for p in parts {
            h.update((p.len() as u64).to_le_bytes());
            h.update(p.to_bytes());
        }
        h.update(counter.to_le_bytes());
        for byte in h.finalize() {
            for i in (0..8).rev() {
                if bits.len() < len {
                    bits.push((byte >> i) & 1 == 1);
                }
            }
        }
        counter += 1;
    }
    BitString::new(bits)
}

/// With probability `deviation`, XOR a uniformly random nonzero mask.
fn perturb(canonical: BitString, deviation: f64, rng: &mut StreamRng) -> BitString {
    if canonical.is_empty() || uniform_f64(rng) >= deviation {
        return canonical;
    }
    loop {
        let mask = BitString::random(rng, canonical.len());
        if !mask.is_zero() {
            return &canonical ^ &mask;
        }
    }
}

/// Hash-based generator with an injectable per-call deviation probability.
/// Its canonical output is a fixed function of the seed; each call returns a
/// different string with probability exactly `deviation`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SyntheticPrg {
    pub seed_len: usize,
    pub output_len: usize,
    pub deviation: f64,
}

impl SyntheticPrg {
    pub fn canonical(&self, seed: &BitString) -> BitString {
        expand(b"pdextract/synthetic-prg/v1", &[seed], self.output_len)
    }

    /// Probability that two independent calls on one seed agree.
    pub fn pair_agreement(&self) -> f64 {
        pair_agreement(self.deviation, self.output_len)
    }
}

/// Per-call deviation giving two-call agreement `agreement`, ignoring the
/// `2^{-ℓ}` chance that two deviations pick the same mask.
pub fn deviation_for_agreement(agreement: f64) -> f64 {
    1.0 - agreement.clamp(0.0, 1.0).sqrt()
}

/// `(1−p)² + p²/(2^ℓ − 1)`: both calls canonical, or both pick the same mask.
pub fn pair_agreement(deviation: f64, output_len: usize) -> f64 {
    let masks = 2f64.powi(output_len.min(1000) as i32) - 1.0;
    (1.0 - deviation).powi(2) + deviation * deviation / masks
}

impl PseudodetGenerator for SyntheticPrg {
    fn seed_len(&self) -> usize {
        self.seed_len
    }

    fn output_len(&self) -> usize {
        self.output_len
    }

    fn generate(&self, seed: &BitString, rng: &mut StreamRng) -> Result<BitString> {
        check_len("synthetic seed", self.seed_len, seed.len())?;
        Ok(perturb(self.canonical(seed), self.deviation, rng))
    }
}

/// Function analogue of [`SyntheticPrg`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SyntheticPrf {
    pub key_len: usize,
    pub input_len: usize,
    pub output_len: usize,
    pub deviation: f64,
}

impl SyntheticPrf {
    pub fn canonical(&self, key: &BitString, input: &BitString) -> BitString {
        expand(b"pdextract/synthetic-prf/v1", &[key, input], self.output_len)
    }

    pub fn pair_agreement(&self) -> f64 {
        pair_agreement(self.deviation, self.output_len)
    }
}

impl PseudodetFunction for SyntheticPrf {
    fn key_len(&self) -> usize {
        self.key_len
    }

    fn input_len(&self) -> usize {
        self.input_len
    }

    fn output_len(&self) -> usize {
        self.output_len
    }

    fn eval(&self, key: &BitString, input: &BitString, rng: &mut StreamRng) -> Result<BitString> {
        check_len("synthetic key", self.key_len, key.len())?;
        check_len("synthetic input", self.input_len, input.len())?;
        Ok(perturb(self.canonical(key, input), self.deviation, rng))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seed(bits: &str) -> SeedKey {
        SeedKey::new(bits.parse().unwrap(), SeedRole::QprgSeed)
    }

    #[test]
    fn weak_generator_deterministic_with_exact_backend() {
        let cfg = QprgConfig::faithful(2, 6, TomographyConfig::exact());
        assert_eq!(cfg.dimension().unwrap(), 64);
        let a = wqprg(&seed("10"), &cfg, &mut Stream::root(1).rng()).unwrap();
        let b = wqprg(&seed("10"), &cfg, &mut Stream::root(2).rng()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.bits.len(), 2);
    }

    #[test]
    fn output_length_d4096() {
        let cfg = QprgConfig::faithful(2, 12, TomographyConfig::exact());
        assert_eq!(cfg.output_len().unwrap(), 4);
        let out = wqprg(&seed("01"), &cfg, &mut Stream::root(0).rng()).unwrap();
        assert_eq!(out.bits.len(), 4);
    }

    #[test]
    fn length_law() {
        for lambda in [2usize, 3, 4] {
            for c in [6u32, 12] {
                let cfg = QprgConfig::faithful(lambda, c, TomographyConfig::exact());
                let d = (lambda as u128).pow(c);
                let mut ell = 0u128;
                while (ell + 1).pow(6) <= d {
                    ell += 1;
                }
                assert_eq!(cfg.output_len().unwrap() as u128, ell, "λ={lambda} c={c}");
            }
        }
    }

    #[test]
    fn config_validation() {
        let cfg = QprgConfig::faithful(2, 5, TomographyConfig::exact());
        assert!(cfg.validate().is_err());
        let cfg = QprgConfig::faithful(2, 6, TomographyConfig::exact()).with_s(0);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn seed_length_and_role_checked() {
        let cfg = QprgConfig::faithful(2, 6, TomographyConfig::exact());
        assert!(wqprg(&seed("101"), &cfg, &mut Stream::root(0).rng()).is_err());
        let bad = SeedKey::new("10".parse().unwrap(), SeedRole::QprfKey);
        assert!(matches!(wqprg(&bad, &cfg, &mut Stream::root(0).rng()), Err(Error::RoleMismatch { .. })));
    }

    #[test]
    fn amplified_s1_equals_weak() {
        let cfg = QprgConfig::desk(8, 64, Backend::MultinomialShots, 0.01).unwrap();
        let stream = Stream::root(5);
        let k = SeedKey::new("10110010".parse().unwrap(), SeedRole::QprgSeed);
        let a = sqprg(std::slice::from_ref(&k), &cfg, &stream).unwrap();
        let b = wqprg(&k, &cfg, &mut stream.child(0).rng()).unwrap();
        assert_eq!(a.bits, b.bits);
        assert_eq!(a.tie_flags, b.tie_flags);
    }

    #[test]
    fn duplicated_seeds_cancel() {
        let cfg = QprgConfig::desk(8, 4096, Backend::Exact, 0.01).unwrap().with_s(2);
        let k = SeedKey::new("11110000".parse().unwrap(), SeedRole::QprgSeed);
        let out = sqprg(&[k.clone(), k], &cfg, &Stream::root(0)).unwrap();
        assert!(out.bits.is_zero());
        assert!(sqprg(&[seed("11110000")], &cfg, &Stream::root(0)).is_err());
    }

    #[test]
    fn flat_key_parsed_left_to_right() {
        let cfg = QprgConfig::desk(4, 64, Backend::Exact, 0.01).unwrap().with_s(2);
        let flat = SeedKey::new("00111010".parse().unwrap(), SeedRole::AmplifiedSeed);
        let a = sqprg_flat(&flat, &cfg, &Stream::root(0)).unwrap();
        let b = sqprg(&[seed("0011"), seed("1010")], &cfg, &Stream::root(0)).unwrap();
        assert_eq!(a.bits, b.bits);
    }

    #[test]
    fn qprf_deterministic_and_even_fold_cancels() {
        let cfg = QprgConfig::faithful(2, 6, TomographyConfig::exact());
        let key = SeedKey::new("1011".parse().unwrap(), SeedRole::QprfKey);
        let x: BitString = "0110".parse().unwrap();
        let a = qprf(&key, &x, &cfg, &Stream::root(1)).unwrap();
        let b = qprf(&key, &x, &cfg, &Stream::root(2)).unwrap();
        assert_eq!(a, b);
        let twin = SeedKey::new("1010".parse().unwrap(), SeedRole::QprfKey);
        assert!(qprf(&twin, &x, &cfg, &Stream::root(0)).unwrap().bits.is_zero());
        assert!(qprf(&key, &"01".parse().unwrap(), &cfg, &Stream::root(0)).is_err());
    }

    #[test]
    fn synthetic_generator_deviation_rate() {
        let g = SyntheticPrg { seed_len: 16, output_len: 12, deviation: 0.1 };
        let s: BitString = BitString::from_u64(0xBEEF, 16);
        let canonical = g.canonical(&s);
        let stream = Stream::root(3);
        let n = 20_000;
        let dev = (0..n).filter(|&t| g.generate(&s, &mut stream.child(t).rng()).unwrap() != canonical).count();
        let rate = dev as f64 / n as f64;
        // 0.1 ± 5σ, σ = sqrt(0.09/n).
        assert!((rate - 0.1).abs() < 5.0 * (0.09f64 / n as f64).sqrt());
    }
}
