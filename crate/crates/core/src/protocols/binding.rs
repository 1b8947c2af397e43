//! Exact binding analysis over toy generators whose per-key output
//! distributions are known.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::commitment::{CommitTranscript, Commitment, Decommitment, Verdict};
use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::generators::PseudodetGenerator;
use crate::rng::{uniform_f64, Stream, StreamRng};
use crate::stats::binomial_tail_ge;

pub const MAX_KEY_BITS: usize = 12;

/// Index of the first maximal entry. Outcomes are indexed in lexicographic
/// order, so this is the lexicographically-first argmax.
pub fn lex_first_argmax(p: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &x) in p.iter().enumerate() {
        if best.is_none_or(|b| x > p[b]) {
            best = Some(i);
        }
    }
    best
}

/// `Σ pᵢqᵢ` when the two vectors have different lexicographically-first
/// argmaxes, `None` otherwise.
pub fn distinct_argmax_inner(p: &[f64], q: &[f64]) -> Option<f64> {
    if p.len() != q.len() || lex_first_argmax(p)? == lex_first_argmax(q)? {
        return None;
    }
    Some(p.iter().zip(q).map(|(a, b)| a * b).sum())
}

/// A keyed map with an explicit output distribution for every key.
/// Outputs are `out_bits`-bit strings stored as integers; supports are kept
/// sorted so integer order matches lexicographic order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToyGenerator {
    key_bits: usize,
    out_bits: usize,
    dists: Vec<Vec<(u64, f64)>>,
}

impl ToyGenerator {
    pub fn new(key_bits: usize, out_bits: usize, mut dists: Vec<Vec<(u64, f64)>>) -> Result<Self> {
        if key_bits > MAX_KEY_BITS {
            return Err(Error::KeySpaceTooLarge(key_bits));
        }
        if out_bits == 0 || out_bits > 63 {
            return Err(Error::InvalidParameter(format!("output width {out_bits} not in 1..=63")));
        }
        if dists.len() != 1 << key_bits {
            return Err(Error::LengthMismatch { what: "toy distributions", expected: 1 << key_bits, actual: dists.len() });
        }
        for (k, d) in dists.iter_mut().enumerate() {
            d.sort_by_key(|&(y, _)| y);
            let total: f64 = d.iter().map(|&(_, p)| p).sum();
            let ok = !d.is_empty()
                && (total - 1.0).abs() < 1e-9
                && d.iter().all(|&(y, p)| p > 0.0 && y >> out_bits == 0)
                && d.windows(2).all(|w| w[0].0 != w[1].0);
            if !ok {
                return Err(Error::InvalidParameter(format!("key {k} has an invalid output distribution")));
            }
        }
        Ok(ToyGenerator { key_bits, out_bits, dists })
    }

    /// Every key maps to one uniformly random output.
    pub fn deterministic(key_bits: usize, out_bits: usize, stream: &Stream) -> Result<Self> {
        let mut rng = stream.rng();
        let dists = (0..1usize << key_bits).map(|_| vec![(random_output(&mut rng, out_bits), 1.0)]).collect();
        Self::new(key_bits, out_bits, dists)
    }

    /// Supports of 1 to `max_support` random outputs with flat-Dirichlet
    /// weights.
    pub fn random(key_bits: usize, out_bits: usize, max_support: usize, stream: &Stream) -> Result<Self> {
        let mut rng = stream.rng();
        let dists = (0..1usize << key_bits)
            .map(|_| {
                let size = 1 + (rng_u64(&mut rng) % max_support.max(1) as u64) as usize;
                let outs = distinct_outputs(&mut rng, out_bits, size);
                let w: Vec<f64> = (0..outs.len()).map(|_| -(1.0 - uniform_f64(&mut rng)).ln()).collect();
                let total: f64 = w.iter().sum();
                outs.into_iter().zip(w).map(|(y, x)| (y, x / total)).collect()
            })
            .collect();
        Self::new(key_bits, out_bits, dists)
    }

    /// Each key has one modal output of probability `modal` and spreads the
    /// rest over `extra` other outputs.
    pub fn pseudodeterministic(key_bits: usize, out_bits: usize, modal: f64, extra: usize, stream: &Stream) -> Result<Self> {
        if !(0.0..=1.0).contains(&modal) || (modal < 1.0 && extra == 0) {
            return Err(Error::InvalidParameter(format!("modal probability {modal} with {extra} extra outputs")));
        }
        let mut rng = stream.rng();
        let dists = (0..1usize << key_bits)
            .map(|_| {
                let outs = distinct_outputs(&mut rng, out_bits, 1 + extra);
                let rest = (1.0 - modal) / extra.max(1) as f64;
                outs.into_iter()
                    .enumerate()
                    .map(|(i, y)| (y, if i == 0 { modal } else { rest }))
                    .filter(|&(_, p)| p > 0.0)
                    .collect()
            })
            .collect();
        Self::new(key_bits, out_bits, dists)
    }

    /// Two-point supports with probabilities `½ ± eps`; `eps = 0` gives
    /// exact ties resolved by the lexicographic rule.
    pub fn near_tie(key_bits: usize, out_bits: usize, eps: f64, stream: &Stream) -> Result<Self> {
        let mut rng = stream.rng();
        let dists = (0..1usize << key_bits)
            .map(|_| {
                let outs = distinct_outputs(&mut rng, out_bits, 2);
                let first = if rng_u64(&mut rng) & 1 == 0 { 0.5 + eps } else { 0.5 - eps };
                vec![(outs[0], first), (outs[1], 1.0 - first)]
            })
            .collect();
        Self::new(key_bits, out_bits, dists)
    }

    pub fn key_bits(&self) -> usize {
        self.key_bits
    }

    pub fn out_bits(&self) -> usize {
        self.out_bits
    }

    pub fn keys(&self) -> usize {
        self.dists.len()
    }

    pub fn dist(&self, k: u64) -> &[(u64, f64)] {
        &self.dists[k as usize]
    }

    pub fn prob(&self, k: u64, y: u64) -> f64 {
        let d = self.dist(k);
        d.binary_search_by_key(&y, |&(z, _)| z).map_or(0.0, |i| d[i].1)
    }

    /// `F(k)`: the lexicographically-first most likely output.
    pub fn canonical(&self, k: u64) -> u64 {
        let d = self.dist(k);
        let p: Vec<f64> = d.iter().map(|&(_, p)| p).collect();
        d[lex_first_argmax(&p).expect("nonempty support")].0
    }

    pub fn modal_prob(&self, k: u64) -> f64 {
        self.prob(k, self.canonical(k))
    }

    fn canonical_index(&self) -> HashMap<u64, Vec<u64>> {
        let mut idx: HashMap<u64, Vec<u64>> = HashMap::new();
        for k in 0..self.keys() as u64 {
            idx.entry(self.canonical(k)).or_default().push(k);
        }
        idx
    }

    /// `r ∈ Bad` iff `r = F(k) ⊕ F(k′)` for some keys.
    pub fn in_bad(&self, r: u64) -> bool {
        let idx = self.canonical_index();
        (0..self.keys() as u64).any(|k| idx.contains_key(&(self.canonical(k) ^ r)))
    }

    fn output_index(&self) -> HashMap<u64, Vec<(u64, f64)>> {
        let mut idx: HashMap<u64, Vec<(u64, f64)>> = HashMap::new();
        for k in 0..self.keys() as u64 {
            for &(y, p) in self.dist(k) {
                idx.entry(y).or_default().push((k, p));
            }
        }
        idx
    }

    /// Per output, the largest probability any key assigns to it and the
    /// smallest key achieving it.
    fn best_key_per_output(&self) -> HashMap<u64, (u64, f64)> {
        let mut best: HashMap<u64, (u64, f64)> = HashMap::new();
        for k in 0..self.keys() as u64 {
            for &(y, p) in self.dist(k) {
                let e = best.entry(y).or_insert((k, p));
                if p > e.1 {
                    *e = (k, p);
                }
            }
        }
        best
    }

    /// The committer's best single-block strategy for opening one
    /// commitment both ways under receiver string `r`, over `blocks` blocks.
    pub fn best_collision(&self, r: u64, blocks: usize) -> BestCollision {
        self.best_collision_with(&self.best_key_per_output(), r, blocks)
    }

    fn best_collision_with(&self, best: &HashMap<u64, (u64, f64)>, r: u64, blocks: usize) -> BestCollision {
        let need = (2 * blocks).div_ceil(3) as u64;
        let tail = |x: f64| binomial_tail_ge(blocks as u64, x, need);
        let mut out = BestCollision { r, k: 0, c: self.canonical(0), k_prime: 0, a: 0.0, b: 0.0, probability: 0.0 };
        for k in 0..self.keys() as u64 {
            for &(c, a) in self.dist(k) {
                let Some(&(k_prime, b)) = best.get(&(c ^ r)) else { continue };
                let prob = tail(a) * tail(b);
                if prob > out.probability {
                    out = BestCollision { r, k, c, k_prime, a, b, probability: prob };
                }
            }
        }
        out
    }

    /// Mean over uniform `r` of the best-collision double-open probability,
    /// split by membership in Bad.
    pub fn double_open_profile(&self, blocks: usize) -> DoubleOpenProfile {
        let best = self.best_key_per_output();
        let canon = self.canonical_index();
        let rows: Vec<(bool, f64)> = (0..1u64 << self.out_bits)
            .into_par_iter()
            .map(|r| {
                let bad = (0..self.keys() as u64).any(|k| canon.contains_key(&(self.canonical(k) ^ r)));
                (bad, self.best_collision_with(&best, r, blocks).probability)
            })
            .collect();
        let total = rows.len() as f64;
        let mut profile = DoubleOpenProfile { blocks, ..Default::default() };
        for (bad, p) in rows {
            profile.mean += p / total;
            if bad {
                profile.bad_count += 1;
            } else {
                profile.max_outside_bad = profile.max_outside_bad.max(p);
            }
        }
        profile.bad_fraction = profile.bad_count as f64 / total;
        profile
    }

    /// Runs one double-open attempt through the real commitment and
    /// receiver: commit `c` in every block, then open with `k` as 0 and
    /// with `k′` as 1. Returns whether both openings are accepted.
    pub fn simulate_double_open(&self, strategy: &BestCollision, blocks: usize, stream: &Stream) -> Result<bool> {
        let scheme = Commitment::new(self, blocks)?;
        let bits = |v: u64| BitString::from_u64(v, self.out_bits);
        let seeds = |k: u64| vec![BitString::from_u64(k, self.key_bits); blocks];
        let com = vec![bits(strategy.c); blocks];
        let open = |bit: bool, k: u64, s: &Stream| -> Result<Verdict> {
            let mut t = CommitTranscript {
                r: bits(strategy.r),
                com: com.clone(),
                decommit: Some(Decommitment { bit, seeds: seeds(k) }),
                verdict: None,
                matches: None,
            };
            scheme.reveal_verify(&mut t, s)
        };
        Ok(open(false, strategy.k, &stream.child(0))? == Verdict::Zero
            && open(true, strategy.k_prime, &stream.child(1))? == Verdict::One)
    }
}

impl PseudodetGenerator for ToyGenerator {
    fn seed_len(&self) -> usize {
        self.key_bits
    }

    fn output_len(&self) -> usize {
        self.out_bits
    }

    fn generate(&self, seed: &BitString, rng: &mut StreamRng) -> Result<BitString> {
        if seed.len() != self.key_bits {
            return Err(Error::LengthMismatch { what: "toy seed", expected: self.key_bits, actual: seed.len() });
        }
        let d = self.dist(seed.to_u64());
        let u = uniform_f64(rng);
        let mut acc = 0.0;
        for &(y, p) in d {
            acc += p;
            if u < acc {
                return Ok(BitString::from_u64(y, self.out_bits));
            }
        }
        Ok(BitString::from_u64(d[d.len() - 1].0, self.out_bits))
    }
}

fn rng_u64(rng: &mut StreamRng) -> u64 {
    rand::RngCore::next_u64(rng)
}

fn random_output(rng: &mut StreamRng, out_bits: usize) -> u64 {
    rng_u64(rng) >> (64 - out_bits)
}

fn distinct_outputs(rng: &mut StreamRng, out_bits: usize, count: usize) -> Vec<u64> {
    let count = count.min(1 << out_bits.min(20));
    let mut outs: Vec<u64> = Vec::with_capacity(count);
    while outs.len() < count {
        let y = random_output(rng, out_bits);
        if !outs.contains(&y) {
            outs.push(y);
        }
    }
    outs
}

/// A committer strategy: commit `c` (a possible output of `G(k)`) and open
/// it as 0 with `k` or as 1 with `k′`, where `c ⊕ r` is likeliest under `k′`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BestCollision {
    pub r: u64,
    pub k: u64,
    pub c: u64,
    pub k_prime: u64,
    /// `Pr[G(k) = c]`
    pub a: f64,
    /// `Pr[G(k′) = c ⊕ r]`
    pub b: f64,
    /// Probability that both openings are accepted.
    pub probability: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DoubleOpenProfile {
    pub blocks: usize,
    pub mean: f64,
    pub bad_count: u64,
    pub bad_fraction: f64,
    pub max_outside_bad: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BindingReport {
    pub r: u64,
    /// `max_{k,k′} Pr[G(k) ⊕ G(k′) = r]`
    pub max_prob: f64,
    pub argmax: (u64, u64),
    pub in_bad: bool,
}

/// Exact `max_{k,k′} Pr[G(k) ⊕ G(k′) = r]` by convolving the per-key
/// distributions. Ties keep the lexicographically smallest `(k, k′)`.
pub fn binding_search(gen: &ToyGenerator, r: u64) -> Result<BindingReport> {
    if gen.key_bits > MAX_KEY_BITS {
        return Err(Error::KeySpaceTooLarge(gen.key_bits));
    }
    let idx = gen.output_index();
    let per_key: Vec<(u64, u64, f64)> = (0..gen.keys() as u64)
        .into_par_iter()
        .map(|k| {
            let mut acc: HashMap<u64, f64> = HashMap::new();
            for &(z, p) in gen.dist(k) {
                if let Some(hits) = idx.get(&(z ^ r)) {
                    for &(k2, q) in hits {
                        *acc.entry(k2).or_default() += p * q;
                    }
                }
            }
            let mut best = (k, 0u64, 0.0f64);
            for (k2, v) in acc {
                if v > best.2 || (v == best.2 && k2 < best.1) {
                    best = (k, k2, v);
                }
            }
            best
        })
        .collect();
    let (k, k2, max_prob) = per_key.into_iter().fold((0, 0, 0.0), |b, x| if x.2 > b.2 { x } else { b });
    Ok(BindingReport { r, max_prob, argmax: (k, k2), in_bad: gen.in_bad(r) })
}

/// The set `Bad = {F(k) ⊕ F(k′)}`, sorted.
pub fn bad_set(gen: &ToyGenerator) -> Result<Vec<u64>> {
    if gen.key_bits > MAX_KEY_BITS {
        return Err(Error::KeySpaceTooLarge(gen.key_bits));
    }
    let mut canon: Vec<u64> = (0..gen.keys() as u64).map(|k| gen.canonical(k)).collect();
    canon.sort_unstable();
    canon.dedup();
    let mut bad: Vec<u64> = canon.iter().flat_map(|a| canon.iter().map(move |b| a ^ b)).collect();
    bad.sort_unstable();
    bad.dedup();
    Ok(bad)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_prefers_first() {
        assert_eq!(lex_first_argmax(&[0.5, 0.5]), Some(0));
        assert_eq!(lex_first_argmax(&[0.2, 0.3, 0.3, 0.2]), Some(1));
        assert_eq!(lex_first_argmax(&[]), None);
        assert_eq!(distinct_argmax_inner(&[0.5, 0.5], &[0.5, 0.5]), None);
        assert_eq!(distinct_argmax_inner(&[0.6, 0.4], &[0.4, 0.6]), Some(0.48));
    }

    #[test]
    fn deterministic_generator_never_collides_off_bad() {
        let g = ToyGenerator::deterministic(4, 12, &Stream::root(1)).unwrap();
        let bad = bad_set(&g).unwrap();
        assert!(bad.len() <= 1 << 8);
        for r in 0..1u64 << 12 {
            let rep = binding_search(&g, r).unwrap();
            assert_eq!(rep.in_bad, bad.binary_search(&r).is_ok());
            if !rep.in_bad {
                assert_eq!(rep.max_prob, 0.0);
            } else {
                assert_eq!(rep.max_prob, 1.0);
            }
        }
    }

    #[test]
    fn key_space_limit() {
        let dists = vec![vec![(0u64, 1.0)]; 1 << 13];
        assert_eq!(ToyGenerator::new(13, 8, dists).unwrap_err(), Error::KeySpaceTooLarge(13));
    }

    #[test]
    fn invalid_distributions_rejected() {
        assert!(ToyGenerator::new(1, 4, vec![vec![(0, 0.5)], vec![(1, 1.0)]]).is_err());
        assert!(ToyGenerator::new(1, 4, vec![vec![(16, 1.0)], vec![(1, 1.0)]]).is_err());
        assert!(ToyGenerator::new(1, 4, vec![vec![(3, 0.5), (3, 0.5)], vec![(1, 1.0)]]).is_err());
    }

    #[test]
    fn canonical_breaks_ties_lexicographically() {
        let g = ToyGenerator::new(1, 4, vec![vec![(9, 0.5), (2, 0.5)], vec![(1, 1.0)]]).unwrap();
        assert_eq!(g.canonical(0), 2);
        assert_eq!(g.prob(0, 9), 0.5);
        assert_eq!(g.prob(0, 3), 0.0);
    }

    #[test]
    fn sampling_follows_distribution() {
        let g = ToyGenerator::new(1, 4, vec![vec![(1, 0.25), (2, 0.75)], vec![(5, 1.0)]]).unwrap();
        let mut rng = Stream::root(2).rng();
        let seed = BitString::from_u64(0, 1);
        let n = 20_000;
        let twos = (0..n).filter(|_| g.generate(&seed, &mut rng).unwrap().to_u64() == 2).count();
        let sd = (0.75f64 * 0.25 / n as f64).sqrt();
        assert!((twos as f64 / n as f64 - 0.75).abs() < 4.0 * sd);
    }
}
