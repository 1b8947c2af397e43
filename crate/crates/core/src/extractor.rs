//! Block-sum rounding extractor.
//!
//! Given a `d`-dimensional state, sum the first `ℓ·r` diagonal entries in
//! consecutive blocks of `r` and emit one bit per block according to which
//! side of `r/d` the block sum falls. With `r = ⌊d^{2/3}⌋`, `ℓ = ⌊d^{1/6}⌋`,
//! gap `Δ = 1/d` and tomography tolerance `δ = Δ/r`, any state whose block
//! sums all sit more than `Δ` from the threshold rounds identically from any
//! `δ`-accurate diagonal estimate.
//!
//! All rounding functions are generic over [`Scalar`], so they run on `f64`
//! as well as on exact rationals.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::scalar::{from_usize, to_f64, Real, Scalar};
use crate::states::PureState;
use crate::tomography::{snapshot, DiagonalSnapshot, TomographyConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtractorParams<T> {
    pub d: usize,
    /// Output length `ℓ = ⌊d^{1/6}⌋`.
    pub ell: usize,
    /// Block size `r = ⌊d^{2/3}⌋`.
    pub r: usize,
    /// Coordinates consumed, `ℓ·r`.
    pub k_coords: usize,
    /// `Δ = 1/d`.
    pub gap: T,
    /// `δ = Δ/r`, computed from `gap` so the identity holds exactly.
    pub delta: T,
    /// `r/d`.
    pub threshold: T,
    /// Set when `d < 64`, where `ℓ = 1`.
    pub degenerate: bool,
}

/// Largest `x` with `x^p ≤ n`.
fn integer_root(n: u128, p: u32) -> u128 {
    let mut x = (n as f64).powf(1.0 / p as f64).round() as u128 + 1;
    while x > 0 && x.checked_pow(p).is_none_or(|v| v > n) {
        x -= 1;
    }
    while (x + 1).checked_pow(p).is_some_and(|v| v <= n) {
        x += 1;
    }
    x
}

/// Derives all rounding parameters from the dimension with floor semantics.
pub fn derive_params<T: Scalar>(d: usize) -> Result<ExtractorParams<T>> {
    if d < 2 {
        return Err(Error::InvalidDimension(d));
    }
    let ell = integer_root(d as u128, 6) as usize;
    // ⌊d^{2/3}⌋ = ⌊(d²)^{1/3}⌋.
    let r = integer_root((d as u128) * (d as u128), 3) as usize;
    let k_coords = ell * r;
    debug_assert!(k_coords <= d);
    let d_t = from_usize::<T>(d);
    let gap = T::one() / d_t.clone();
    let delta = gap.clone() / from_usize::<T>(r);
    let threshold = from_usize::<T>(r) / d_t;
    Ok(ExtractorParams { d, ell, r, k_coords, gap, delta, threshold, degenerate: d < 64 })
}

impl<T: Scalar> ExtractorParams<T> {
    /// Block sums `q_i` over the first `ℓ·r` entries of `diag`.
    pub fn block_sums(&self, diag: &[T]) -> Result<Vec<T>> {
        if diag.len() < self.k_coords {
            return Err(Error::DimensionMismatch { expected: self.k_coords, actual: diag.len() });
        }
        Ok(diag[..self.k_coords]
            .chunks(self.r)
            .map(|block| block.iter().cloned().fold(T::zero(), |a, b| a + b))
            .collect())
    }
}

/// Bits plus the per-block diagnostics behind them.
#[derive(Clone, Debug, PartialEq)]
pub struct Rounding<T> {
    pub bits: BitString,
    /// `q_i == r/d` exactly; such blocks emit 0.
    pub ties: Vec<bool>,
    pub q: Vec<T>,
}

/// Rounds block sums: 1 above the threshold, 0 below, 0 on a tie.
pub fn round_blocks<T: Scalar>(diag: &[T], params: &ExtractorParams<T>) -> Result<Rounding<T>> {
    let q = params.block_sums(diag)?;
    let bits = q.iter().map(|qi| *qi > params.threshold).collect();
    let ties = q.iter().map(|qi| *qi == params.threshold).collect();
    Ok(Rounding { bits: BitString::new(bits), ties, q })
}

pub fn round_bits<T: Scalar>(snapshot: &DiagonalSnapshot<T>, params: &ExtractorParams<T>) -> Result<BitString> {
    Ok(round_blocks(&snapshot.p, params)?.bits)
}

fn check_dim<T: Real>(state: &PureState<T>, params: &ExtractorParams<T>) -> Result<()> {
    if state.dim() != params.d {
        return Err(Error::DimensionMismatch { expected: params.d, actual: state.dim() });
    }
    Ok(())
}

/// The reference function: rounding applied to the exact diagonal.
pub fn canonical_f<T: Real>(state: &PureState<T>, params: &ExtractorParams<T>) -> Result<BitString> {
    check_dim(state, params)?;
    Ok(round_blocks(&state.probabilities(), params)?.bits)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoodSetReport<T> {
    /// Every block sum is strictly more than `Δ` from `r/d`.
    pub member: bool,
    /// `min_i |q_i − r/d|`.
    pub min_gap: T,
    pub q: Vec<T>,
}

/// Good-set membership computed from a diagonal, generic over the scalar.
pub fn good_set_from_diagonal<T: Scalar>(diag: &[T], params: &ExtractorParams<T>) -> Result<GoodSetReport<T>> {
    let q = params.block_sums(diag)?;
    let min_gap = q
        .iter()
        .map(|qi| (qi.clone() - params.threshold.clone()).abs())
        .reduce(|a, b| if b < a { b } else { a })
        .expect("ell >= 1");
    Ok(GoodSetReport { member: min_gap > params.gap, min_gap, q })
}

pub fn good_set_check<T: Real>(state: &PureState<T>, params: &ExtractorParams<T>) -> Result<GoodSetReport<T>> {
    check_dim(state, params)?;
    good_set_from_diagonal(&state.probabilities(), params)
}

/// Result of one extraction.
#[derive(Clone, Debug, PartialEq)]
pub struct Extraction {
    pub bits: BitString,
    pub ties: Vec<bool>,
    /// The tomography tolerance was looser than `δ = Δ/r`.
    pub soft_config: bool,
    /// The multinomial shot count was below the Hoeffding bound.
    pub under_sampled: bool,
}

/// Snapshot, then round.
pub fn extract<T: Real, R: RngCore + ?Sized>(
    state: &PureState<T>,
    cfg: &TomographyConfig,
    params: &ExtractorParams<T>,
    rng: &mut R,
) -> Result<Extraction> {
    check_dim(state, params)?;
    let snap = snapshot(state, cfg, rng)?;
    let rounded = round_blocks(&snap.p, params)?;
    Ok(Extraction {
        bits: rounded.bits,
        ties: rounded.ties,
        soft_config: cfg.delta > to_f64(params.delta) * (1.0 + 1e-12),
        under_sampled: snap.under_sampled,
    })
}

/// Tomography config matching `params`: tolerance `δ = Δ/r` and, for the
/// multinomial backend, the Hoeffding-sufficient shot count.
pub fn compliant_config<T: Real>(
    params: &ExtractorParams<T>,
    backend: crate::tomography::Backend,
    fail_prob: f64,
) -> Result<TomographyConfig> {
    use crate::tomography::Backend;
    let delta = to_f64(params.delta);
    Ok(match backend {
        Backend::Exact => TomographyConfig { delta, ..TomographyConfig::exact() },
        Backend::BoundedNoise => TomographyConfig { fail_prob, ..TomographyConfig::bounded_noise(delta) },
        Backend::MultinomialShots => TomographyConfig::multinomial_auto(params.d, delta, fail_prob)?,
    })
}

/// Places every entry of each block at `p_j ± δ` pushing the block sum toward
/// the threshold. This is the worst case a `δ`-accurate estimate can reach.
pub fn adversarial_diagonal<T: Scalar>(diag: &[T], params: &ExtractorParams<T>) -> Result<Vec<T>> {
    let q = params.block_sums(diag)?;
    let mut out = diag.to_vec();
    for (i, qi) in q.iter().enumerate() {
        let toward_down = *qi > params.threshold;
        for x in &mut out[i * params.r..(i + 1) * params.r] {
            *x = if toward_down { x.clone() - params.delta.clone() } else { x.clone() + params.delta.clone() };
        }
    }
    Ok(out)
}

/// Counts good blocks whose bit flips between `exact` and `estimate`.
/// Zero whenever `max_i |estimate_i − exact_i| ≤ Δ/r`.
pub fn side_violations<T: Scalar>(exact: &[T], estimate: &[T], params: &ExtractorParams<T>) -> Result<usize> {
    let a = round_blocks(exact, params)?;
    let b = round_blocks(estimate, params)?;
    Ok(a.q
        .iter()
        .zip(a.bits.bits().iter().zip(b.bits.bits()))
        .filter(|(qi, (x, y))| ((*qi).clone() - params.threshold.clone()).abs() > params.gap && x != y)
        .count())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;
    use crate::states::sample_haar;
    use num_rational::BigRational;
    use num_traits::FromPrimitive;

    fn bits(s: &str) -> BitString {
        s.parse().unwrap()
    }

    /// Independent oracle: brute-force floor roots by linear scan.
    fn floor_root_scan(n: u128, p: u32) -> u128 {
        let mut x = 0u128;
        while (x + 1).pow(p) <= n {
            x += 1;
        }
        x
    }

    #[test]
    fn params_d64() {
        let p = derive_params::<f64>(64).unwrap();
        assert_eq!((p.ell, p.r, p.k_coords), (2, 16, 32));
        assert_eq!(p.gap, 1.0 / 64.0);
        assert_eq!(p.threshold, 0.25);
        assert_eq!(p.delta, 1.0 / 1024.0);
        assert!(!p.degenerate);
    }

    #[test]
    fn params_d4096_and_d100() {
        let p = derive_params::<f64>(4096).unwrap();
        assert_eq!((p.ell, p.r, p.k_coords), (4, 256, 1024));
        assert_eq!(p.threshold, 1.0 / 16.0);
        let p = derive_params::<f64>(100).unwrap();
        assert_eq!((p.ell, p.r, p.k_coords), (2, 21, 42));
    }

    #[test]
    fn params_floor_oracle() {
        for d in 2..5000usize {
            let p = derive_params::<f64>(d).unwrap();
            assert_eq!(p.ell as u128, floor_root_scan(d as u128, 6), "ell at d={d}");
            assert_eq!(p.r as u128, floor_root_scan((d * d) as u128, 3), "r at d={d}");
            assert!(p.k_coords <= d);
        }
        assert!(derive_params::<f64>(1).is_err());
        assert!(derive_params::<f64>(63).unwrap().degenerate);
    }

    #[test]
    fn delta_identity_is_exact_in_rationals() {
        let p = derive_params::<BigRational>(100).unwrap();
        assert_eq!(p.delta.clone() * BigRational::from_usize(p.r).unwrap(), p.gap);
        assert_eq!(p.gap, BigRational::new(1.into(), 100.into()));
    }

    #[test]
    fn round_examples_d64() {
        let p = derive_params::<f64>(64).unwrap();
        let e1 = PureState::<f64>::basis(64, 0).unwrap();
        assert_eq!(canonical_f(&e1, &p).unwrap(), bits("10"));
        let tail = PureState::<f64>::uniform_on(64, 32..64).unwrap();
        assert_eq!(canonical_f(&tail, &p).unwrap(), bits("00"));
        let head = PureState::<f64>::uniform_on(64, 0..32).unwrap();
        assert_eq!(canonical_f(&head, &p).unwrap(), bits("11"));
    }

    #[test]
    fn tie_rule_outputs_zero() {
        // Exact rationals so the uniform superposition ties exactly.
        let p = derive_params::<BigRational>(64).unwrap();
        let diag = vec![BigRational::new(1.into(), 64.into()); 64];
        let r = round_blocks(&diag, &p).unwrap();
        assert_eq!(r.bits, bits("00"));
        assert_eq!(r.ties, vec![true, true]);
        let pf = derive_params::<f64>(64).unwrap();
        let u = PureState::<f64>::uniform(64).unwrap();
        assert_eq!(canonical_f(&u, &pf).unwrap(), bits("00"));
    }

    #[test]
    fn round_rejects_short_snapshot() {
        let p = derive_params::<f64>(64).unwrap();
        let snap = DiagonalSnapshot::new(vec![0.1; 31], 0.0);
        assert!(matches!(round_bits(&snap, &p), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn good_set_examples() {
        let p = derive_params::<f64>(64).unwrap();
        let e1 = PureState::<f64>::basis(64, 0).unwrap();
        let g = good_set_check(&e1, &p).unwrap();
        assert!(g.member);
        assert_eq!(g.q, vec![1.0, 0.0]);
        assert!((g.min_gap - 0.25).abs() < 1e-15);
        let u = PureState::<f64>::uniform(64).unwrap();
        let g = good_set_check(&u, &p).unwrap();
        assert!(!g.member);
        assert!(g.min_gap < 1e-12);
    }

    #[test]
    fn extract_exact_backend_matches_canonical() {
        let p = derive_params::<f64>(64).unwrap();
        let mut rng = Stream::root(3).rng();
        for _ in 0..100 {
            let s: PureState<f64> = sample_haar(64, &mut rng).unwrap();
            let out = extract(&s, &TomographyConfig::exact(), &p, &mut rng).unwrap();
            assert_eq!(out.bits, canonical_f(&s, &p).unwrap());
        }
    }

    #[test]
    fn extract_basis_multinomial_always_10() {
        let p = derive_params::<f64>(64).unwrap();
        let cfg = compliant_config(&p, crate::tomography::Backend::MultinomialShots, 0.01).unwrap();
        let e1 = PureState::<f64>::basis(64, 0).unwrap();
        let stream = Stream::root(4);
        for t in 0..1000 {
            let out = extract(&e1, &cfg, &p, &mut stream.child(t).rng()).unwrap();
            assert_eq!(out.bits, bits("10"));
            assert!(!out.soft_config && !out.under_sampled);
        }
    }

    #[test]
    fn soft_config_flagged() {
        let p = derive_params::<f64>(64).unwrap();
        let e1 = PureState::<f64>::basis(64, 0).unwrap();
        let mut rng = Stream::root(1).rng();
        let out = extract(&e1, &TomographyConfig::bounded_noise(0.1), &p, &mut rng).unwrap();
        assert!(out.soft_config);
    }

    #[test]
    fn adversarial_noise_never_flips_good_blocks_f64() {
        let mut rng = Stream::root(21).rng();
        for d in [64usize, 100, 729] {
            let p = derive_params::<f64>(d).unwrap();
            for _ in 0..300 {
                let s: PureState<f64> = sample_haar(d, &mut rng).unwrap();
                let diag = s.probabilities();
                let adv = adversarial_diagonal(&diag, &p).unwrap();
                assert_eq!(side_violations(&diag, &adv, &p).unwrap(), 0);
            }
        }
    }

    #[test]
    fn adversarial_noise_at_the_margin_exact() {
        // Block sums placed an arbitrarily small amount beyond r/d ± Δ.
        let p = derive_params::<BigRational>(64).unwrap();
        let eps = BigRational::new(1.into(), BigRational::from_u64(1 << 40).unwrap().to_integer());
        let r = BigRational::from_usize(p.r).unwrap();
        let above = (p.threshold.clone() + p.gap.clone() + eps.clone()) / r.clone();
        let below = (p.threshold.clone() - p.gap.clone() - eps) / r;
        let mut diag = vec![above; 16];
        diag.extend(vec![below; 16]);
        let rest: BigRational = BigRational::from_usize(1).unwrap() - diag.iter().cloned().fold(BigRational::from_usize(0).unwrap(), |a, b| a + b);
        diag.extend(vec![rest / BigRational::from_usize(32).unwrap(); 32]);
        let g = good_set_from_diagonal(&diag, &p).unwrap();
        assert!(g.member);
        let adv = adversarial_diagonal(&diag, &p).unwrap();
        assert_eq!(side_violations(&diag, &adv, &p).unwrap(), 0);
        assert_eq!(round_blocks(&adv, &p).unwrap().bits, bits("10"));
    }
}
