//! Classical snapshots of a pure state's computational-basis diagonal.
//!
//! Three backends:
//! - `exact`: `p̂_i = |α_i|^2`.
//! - `bounded-noise`: uniform noise of half-width `δ/2` per entry, then
//!   Euclidean projection onto the probability simplex. The projection shift
//!   lies between the smallest and largest noise sample, so the final error
//!   satisfies `max_i |p̂_i − p_i| ≤ δ`.
//! - `multinomial-shots`: one multinomial draw of `shots` basis measurements,
//!   `p̂ = counts / shots`. With `shots ≥ ln(2d/fail_prob) / (2δ²)`,
//!   Hoeffding plus a union bound give `Pr[max_i |p̂_i − p_i| > δ] ≤ fail_prob`.

use std::fmt::Write as _;

use num_complex::Complex;
use num_traits::{Float, Zero};
use rand::RngCore;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{gaussian_pair, uniform_f64};
use crate::scalar::{from_f64, from_u64, to_f64, Real, Scalar};
use crate::states::{hermitian_eigenvalues, DensityMatrix, PureState};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    Exact,
    BoundedNoise,
    MultinomialShots,
}

impl std::str::FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Backend::Exact),
            "bounded-noise" | "noise" => Ok(Backend::BoundedNoise),
            "multinomial-shots" | "multinomial" | "shots" => Ok(Backend::MultinomialShots),
            other => Err(Error::Parse(format!("unknown backend {other:?}"))),
        }
    }
}

impl std::fmt::Display for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Backend::Exact => "exact",
            Backend::BoundedNoise => "bounded-noise",
            Backend::MultinomialShots => "multinomial-shots",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TomographyConfig {
    pub backend: Backend,
    /// Per-entry accuracy target for the diagonal.
    pub delta: f64,
    /// Measurement count; used only by the multinomial backend.
    pub shots: u64,
    pub fail_prob: f64,
}

impl TomographyConfig {
    pub fn exact() -> Self {
        TomographyConfig { backend: Backend::Exact, delta: 1.0, shots: 0, fail_prob: 0.01 }
    }

    pub fn bounded_noise(delta: f64) -> Self {
        TomographyConfig { backend: Backend::BoundedNoise, delta, shots: 0, fail_prob: 0.01 }
    }

    pub fn multinomial(delta: f64, shots: u64, fail_prob: f64) -> Self {
        TomographyConfig { backend: Backend::MultinomialShots, delta, shots, fail_prob }
    }

    /// Multinomial backend with the Hoeffding-sufficient shot count.
    pub fn multinomial_auto(dim: usize, delta: f64, fail_prob: f64) -> Result<Self> {
        Ok(Self::multinomial(delta, required_shots(dim, delta, fail_prob)?, fail_prob))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(Error::InvalidParameter(format!("delta {} outside (0, 1]", self.delta)));
        }
        if !(self.fail_prob > 0.0 && self.fail_prob < 1.0) {
            return Err(Error::InvalidParameter(format!("fail_prob {} outside (0, 1)", self.fail_prob)));
        }
        if self.backend == Backend::MultinomialShots && self.shots == 0 {
            return Err(Error::InvalidParameter("multinomial backend needs shots > 0".into()));
        }
        Ok(())
    }
}

/// `⌈ln(2·dim/fail_prob) / (2·delta²)⌉`.
pub fn required_shots(dim: usize, delta: f64, fail_prob: f64) -> Result<u64> {
    if dim == 0 {
        return Err(Error::InvalidParameter("dim must be positive".into()));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::InvalidParameter(format!("delta {delta} outside (0, 1]")));
    }
    if !(fail_prob > 0.0 && fail_prob < 1.0) {
        return Err(Error::InvalidParameter(format!("fail_prob {fail_prob} outside (0, 1)")));
    }
    let shots = ((2.0 * dim as f64 / fail_prob).ln() / (2.0 * delta * delta)).ceil();
    if shots >= u64::MAX as f64 {
        return Err(Error::InvalidParameter("shot count overflows u64".into()));
    }
    Ok((shots as u64).max(1))
}

/// Estimated diagonal `p̂_1..p̂_d` with the accuracy it was produced for.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagonalSnapshot<T> {
    pub p: Vec<T>,
    pub delta: f64,
    /// Set when a multinomial snapshot used fewer shots than the Hoeffding
    /// bound requires.
    #[serde(default)]
    pub under_sampled: bool,
}

impl<T: Scalar> DiagonalSnapshot<T> {
    pub fn new(p: Vec<T>, delta: f64) -> Self {
        DiagonalSnapshot { p, delta, under_sampled: false }
    }

    pub fn dim(&self) -> usize {
        self.p.len()
    }

    /// `max_i |p̂_i − reference_i|`.
    pub fn max_error(&self, reference: &[T]) -> Result<T> {
        if reference.len() != self.p.len() {
            return Err(Error::DimensionMismatch { expected: self.p.len(), actual: reference.len() });
        }
        Ok(self.p.iter().zip(reference).fold(T::zero(), |acc, (a, b)| {
            let e = (a.clone() - b.clone()).abs();
            if e > acc {
                e
            } else {
                acc
            }
        }))
    }
}

impl<T: Real> DiagonalSnapshot<T> {
    /// `index,value` rows with a header, RFC 4180.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,value\n");
        for (i, v) in self.p.iter().enumerate() {
            let _ = writeln!(out, "{},{}", i, to_f64(*v));
        }
        out
    }
}

/// Draws a diagonal snapshot of `state`.
pub fn snapshot<T: Real, R: RngCore + ?Sized>(
    state: &PureState<T>,
    cfg: &TomographyConfig,
    rng: &mut R,
) -> Result<DiagonalSnapshot<T>> {
    cfg.validate()?;
    let p = state.probabilities();
    match cfg.backend {
        Backend::Exact => Ok(DiagonalSnapshot::new(p, cfg.delta)),
        Backend::BoundedNoise => {
            let half = cfg.delta / 2.0;
            let noisy: Vec<T> = p
                .iter()
                .map(|&x| x + from_f64::<T>((2.0 * uniform_f64(rng) - 1.0) * half))
                .collect();
            Ok(DiagonalSnapshot::new(project_to_simplex(&noisy), cfg.delta))
        }
        Backend::MultinomialShots => {
            let probs: Vec<f64> = p.iter().map(|&x| to_f64(x)).collect();
            let counts = multinomial_counts(&probs, cfg.shots, rng);
            let n = from_u64::<T>(cfg.shots);
            let mut snap = DiagonalSnapshot::new(counts.iter().map(|&c| from_u64::<T>(c) / n.clone()).collect(), cfg.delta);
            snap.under_sampled = cfg.shots < required_shots(state.dim(), cfg.delta, cfg.fail_prob)?;
            Ok(snap)
        }
    }
}

/// One multinomial draw by sequential conditional binomials; `O(d)` work
/// regardless of `shots`.
pub fn multinomial_counts<R: RngCore + ?Sized>(probs: &[f64], shots: u64, rng: &mut R) -> Vec<u64> {
    let mut counts = vec![0u64; probs.len()];
    let mut remaining = shots;
    let mut mass = 1.0f64;
    let last = probs.len().saturating_sub(1);
    for (i, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if i == last {
            counts[i] = remaining;
            break;
        }
        let cond = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 0.0 };
        let x = if cond >= 1.0 {
            remaining
        } else if cond <= 0.0 {
            0
        } else {
            Binomial::new(remaining, cond).expect("valid binomial").sample(&mut RngAdapter(rng))
        };
        counts[i] = x;
        remaining -= x;
        mass -= p;
    }
    counts
}

/// Lets `rand_distr` draw from a `?Sized` generator.
struct RngAdapter<'a, R: RngCore + ?Sized>(&'a mut R);

impl<R: RngCore + ?Sized> RngCore for RngAdapter<'_, R> {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }
    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }
    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.0.fill_bytes(dst)
    }
}

/// Euclidean projection onto `{x : x_i ≥ 0, Σ x_i = 1}` (sort-and-threshold).
pub fn project_to_simplex<T: Real>(v: &[T]) -> Vec<T> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite input"));
    let mut cumsum = T::zero();
    let mut tau = T::zero();
    for (i, &x) in sorted.iter().enumerate() {
        cumsum = cumsum + x;
        let candidate = (cumsum - T::one()) / from_u64::<T>(i as u64 + 1);
        if x - candidate > T::zero() {
            tau = candidate;
        }
    }
    v.iter().map(|&x| (x - tau).max(T::zero())).collect()
}

/// Full-matrix estimate with trace-distance error at most `δ`.
///
/// Exact backend returns `|ψ⟩⟨ψ|`. Bounded-noise adds a random traceless
/// Hermitian perturbation `E` scaled so `½‖E‖₁ ≤ δ`; the estimate need not
/// be positive semidefinite. Shot simulation of off-diagonals is not offered.
pub fn matrix_snapshot<T: Real, R: RngCore + ?Sized>(
    state: &PureState<T>,
    cfg: &TomographyConfig,
    rng: &mut R,
) -> Result<DensityMatrix<T>> {
    cfg.validate()?;
    let rho = state.density_matrix();
    match cfg.backend {
        Backend::Exact => Ok(rho),
        Backend::MultinomialShots => Err(Error::InvalidParameter(
            "matrix snapshots are only available for the exact and bounded-noise backends".into(),
        )),
        Backend::BoundedNoise => {
            let d = state.dim();
            let mut e = vec![Complex::<T>::zero(); d * d];
            for i in 0..d {
                for j in i..d {
                    let (a, b) = gaussian_pair(rng);
                    let z = if i == j {
                        Complex::new(from_f64(a), T::zero())
                    } else {
                        Complex::new(from_f64(a), from_f64(b))
                    };
                    e[i * d + j] = z;
                    e[j * d + i] = z.conj();
                }
            }
            let mean = (0..d).fold(T::zero(), |acc, i| acc + e[i * d + i].re) / from_u64::<T>(d as u64);
            for i in 0..d {
                e[i * d + i].re = e[i * d + i].re - mean;
            }
            let norm1 = hermitian_eigenvalues(d, &e)?.into_iter().fold(T::zero(), |acc, l| acc + Float::abs(l));
            let target = from_f64::<T>(2.0 * cfg.delta * uniform_f64(rng));
            let factor = if norm1 > T::zero() { target / norm1 } else { T::zero() };
            let entries = rho.entries().iter().zip(&e).map(|(r, x)| r + x.scale(factor)).collect();
            Ok(DensityMatrix::from_entries_unchecked(d, entries))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;
    use crate::states::{sample_haar, trace_distance};

    #[test]
    fn required_shots_golden() {
        // ⌈ln(12800)·2^20/2⌉ evaluated at 50 digits.
        assert_eq!(required_shots(64, 1.0 / 1024.0, 0.01).unwrap(), 4_958_297);
        assert_eq!(required_shots(1, 1.0, 0.5).unwrap(), 1);
        let base = required_shots(64, 1.0 / 1024.0, 0.01).unwrap();
        let halved = required_shots(64, 1.0 / 2048.0, 0.01).unwrap();
        // Ceiling makes the ×4 law exact only up to 3 shots.
        assert!(halved <= 4 * base && halved + 3 >= 4 * base);
        assert_eq!(halved, 19_833_187);
    }

    #[test]
    fn required_shots_rejects_bad_params() {
        assert!(required_shots(64, 0.0, 0.01).is_err());
        assert!(required_shots(64, 1.5, 0.01).is_err());
        assert!(required_shots(64, 0.1, 1.0).is_err());
        assert!(required_shots(0, 0.1, 0.5).is_err());
    }

    #[test]
    fn exact_backend_basis() {
        let s = PureState::<f64>::basis(4, 0).unwrap();
        let mut rng = Stream::root(0).rng();
        let snap = snapshot(&s, &TomographyConfig::exact(), &mut rng).unwrap();
        assert_eq!(snap.p, vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn multinomial_basis_is_degenerate() {
        let s = PureState::<f64>::basis(4, 0).unwrap();
        let mut rng = Stream::root(0).rng();
        let cfg = TomographyConfig::multinomial(0.01, 1_000_000, 0.01);
        let snap = snapshot(&s, &cfg, &mut rng).unwrap();
        assert_eq!(snap.p, vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn under_sampled_flag() {
        let s = PureState::<f64>::uniform(8).unwrap();
        let mut rng = Stream::root(0).rng();
        let snap = snapshot(&s, &TomographyConfig::multinomial(0.01, 100, 0.01), &mut rng).unwrap();
        assert!(snap.under_sampled);
        let cfg = TomographyConfig::multinomial_auto(8, 0.01, 0.01).unwrap();
        assert!(!snapshot(&s, &cfg, &mut rng).unwrap().under_sampled);
    }

    #[test]
    fn invalid_config() {
        let s = PureState::<f64>::uniform(8).unwrap();
        let mut rng = Stream::root(0).rng();
        assert!(snapshot(&s, &TomographyConfig::multinomial(0.01, 0, 0.01), &mut rng).is_err());
        assert!(snapshot(&s, &TomographyConfig::bounded_noise(0.0), &mut rng).is_err());
    }

    #[test]
    fn bounded_noise_within_delta_and_on_simplex() {
        let mut rng = Stream::root(11).rng();
        for trial in 0..200 {
            let s: PureState<f64> = sample_haar(32, &mut rng).unwrap();
            let delta = if trial % 2 == 0 { 1e-3 } else { 0.05 };
            let snap = snapshot(&s, &TomographyConfig::bounded_noise(delta), &mut rng).unwrap();
            assert!(snap.max_error(&s.probabilities()).unwrap() <= delta);
            assert!(snap.p.iter().all(|&x| x >= 0.0));
            assert!((snap.p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn simplex_projection_of_simplex_point_is_identity() {
        let v = [0.25, 0.5, 0.25];
        let p = project_to_simplex(&v);
        for (a, b) in p.iter().zip(v) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(project_to_simplex(&[2.0, 0.0]), vec![1.0, 0.0]);
    }

    #[test]
    fn matrix_snapshot_trace_distance_bounded() {
        let mut rng = Stream::root(12).rng();
        for _ in 0..20 {
            let s: PureState<f64> = sample_haar(6, &mut rng).unwrap();
            let m = matrix_snapshot(&s, &TomographyConfig::bounded_noise(0.05), &mut rng).unwrap();
            let td = trace_distance(&m, &s.density_matrix()).unwrap();
            assert!(td <= 0.05 + 1e-12);
            assert!((m.trace() - 1.0).abs() < 1e-12);
        }
        let s = PureState::<f64>::uniform(4).unwrap();
        let cfg = TomographyConfig::multinomial(0.1, 10, 0.1);
        assert!(matrix_snapshot(&s, &cfg, &mut rng).is_err());
    }

    #[test]
    fn csv_layout() {
        let snap = DiagonalSnapshot::new(vec![0.5f64, 0.5], 0.1);
        assert_eq!(snap.to_csv(), "index,value\n0,0.5\n1,0.5\n");
    }
}
