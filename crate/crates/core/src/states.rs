//! Pure states, density matrices, Haar sampling and seeded state generation.
//!
//! Haar-random states are drawn with the Muller procedure: `2·dim`
//! independent standard normals become the real and imaginary parts of the
//! amplitudes, and the vector is normalized. [`sample_haar`],
//! [`seeded_state`] and [`seeded_prfs_state`] all run through
//! [`gaussian_state`]; they differ only in where the random bits come from.
//!
//! Seeded states use a ChaCha20 keystream keyed by
//! `SHA-256(domain || bit_len_le64 || packed_bits ...)`. This is a functional
//! stand-in for a pseudorandom state generator: the state is a fixed function
//! of the key, and over uniform keys it is Haar distributed to the extent
//! ChaCha20 output is uniform. It carries no computational security claim.

use std::fmt;

use num_complex::Complex;
use num_traits::{Float, Zero};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::bits::{BitString, SeedKey, SeedRole};
use crate::error::{Error, Result};
use crate::rng::gaussian_pair;
use crate::scalar::{from_f64, from_usize, to_f64, Real};

const PRS_DOMAIN: &[u8] = b"pdextract/prs/v1";
const PRFS_DOMAIN: &[u8] = b"pdextract/prfs/v1";

/// Normalization tolerance: 1e-12 in double precision, looser for `f32`.
fn norm_tolerance<T: Real>(dim: usize) -> f64 {
    let eps = to_f64(T::epsilon());
    (64.0 * eps * (dim as f64).sqrt()).max(1e-12)
}

/// A unit vector in `C^dim`, `dim >= 2`.
#[derive(Clone, PartialEq)]
pub struct PureState<T: Real> {
    amplitudes: Vec<Complex<T>>,
}

impl<T: Real> fmt::Debug for PureState<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PureState").field("dim", &self.dim()).finish_non_exhaustive()
    }
}

impl<T: Real> PureState<T> {
    /// Accepts amplitudes that are already normalized.
    pub fn new(amplitudes: Vec<Complex<T>>) -> Result<Self> {
        if amplitudes.len() < 2 {
            return Err(Error::InvalidDimension(amplitudes.len()));
        }
        let norm2 = to_f64(amplitudes.iter().fold(T::zero(), |acc, a| acc + a.norm_sqr()));
        if (norm2 - 1.0).abs() > norm_tolerance::<T>(amplitudes.len()) {
            return Err(Error::InvalidState(format!("squared norm {norm2} is not 1")));
        }
        Ok(PureState { amplitudes })
    }

    /// Normalizes arbitrary nonzero amplitudes.
    pub fn normalized(mut amplitudes: Vec<Complex<T>>) -> Result<Self> {
        if amplitudes.len() < 2 {
            return Err(Error::InvalidDimension(amplitudes.len()));
        }
        let norm = amplitudes.iter().fold(T::zero(), |acc, a| acc + a.norm_sqr()).sqrt();
        if norm.is_zero() || !norm.is_finite() {
            return Err(Error::InvalidState("cannot normalize a zero vector".into()));
        }
        for a in &mut amplitudes {
            *a = *a / norm;
        }
        Ok(PureState { amplitudes })
    }

    /// The computational basis vector `e_index` (zero based).
    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidDimension(dim));
        }
        if index >= dim {
            return Err(Error::InvalidParameter(format!("basis index {index} out of range for dim {dim}")));
        }
        let mut amplitudes = vec![Complex::zero(); dim];
        amplitudes[index] = Complex::new(T::one(), T::zero());
        Ok(PureState { amplitudes })
    }

    /// Equal-weight superposition over the coordinates in `range`.
    pub fn uniform_on(dim: usize, range: std::ops::Range<usize>) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidDimension(dim));
        }
        if range.is_empty() || range.end > dim {
            return Err(Error::InvalidParameter(format!("support {range:?} invalid for dim {dim}")));
        }
        let mut amplitudes = vec![Complex::zero(); dim];
        for a in &mut amplitudes[range] {
            *a = Complex::new(T::one(), T::zero());
        }
        Self::normalized(amplitudes)
    }

    pub fn uniform(dim: usize) -> Result<Self> {
        Self::uniform_on(dim, 0..dim)
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[Complex<T>] {
        &self.amplitudes
    }

    /// Computational-basis probabilities `|α_i|^2`, the diagonal of `|ψ⟩⟨ψ|`.
    pub fn probabilities(&self) -> Vec<T> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &PureState<T>) -> Result<Complex<T>> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), actual: other.dim() });
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .fold(Complex::zero(), |acc, (a, b)| acc + a.conj() * b))
    }

    /// `|⟨self|other⟩|^2`.
    pub fn fidelity(&self, other: &PureState<T>) -> Result<T> {
        Ok(self.inner(other)?.norm_sqr())
    }

    pub fn density_matrix(&self) -> DensityMatrix<T> {
        DensityMatrix::from_pure(self)
    }

    /// Applies a `dim × dim` row-major matrix. The result is renormalized
    /// against rounding, so `matrix` should be unitary.
    pub fn apply(&self, matrix: &[Complex<T>]) -> Result<PureState<T>> {
        let d = self.dim();
        if matrix.len() != d * d {
            return Err(Error::DimensionMismatch { expected: d * d, actual: matrix.len() });
        }
        let out = (0..d)
            .map(|i| {
                matrix[i * d..(i + 1) * d]
                    .iter()
                    .zip(&self.amplitudes)
                    .fold(Complex::zero(), |acc, (m, a)| acc + m * a)
            })
            .collect();
        Self::normalized(out)
    }

    /// Little-endian `f64` values, real then imaginary part, per amplitude.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 * self.dim());
        for a in &self.amplitudes {
            out.extend_from_slice(&to_f64(a.re).to_le_bytes());
            out.extend_from_slice(&to_f64(a.im).to_le_bytes());
        }
        out
    }

    pub fn from_le_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() % 16 != 0 {
            return Err(Error::Parse(format!("{} bytes is not a whole number of amplitudes", bytes.len())));
        }
        let amplitudes = bytes
            .chunks_exact(16)
            .map(|c| {
                let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
                let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
                Complex::new(from_f64(re), from_f64(im))
            })
            .collect();
        Self::new(amplitudes)
    }
}

impl<T: Real> Serialize for PureState<T> {
    /// JSON form: `[[re, im], ...]`.
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let pairs: Vec<[f64; 2]> = self.amplitudes.iter().map(|a| [to_f64(a.re), to_f64(a.im)]).collect();
        pairs.serialize(s)
    }
}

impl<'de, T: Real> Deserialize<'de> for PureState<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let pairs = Vec::<[f64; 2]>::deserialize(d)?;
        let amps = pairs.into_iter().map(|[re, im]| Complex::new(from_f64(re), from_f64(im))).collect();
        PureState::new(amps).map_err(D::Error::custom)
    }
}

/// The shared Gaussian-normalize procedure behind every state sampler.
pub fn gaussian_state<T: Real, R: RngCore + ?Sized>(dim: usize, rng: &mut R) -> Result<PureState<T>> {
    if dim < 2 {
        return Err(Error::InvalidDimension(dim));
    }
    let mut amplitudes = Vec::with_capacity(dim);
    for _ in 0..dim {
        let (re, im) = gaussian_pair(rng);
        amplitudes.push(Complex::new(from_f64(re), from_f64(im)));
    }
    PureState::normalized(amplitudes)
}

/// A Haar-random state in `C^dim`.
pub fn sample_haar<T: Real, R: RngCore + ?Sized>(dim: usize, rng: &mut R) -> Result<PureState<T>> {
    gaussian_state(dim, rng)
}

fn keyed_drbg(domain: &[u8], parts: &[&BitString]) -> ChaCha20Rng {
    let mut h = Sha256::new();
    h.update(domain);
    for part in parts {
        h.update((part.len() as u64).to_le_bytes());
        h.update(part.to_bytes());
    }
    ChaCha20Rng::from_seed(h.finalize().into())
}

/// The keystream driving [`seeded_state`] for `seed`.
pub fn prs_drbg(seed: &SeedKey) -> ChaCha20Rng {
    keyed_drbg(PRS_DOMAIN, &[&seed.bits])
}

/// The keystream driving [`seeded_prfs_state`] for `(key, input)`.
pub fn prfs_drbg(key: &SeedKey, input: &BitString) -> ChaCha20Rng {
    keyed_drbg(PRFS_DOMAIN, &[&key.bits, input])
}

/// Deterministic state for a `prs-seed`.
pub fn seeded_state<T: Real>(seed: &SeedKey, dim: usize) -> Result<PureState<T>> {
    seed.expect_role(SeedRole::PrsSeed)?;
    gaussian_state(dim, &mut prs_drbg(seed))
}

/// Deterministic state for a keyed, input-indexed family.
pub fn seeded_prfs_state<T: Real>(key: &SeedKey, input: &BitString, dim: usize) -> Result<PureState<T>> {
    key.expect_role(SeedRole::PrsSeed)?;
    gaussian_state(dim, &mut prfs_drbg(key, input))
}

/// A keyed source of pure states. Swappable so that other generator
/// candidates can drive the same constructions.
pub trait StateGenerator: Send + Sync {
    fn state<T: Real>(&self, key: &SeedKey, dim: usize) -> Result<PureState<T>>;
    fn indexed_state<T: Real>(&self, key: &SeedKey, input: &BitString, dim: usize) -> Result<PureState<T>>;
}

/// The seeded-Haar generator built on [`seeded_state`] / [`seeded_prfs_state`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SeededHaar;

impl StateGenerator for SeededHaar {
    fn state<T: Real>(&self, key: &SeedKey, dim: usize) -> Result<PureState<T>> {
        seeded_state(key, dim)
    }

    fn indexed_state<T: Real>(&self, key: &SeedKey, input: &BitString, dim: usize) -> Result<PureState<T>> {
        seeded_prfs_state(key, input, dim)
    }
}

/// A Haar-random unitary, row-major, from Gram–Schmidt on a complex
/// Ginibre matrix (columns orthonormalized in order).
pub fn haar_unitary<T: Real, R: RngCore + ?Sized>(dim: usize, rng: &mut R) -> Result<Vec<Complex<T>>> {
    if dim < 2 {
        return Err(Error::InvalidDimension(dim));
    }
    let mut cols: Vec<Vec<Complex<T>>> = Vec::with_capacity(dim);
    for _ in 0..dim {
        let mut v: Vec<Complex<T>> = (0..dim)
            .map(|_| {
                let (re, im) = gaussian_pair(rng);
                Complex::new(from_f64(re), from_f64(im))
            })
            .collect();
        // Two passes of modified Gram–Schmidt.
        for _ in 0..2 {
            for u in &cols {
                let proj = u.iter().zip(&v).fold(Complex::zero(), |acc: Complex<T>, (a, b)| acc + a.conj() * b);
                for (vi, ui) in v.iter_mut().zip(u) {
                    *vi = *vi - proj * ui;
                }
            }
        }
        let norm = v.iter().fold(T::zero(), |acc, a| acc + a.norm_sqr()).sqrt();
        for vi in &mut v {
            *vi = *vi / norm;
        }
        cols.push(v);
    }
    let mut m = vec![Complex::zero(); dim * dim];
    for (j, col) in cols.iter().enumerate() {
        for (i, &x) in col.iter().enumerate() {
            m[i * dim + j] = x;
        }
    }
    Ok(m)
}

/// A `dim × dim` density matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix<T: Real> {
    dim: usize,
    entries: Vec<Complex<T>>,
}

impl<T: Real> DensityMatrix<T> {
    /// Validates Hermiticity (1e-12), unit trace (1e-12) and eigenvalues
    /// bounded below by -1e-10. Tolerances widen for `f32`.
    pub fn new(dim: usize, entries: Vec<Complex<T>>) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidDimension(dim));
        }
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, actual: entries.len() });
        }
        let tol = norm_tolerance::<T>(dim);
        let m = DensityMatrix { dim, entries };
        for i in 0..dim {
            for j in 0..dim {
                let diff = m.get(i, j) - m.get(j, i).conj();
                if to_f64(diff.norm()) > tol {
                    return Err(Error::InvalidState(format!("not Hermitian at ({i}, {j})")));
                }
            }
        }
        let tr = to_f64(m.trace());
        if (tr - 1.0).abs() > tol {
            return Err(Error::InvalidState(format!("trace {tr} is not 1")));
        }
        let min_eig = hermitian_eigenvalues(dim, &m.entries)?.into_iter().fold(f64::INFINITY, |a, b| a.min(to_f64(b)));
        if min_eig < -1e-10f64.max(tol) {
            return Err(Error::InvalidState(format!("negative eigenvalue {min_eig}")));
        }
        Ok(m)
    }

    pub fn from_pure(state: &PureState<T>) -> Self {
        let d = state.dim();
        let a = state.amplitudes();
        let mut entries = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                entries.push(a[i] * a[j].conj());
            }
        }
        DensityMatrix { dim: d, entries }
    }

    /// Convex combination `Σ w_i |ψ_i⟩⟨ψ_i|`; weights are renormalized.
    pub fn mixture(weights: &[T], states: &[PureState<T>]) -> Result<Self> {
        if states.is_empty() || weights.len() != states.len() {
            return Err(Error::EmptyInput);
        }
        let d = states[0].dim();
        let total = weights.iter().fold(T::zero(), |a, &b| a + b);
        if total <= T::zero() || weights.iter().any(|&w| w < T::zero()) {
            return Err(Error::InvalidParameter("mixture weights must be nonnegative with positive sum".into()));
        }
        let mut entries = vec![Complex::zero(); d * d];
        for (w, s) in weights.iter().zip(states) {
            if s.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, actual: s.dim() });
            }
            let a = s.amplitudes();
            for i in 0..d {
                for j in 0..d {
                    entries[i * d + j] = entries[i * d + j] + (a[i] * a[j].conj()).scale(*w / total);
                }
            }
        }
        Ok(DensityMatrix { dim: d, entries })
    }

    /// Builds a matrix without validation. Tomography estimates need not be
    /// positive semidefinite.
    pub fn from_entries_unchecked(dim: usize, entries: Vec<Complex<T>>) -> Self {
        assert_eq!(entries.len(), dim * dim);
        DensityMatrix { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[Complex<T>] {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> Complex<T> {
        self.entries[i * self.dim + j]
    }

    pub fn trace(&self) -> T {
        (0..self.dim).fold(T::zero(), |acc, i| acc + self.get(i, i).re)
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.dim).map(|i| self.get(i, i).re).collect()
    }

    pub fn eigenvalues(&self) -> Result<Vec<T>> {
        hermitian_eigenvalues(self.dim, &self.entries)
    }
}

/// `½ ‖a − b‖₁`, clamped to `[0, 1]`.
pub fn trace_distance<T: Real>(a: &DensityMatrix<T>, b: &DensityMatrix<T>) -> Result<T> {
    if a.dim != b.dim {
        return Err(Error::DimensionMismatch { expected: a.dim, actual: b.dim });
    }
    let diff: Vec<Complex<T>> = a.entries.iter().zip(&b.entries).map(|(x, y)| x - y).collect();
    let half = from_f64::<T>(0.5);
    let td = hermitian_eigenvalues(a.dim, &diff)?.into_iter().fold(T::zero(), |acc, l| acc + Float::abs(l)) * half;
    Ok(td.max(T::zero()).min(T::one()))
}

/// Eigenvalues of a Hermitian `dim × dim` matrix (row-major), ascending.
///
/// Runs cyclic Jacobi on the real symmetric embedding `[[A, -B], [B, A]]`
/// of `A + iB`, whose spectrum is that of the input with every eigenvalue
/// doubled.
pub fn hermitian_eigenvalues<T: Real>(dim: usize, m: &[Complex<T>]) -> Result<Vec<T>> {
    if m.len() != dim * dim {
        return Err(Error::DimensionMismatch { expected: dim * dim, actual: m.len() });
    }
    let n = 2 * dim;
    let mut a = vec![T::zero(); n * n];
    for i in 0..dim {
        for j in 0..dim {
            // Symmetrize to absorb rounding asymmetry.
            let z = (m[i * dim + j] + m[j * dim + i].conj()).scale(from_f64(0.5));
            a[i * n + j] = z.re;
            a[(i + dim) * n + (j + dim)] = z.re;
            a[i * n + (j + dim)] = -z.im;
            a[(i + dim) * n + j] = z.im;
        }
    }
    let mut eig = symmetric_eigenvalues(n, a);
    eig.sort_by(|x, y| x.partial_cmp(y).expect("finite eigenvalues"));
    // Each eigenvalue appears twice; keep one of every pair.
    Ok(eig.into_iter().step_by(2).collect())
}

fn symmetric_eigenvalues<T: Real>(n: usize, mut a: Vec<T>) -> Vec<T> {
    let scale = a.iter().fold(T::zero(), |acc, &x| acc + x * x);
    let tol = scale * T::epsilon() * T::epsilon() * from_usize::<T>(n);
    for _sweep in 0..100 {
        let mut off = T::zero();
        for p in 0..n {
            for q in 0..n {
                if p != q {
                    off = off + a[p * n + q] * a[p * n + q];
                }
            }
        }
        if off <= tol || off.is_zero() {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq.is_zero() {
                    continue;
                }
                let theta = (a[q * n + q] - a[p * n + p]) / (apq + apq);
                let sign = if theta >= T::zero() { T::one() } else { -T::one() };
                let t = sign / (Float::abs(theta) + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i * n + i]).collect()
}
