//! Estimators and hypothesis tests: total variation, Kolmogorov–Smirnov,
//! chi-squared uniformity, Wilson intervals, agreement rates and next-bit
//! prediction advantage.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::gamma::ln_gamma;

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::rng::{Stream, StreamRng};

/// Counts over a finite alphabet `0..counts.len()`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmpiricalDistribution {
    pub counts: Vec<u64>,
    pub total: u64,
}

impl EmpiricalDistribution {
    pub fn new(alphabet: usize) -> Result<Self> {
        if alphabet == 0 {
            return Err(Error::EmptyInput);
        }
        Ok(EmpiricalDistribution { counts: vec![0; alphabet], total: 0 })
    }

    pub fn from_counts(counts: Vec<u64>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::EmptyInput);
        }
        let total = counts.iter().sum();
        Ok(EmpiricalDistribution { counts, total })
    }

    /// Histogram of `ell`-bit strings indexed by their big-endian value.
    pub fn from_bitstrings<'a, I: IntoIterator<Item = &'a BitString>>(ell: usize, items: I) -> Result<Self> {
        if ell > 20 {
            return Err(Error::InvalidParameter(format!("alphabet 2^{ell} is too large")));
        }
        let mut d = Self::new(1 << ell)?;
        for b in items {
            if b.len() != ell {
                return Err(Error::LengthMismatch { what: "histogrammed string", expected: ell, actual: b.len() });
            }
            d.record(b.to_u64() as usize);
        }
        Ok(d)
    }

    pub fn record(&mut self, outcome: usize) {
        self.counts[outcome] += 1;
        self.total += 1;
    }

    pub fn alphabet(&self) -> usize {
        self.counts.len()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        let n = self.total.max(1) as f64;
        self.counts.iter().map(|&c| c as f64 / n).collect()
    }
}

/// Comparison target for [`tv_empirical`].
#[derive(Clone, Copy, Debug)]
pub enum Reference<'a> {
    Empirical(&'a EmpiricalDistribution),
    Exact(&'a [f64]),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TvReport {
    pub distance: f64,
    pub samples: u64,
    /// Plug-in estimates are biased upward; flagged when
    /// `alphabet / samples > 0.01`.
    pub plug_in_bias_warning: bool,
}

/// `½ Σ |p_i − q_i|` for two probability vectors.
pub fn tv_exact(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::AlphabetMismatch(p.len(), q.len()));
    }
    Ok(0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>())
}

/// Plug-in total variation distance.
pub fn tv_empirical(a: &EmpiricalDistribution, b: Reference<'_>) -> Result<TvReport> {
    let (q, samples) = match b {
        Reference::Empirical(e) => (e.probabilities(), a.total.min(e.total)),
        Reference::Exact(p) => (p.to_vec(), a.total),
    };
    let distance = tv_exact(&a.probabilities(), &q)?;
    Ok(TvReport {
        distance,
        samples,
        plug_in_bias_warning: a.alphabet() as f64 / samples.max(1) as f64 > 0.01,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub statistic: f64,
    pub p_value: f64,
    pub samples: usize,
    pub alpha: f64,
    pub pass: bool,
}

impl TestReport {
    fn new(statistic: f64, p_value: f64, samples: usize, alpha: f64) -> Self {
        let p_value = p_value.clamp(0.0, 1.0);
        TestReport { statistic, p_value, samples, alpha, pass: p_value >= alpha }
    }
}

/// Survival function of the Kolmogorov distribution,
/// `Q(x) = 2 Σ_{j≥1} (−1)^{j−1} exp(−2 j² x²)`.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 0.2 {
        // The alternating series converges slowly here and Q is 1 to
        // double precision anyway.
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=200 {
        let term = (-2.0 * (j * j) as f64 * x * x).exp();
        sum += sign * term;
        if term < 1e-18 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Asymptotic p-value with the Stephens small-sample correction.
fn ks_p_value(d: f64, n_eff: f64) -> f64 {
    let s = n_eff.sqrt();
    kolmogorov_sf((s + 0.12 + 0.11 / s) * d)
}

/// `sup_x |F_n(x) − F(x)|`.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len() as f64;
    xs.iter().enumerate().fold(0.0f64, |acc, (i, &x)| {
        let f = cdf(x);
        let above = (i as f64 + 1.0) / n - f;
        let below = f - i as f64 / n;
        acc.max(above).max(below)
    })
}

/// One-sample Kolmogorov–Smirnov test; needs at least 100 samples.
pub fn ks_test<F: Fn(f64) -> f64>(samples: &[f64], cdf: F, alpha: f64) -> Result<TestReport> {
    if samples.len() < 100 {
        return Err(Error::TooFewSamples { needed: 100, got: samples.len() });
    }
    let d = ks_statistic(samples, cdf);
    Ok(TestReport::new(d, ks_p_value(d, samples.len() as f64), samples.len(), alpha))
}

/// Two-sample Kolmogorov–Smirnov test.
pub fn ks_two_sample(a: &[f64], b: &[f64], alpha: f64) -> Result<TestReport> {
    for s in [a, b] {
        if s.len() < 100 {
            return Err(Error::TooFewSamples { needed: 100, got: s.len() });
        }
    }
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(|p, q| p.total_cmp(q));
    ys.sort_by(|p, q| p.total_cmp(q));
    let (n, m) = (xs.len() as f64, ys.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < xs.len() && j < ys.len() {
        let x = xs[i].min(ys[j]);
        while i < xs.len() && xs[i] <= x {
            i += 1;
        }
        while j < ys.len() && ys[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    let n_eff = n * m / (n + m);
    Ok(TestReport::new(d, ks_p_value(d, n_eff), xs.len() + ys.len(), alpha))
}

/// Pearson chi-squared test of uniformity with `cells − 1` degrees of freedom.
pub fn chi2_uniformity(counts: &[u64], alpha: f64) -> Result<TestReport> {
    if counts.len() < 2 {
        return Err(Error::InvalidParameter("need at least two cells".into()));
    }
    let total: u64 = counts.iter().sum();
    let expected = total as f64 / counts.len() as f64;
    if expected < 5.0 {
        return Err(Error::UndersampledCells { expected });
    }
    let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let dist = ChiSquared::new((counts.len() - 1) as f64).expect("positive degrees of freedom");
    Ok(TestReport::new(stat, dist.sf(stat), total as usize, alpha))
}

/// Wilson score interval for `successes / n` at normal quantile `z`.
pub fn wilson_interval(successes: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// 97.5% standard normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub rate: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
    pub trials: usize,
}

/// Runs `produce` twice per trial on independent streams
/// (`stream.child(t).child(0)` and `.child(1)`) and reports how often the
/// two outputs agree.
pub fn agreement_rate<O, F>(produce: F, trials: usize, stream: &Stream) -> Result<AgreementReport>
where
    O: PartialEq + Send,
    F: Fn(&mut StreamRng) -> Result<O> + Sync,
{
    if trials < 30 {
        return Err(Error::TooFewSamples { needed: 30, got: trials });
    }
    let agreed = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let a = produce(&mut stream.grandchild(t, 0).rng())?;
            let b = produce(&mut stream.grandchild(t, 1).rng())?;
            Ok((a == b) as u64)
        })
        .collect::<Result<Vec<u64>>>()?
        .into_iter()
        .sum::<u64>();
    let (lo, hi) = wilson_interval(agreed, trials as u64, Z_95);
    Ok(AgreementReport { rate: agreed as f64 / trials as f64, wilson_low: lo, wilson_high: hi, trials })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdvantageReport {
    /// `Pr[predictor(y_1..y_i) = y_{i+1}] − ½`.
    pub advantage: f64,
    /// Binomial standard error at a fair coin, `0.5/√trials`.
    pub std_err: f64,
    pub trials: usize,
}

/// Next-bit prediction advantage at `position` (zero based: the predictor
/// sees bits `0..position` and guesses bit `position`). Trial `t` draws the
/// generator from `stream.child(t).child(0)` and the predictor from
/// `.child(1)`.
pub fn next_bit_advantage<G, P>(generator: G, predictor: P, position: usize, trials: usize, stream: &Stream) -> Result<AdvantageReport>
where
    G: Fn(&mut StreamRng) -> Result<BitString> + Sync,
    P: Fn(&[bool], &mut StreamRng) -> bool + Sync,
{
    if trials == 0 {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    let hits = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let y = generator(&mut stream.grandchild(t, 0).rng())?;
            if position >= y.len() {
                return Err(Error::InvalidParameter(format!("position {position} beyond output length {}", y.len())));
            }
            let guess = predictor(&y.bits()[..position], &mut stream.grandchild(t, 1).rng());
            Ok((guess == y.bits()[position]) as u64)
        })
        .collect::<Result<Vec<u64>>>()?
        .into_iter()
        .sum::<u64>();
    Ok(AdvantageReport {
        advantage: hits as f64 / trials as f64 - 0.5,
        std_err: 0.5 / (trials as f64).sqrt(),
        trials,
    })
}

/// Most frequent string and its frequency; ties go to the lexicographically
/// smallest string.
pub fn modal_frequency(outputs: &[BitString]) -> Option<(BitString, f64)> {
    if outputs.is_empty() {
        return None;
    }
    let mut sorted: Vec<&BitString> = outputs.iter().collect();
    sorted.sort();
    let mut best: (&BitString, usize) = (sorted[0], 0);
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        if j - i > best.1 {
            best = (sorted[i], j - i);
        }
        i = j;
    }
    Some((best.0.clone(), best.1 as f64 / outputs.len() as f64))
}

fn ln_choose(n: u64, k: u64) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// `Pr[Binomial(n, p) ≥ k]`, summed exactly term by term in log space.
pub fn binomial_tail_ge(n: u64, p: f64, k: u64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > n {
        return 0.0;
    }
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    (k..=n)
        .map(|j| (ln_choose(n, j) + j as f64 * p.ln() + (n - j) as f64 * (1.0 - p).ln()).exp())
        .sum::<f64>()
        .min(1.0)
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64, mean: f64, sd: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-(x - mean) / (sd * std::f64::consts::SQRT_2))
}
