//! Photon-count statistics at the amplifier input.
//!
//! The transmitted coherent signal is displaced by the amplifier's thermal
//! noise. With mean signal count `s = p_t τ` and mean noise count `m = 𝒩τ`
//! the count law is
//!
//! ```text
//! P(n) = mⁿ/(1+m)ⁿ⁺¹ · exp(−s/(1+m)) · L_n(−s/(m(1+m)))
//! ```
//!
//! The Laguerre factor grows while the prefactor decays, so the product is
//! built term by term in log space from the ratio L_n/L_{n−1}, obtained from the
//! three-term recurrence. No raw L_n is ever formed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::{BOLTZMANN, HBAR};
use crate::device::RegimeWarning;
use crate::{Error, Result};

/// Probability mass allowed beyond the cutoff.
pub const TAIL_MASS: f64 = 1e-12;

/// Noise counts below this use the exact Poisson branch.
pub const POISSON_BRANCH_NOISE: f64 = 1e-12;

const MAX_CUTOFF: usize = 1 << 26;

/// Samples drawn per independently seeded RNG stream.
pub const SAMPLES_PER_STREAM: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionChain {
    /// Effective amplifier noise temperature T_N (K).
    pub noise_temperature: f64,
    /// Amplifier bandwidth B (Hz).
    pub bandwidth: f64,
    /// Integration time τ (s).
    pub integration_time: f64,
    /// Carrier angular frequency (rad/s).
    pub carrier: f64,
}

impl DetectionChain {
    pub fn new(noise_temperature: f64, bandwidth: f64, integration_time: f64, carrier: f64) -> Result<Self> {
        if !(noise_temperature.is_finite() && noise_temperature >= 0.0) {
            return Err(Error::domain(format!("noise temperature must be >= 0, got {noise_temperature}")));
        }
        for (name, v) in [
            ("bandwidth", bandwidth),
            ("integration time", integration_time),
            ("carrier", carrier),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::domain(format!("{name} must be > 0, got {v}")));
            }
        }
        Ok(Self {
            noise_temperature,
            bandwidth,
            integration_time,
            carrier,
        })
    }

    /// Bandwidth paired with the integration time as B = 1/(2τ).
    pub fn with_paired_bandwidth(noise_temperature: f64, integration_time: f64, carrier: f64) -> Result<Self> {
        Self::new(noise_temperature, 0.5 / integration_time, integration_time, carrier)
    }

    pub fn warnings(&self) -> Vec<RegimeWarning> {
        if self.integration_time < 0.5 / self.bandwidth {
            vec![RegimeWarning::ShortIntegration {
                tau_s: self.integration_time,
                bandwidth_hz: self.bandwidth,
            }]
        } else {
            Vec::new()
        }
    }
}

/// Johnson–Nyquist noise flux 𝒩 = (k_B T_N / ħω) B in photons/s.
pub fn noise_flux(chain: &DetectionChain) -> f64 {
    BOLTZMANN * chain.noise_temperature / (HBAR * chain.carrier) * chain.bandwidth
}

/// Probabilities over photon counts 0..=cutoff.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhotonDistribution {
    probs: Vec<f64>,
    mean: f64,
    variance: f64,
}

impl PhotonDistribution {
    pub fn from_probs(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::domain("empty photon distribution"));
        }
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::domain("probabilities must lie in [0, 1]"));
        }
        let (mean, variance) = raw_moments(&probs);
        Ok(Self {
            probs,
            mean,
            variance,
        })
    }

    /// Empirical distribution from a count histogram.
    pub fn from_counts(counts: &[u64]) -> Result<Self> {
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(Error::domain("no samples"));
        }
        let last = counts.iter().rposition(|&c| c > 0).unwrap_or(0);
        Self::from_probs(counts[..=last].iter().map(|&c| c as f64 / total as f64).collect())
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn cutoff(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn prob(&self, n: usize) -> f64 {
        self.probs.get(n).copied().unwrap_or(0.0)
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// P(N ≤ n).
    pub fn cdf(&self, n: usize) -> f64 {
        self.probs.iter().take(n + 1).sum()
    }

    pub fn tv_distance(&self, other: &Self) -> f64 {
        let len = self.probs.len().max(other.probs.len());
        0.5 * (0..len).map(|n| (self.prob(n) - other.prob(n)).abs()).sum::<f64>()
    }

    /// Σ_n min(P(n), Q(n)).
    pub fn overlap(&self, other: &Self) -> f64 {
        let len = self.probs.len().min(other.probs.len());
        (0..len).map(|n| self.probs[n].min(other.probs[n])).sum()
    }
}

fn raw_moments(probs: &[f64]) -> (f64, f64) {
    let mean: f64 = probs.iter().enumerate().map(|(n, p)| n as f64 * p).sum();
    let variance: f64 = probs
        .iter()
        .enumerate()
        .map(|(n, p)| (n as f64 - mean).powi(2) * p)
        .sum();
    (mean, variance)
}

/// Mean and variance computed from the stored probabilities.
pub fn moments(dist: &PhotonDistribution) -> (f64, f64) {
    raw_moments(&dist.probs)
}

/// Displaced-thermal moments: mean s + m, variance m(m+1) + s(1+2m).
pub fn closed_form_moments(s: f64, m: f64) -> (f64, f64) {
    (s + m, m * (m + 1.0) + s * (1.0 + 2.0 * m))
}

/// Count law for transmitted flux `p_t` and noise flux `noise` (photons/s)
/// integrated over `tau` seconds.
pub fn count_distribution(p_t: f64, noise: f64, tau: f64) -> Result<PhotonDistribution> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::domain(format!("integration time must be > 0, got {tau}")));
    }
    displaced_thermal(p_t * tau, noise * tau)
}

/// Count law for mean signal count `s` and mean thermal count `m`.
pub fn displaced_thermal(s: f64, m: f64) -> Result<PhotonDistribution> {
    if !(s.is_finite() && s >= 0.0) || !(m.is_finite() && m >= 0.0) {
        return Err(Error::domain(format!("need finite s, m >= 0, got s = {s}, m = {m}")));
    }
    let (mean, variance) = closed_form_moments(s, m);
    let start = (mean + 10.0 * variance.sqrt()).ceil();
    if !(start < MAX_CUTOFF as f64) {
        return Err(Error::Overflow { s, m });
    }
    let mut target = start as usize + 2;
    let mut terms = if m < POISSON_BRANCH_NOISE {
        LogTerms::poisson(s)
    } else {
        LogTerms::laguerre(s, m)
    };

    let mut log_probs = vec![terms.log_p];
    loop {
        while log_probs.len() <= target {
            let step = terms.advance();
            if !terms.log_p.is_finite() && terms.log_p != f64::NEG_INFINITY || step.is_nan() {
                return Err(Error::Overflow { s, m });
            }
            log_probs.push(terms.log_p + terms.log_comp);
        }
        if terms.tail_bound() < TAIL_MASS {
            break;
        }
        target *= 2;
        if target > MAX_CUTOFF {
            return Err(Error::Overflow { s, m });
        }
    }
    let mut probs: Vec<f64> = log_probs.into_iter().map(f64::exp).collect();
    let keep = probs.iter().rposition(|&p| p > 0.0).unwrap_or(0) + 1;
    probs.truncate(keep);
    PhotonDistribution::from_probs(probs)
}

/// Running log-probability with its last term ratio.
struct LogTerms {
    n: usize,
    log_p: f64,
    /// Neumaier compensation for the running sum of log ratios.
    log_comp: f64,
    /// log P(n) − log P(n−1) of the last step.
    last_log_ratio: f64,
    kind: TermKind,
}

enum TermKind {
    Poisson { log_s: f64 },
    /// `excess` is L_{n+1}/L_n − 1, kept directly: the ratio tends to one and
    /// carrying it as r would let rounding accumulate step after step.
    Laguerre { log_q: f64, x: f64, excess: f64 },
}

impl LogTerms {
    fn poisson(s: f64) -> Self {
        Self {
            n: 0,
            log_p: -s,
            log_comp: 0.0,
            last_log_ratio: f64::NEG_INFINITY,
            kind: TermKind::Poisson { log_s: s.ln() },
        }
    }

    fn laguerre(s: f64, m: f64) -> Self {
        let x = -s / (m * (1.0 + m));
        Self {
            n: 0,
            log_p: -m.ln_1p() - s / (1.0 + m),
            log_comp: 0.0,
            last_log_ratio: f64::NEG_INFINITY,
            kind: TermKind::Laguerre {
                // ln(m/(1+m)) without cancellation; every step adds this term.
                log_q: -m.recip().ln_1p(),
                x,
                // L_1/L_0 − 1
                excess: -x,
            },
        }
    }

    /// Move to n+1; returns the log ratio applied.
    fn advance(&mut self) -> f64 {
        let n = self.n;
        let step = match &mut self.kind {
            TermKind::Poisson { log_s } => *log_s - ((n + 1) as f64).ln(),
            TermKind::Laguerre { log_q, x, excess } => {
                let step = *log_q + excess.ln_1p();
                // (k+1)L_{k+1} = (2k+1−x)L_k − k L_{k−1} with k = n+1, rewritten for
                // d_k = L_{k+1}/L_k − 1. All terms are non-negative since x ≤ 0.
                let k = (n + 1) as f64;
                *excess = (k * *excess / (1.0 + *excess) - *x) / (k + 1.0);
                step
            }
        };
        self.n += 1;
        // Compensated: thousands of steps may be summed.
        let sum = self.log_p + step;
        if !sum.is_finite() {
            self.log_comp = 0.0;
        } else if self.log_p.abs() >= step.abs() {
            self.log_comp += (self.log_p - sum) + step;
        } else {
            self.log_comp += (step - sum) + self.log_p;
        }
        self.log_p = sum;
        self.last_log_ratio = step;
        step
    }

    /// Upper bound on Σ_{k>n} P(k), valid once term ratios are below one and
    /// non-increasing.
    fn tail_bound(&self) -> f64 {
        if self.log_p == f64::NEG_INFINITY {
            return 0.0;
        }
        let q = self.last_log_ratio.exp();
        if q >= 1.0 {
            return f64::INFINITY;
        }
        self.log_p.exp() * q / (1.0 - q)
    }
}

/// Monte Carlo draw from the displaced-thermal P-function: α is √s plus an
/// isotropic complex Gaussian with per-quadrature variance m/2, then
/// n ~ Poisson(|α|²).
///
/// Samples are split into streams of [`SAMPLES_PER_STREAM`]; stream k uses
/// ChaCha8 seeded with `seed` on stream number k, so the histogram is
/// bit-reproducible regardless of thread count.
pub fn sample_displaced_thermal(s: f64, m: f64, n_samples: usize, seed: u64) -> Result<PhotonDistribution> {
    if n_samples == 0 {
        return Err(Error::domain("need at least one sample"));
    }
    if !(s.is_finite() && s >= 0.0) || !(m.is_finite() && m >= 0.0) {
        return Err(Error::domain(format!("need finite s, m >= 0, got s = {s}, m = {m}")));
    }
    let streams = n_samples.div_ceil(SAMPLES_PER_STREAM);
    let center = s.sqrt();
    let sigma = (0.5 * m).sqrt();
    let partial: Vec<Vec<u64>> = (0..streams)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let count = SAMPLES_PER_STREAM.min(n_samples - k * SAMPLES_PER_STREAM);
            let gauss = Normal::new(0.0, sigma).expect("sigma is finite and >= 0");
            let mut hist: Vec<u64> = Vec::new();
            for _ in 0..count {
                let (re, im) = if sigma > 0.0 {
                    (center + gauss.sample(&mut rng), gauss.sample(&mut rng))
                } else {
                    (center, 0.0)
                };
                let lambda = re * re + im * im;
                let n = if lambda > 0.0 {
                    Poisson::new(lambda).expect("lambda is finite and > 0").sample(&mut rng) as usize
                } else {
                    0
                };
                if n >= hist.len() {
                    hist.resize(n + 1, 0);
                }
                hist[n] += 1;
            }
            hist
        })
        .collect();
    let len = partial.iter().map(Vec::len).max().unwrap_or(1);
    let mut counts = vec![0u64; len];
    for hist in &partial {
        for (n, c) in hist.iter().enumerate() {
            counts[n] += c;
        }
    }
    PhotonDistribution::from_counts(&counts)
}

/// Empirical distribution of `n_samples` draws for flux `p_t`, noise flux
/// `noise` and integration time `tau`.
pub fn sample_counts(p_t: f64, noise: f64, tau: f64, n_samples: usize, seed: u64) -> Result<PhotonDistribution> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::domain(format!("integration time must be > 0, got {tau}")));
    }
    sample_displaced_thermal(p_t * tau, noise * tau, n_samples, seed)
}

/// Expected total-variation distance between an `n_samples` empirical
/// histogram and its parent, ½ Σ √(2 P(n)(1−P(n)) / (π N)) in the normal
/// approximation.
pub fn expected_sampling_tv(dist: &PhotonDistribution, n_samples: usize) -> f64 {
    let n = n_samples as f64;
    0.5 * dist
        .probs
        .iter()
        .map(|&p| (2.0 * p * (1.0 - p) / (std::f64::consts::PI * n)).sqrt())
        .sum::<f64>()
}

/// Report written alongside Monte Carlo checks.
#[derive(Debug, Clone, Serialize)]
pub struct MonteCarloReport {
    pub s: f64,
    pub m: f64,
    pub tau: f64,
    pub n_samples: usize,
    pub seed: u64,
    pub tv_distance: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ln_factorial(n: usize) -> f64 {
        (1..=n).map(|k| (k as f64).ln()).sum()
    }

    /// Direct Laguerre series L_n(x) = Σ C(n,k)(−x)^k/k!, fine for small n.
    fn laguerre_series(n: usize, x: f64) -> f64 {
        let mut sum = 0.0;
        let mut term = 1.0; // k = 0
        for k in 0..=n {
            if k > 0 {
                term *= -x * (n - k + 1) as f64 / (k * k) as f64;
            }
            sum += term;
        }
        sum
    }

    #[test]
    fn noise_flux_values() {
        let carrier = crate::constants::mhz(7000.0);
        let chain = DetectionChain::new(4.0, 10e6, 50e-9, carrier).unwrap();
        let n = noise_flux(&chain);
        // 30-digit evaluation: 1.190663949904e8
        assert!(((n - 1.190_663_949_904_43e8) / n).abs() < 1e-12);
        let zero = DetectionChain::new(0.0, 10e6, 50e-9, carrier).unwrap();
        assert_eq!(noise_flux(&zero), 0.0);
        let wide = DetectionChain::new(4.0, 20e6, 50e-9, carrier).unwrap();
        assert!((noise_flux(&wide) / n - 2.0).abs() < 1e-15);
    }

    #[test]
    fn chain_validation_and_warning() {
        assert!(DetectionChain::new(-1.0, 1e6, 1e-6, 1e10).is_err());
        assert!(DetectionChain::new(1.0, 0.0, 1e-6, 1e10).is_err());
        let short = DetectionChain::new(0.1, 10e6, 10e-9, 1e10).unwrap();
        assert_eq!(short.warnings().len(), 1);
        let paired = DetectionChain::with_paired_bandwidth(0.1, 10e-9, 1e10).unwrap();
        assert_eq!(paired.bandwidth, 50e6);
        assert!(paired.warnings().is_empty());
    }

    #[test]
    fn poisson_branch() {
        let d = displaced_thermal(4.2, 0.0).unwrap();
        let exact = |n: usize| (-4.2f64 + n as f64 * 4.2f64.ln() - ln_factorial(n)).exp();
        for n in 0..=d.cutoff() {
            assert!((d.prob(n) - exact(n)).abs() < 1e-14, "n = {n}");
        }
        let dropped: f64 = (d.cutoff() + 1..200).map(exact).sum();
        assert!(dropped < TAIL_MASS);
    }

    #[test]
    fn bose_einstein_branch() {
        let m = 0.7;
        let d = displaced_thermal(0.0, m).unwrap();
        for n in 0..40 {
            let exact = m.powi(n as i32) / (1.0 + m).powi(n as i32 + 1);
            assert!((d.prob(n) - exact).abs() < 1e-14, "n = {n}: {} vs {exact}", d.prob(n));
        }
    }

    #[test]
    fn matches_direct_laguerre_evaluation() {
        for &(s, m) in &[(0.5, 0.5), (3.0, 0.2), (7.0, 1.5)] {
            let d = displaced_thermal(s, m).unwrap();
            let x = -s / (m * (1.0 + m));
            for n in 0..25 {
                let direct = m.powi(n as i32) / (1.0 + m).powi(n as i32 + 1)
                    * (-s / (1.0 + m)).exp()
                    * laguerre_series(n, x);
                assert!((d.prob(n) - direct).abs() < 1e-12 * direct.max(1e-300) + 1e-15);
            }
        }
    }

    #[test]
    fn vacuum_moments() {
        let d = displaced_thermal(0.0, 0.0).unwrap();
        assert_eq!(d.probs(), &[1.0]);
        assert_eq!(moments(&d), (0.0, 0.0));
    }

    #[test]
    fn poisson_moments() {
        for s in [0.3, 5.0, 80.0] {
            let (mean, var) = moments(&displaced_thermal(s, 0.0).unwrap());
            assert!((mean - s).abs() < 1e-10 * s.max(1.0));
            assert!((var - s).abs() < 1e-9 * s.max(1.0));
        }
    }

    #[test]
    fn closed_form_moments_agree_with_sampler() {
        // The sampler is independent of the Laguerre form; its sample moments
        // validate the closed forms used below.
        let (s, m) = (5.0, 0.5);
        let n = 1_000_000;
        let emp = sample_displaced_thermal(s, m, n, 11).unwrap();
        let (mean_cf, var_cf) = closed_form_moments(s, m);
        assert!((emp.mean() - mean_cf).abs() < 3.0 * (var_cf / n as f64).sqrt());
        // Var of the sample variance ≈ (μ4 − σ⁴)/N; bound μ4 loosely by 3σ⁴ + σ².
        let se_var = ((2.0 * var_cf * var_cf + var_cf) / n as f64).sqrt();
        assert!((emp.variance() - var_cf).abs() < 3.0 * se_var);
        let exact = displaced_thermal(s, m).unwrap();
        assert!((exact.mean() - mean_cf).abs() < 1e-12);
        assert!((exact.variance() - var_cf).abs() < 1e-10);
    }

    #[test]
    fn noiseless_sampler_is_poisson() {
        let emp = sample_displaced_thermal(3.0, 0.0, 200_000, 5).unwrap();
        let exact = displaced_thermal(3.0, 0.0).unwrap();
        assert!(emp.tv_distance(&exact) < 3.0 * expected_sampling_tv(&exact, 200_000));
    }

    #[test]
    fn thermal_sampler_mean() {
        let emp = sample_counts(0.0, 2e8, 10e-9, 400_000, 3).unwrap();
        assert!((emp.mean() - 2.0).abs() < 3.0 * (6.0f64 / 400_000.0).sqrt());
    }

    #[test]
    fn sampler_is_reproducible() {
        let a = sample_displaced_thermal(5.0, 0.5, 150_000, 42).unwrap();
        let b = sample_displaced_thermal(5.0, 0.5, 150_000, 42).unwrap();
        let c = sample_displaced_thermal(5.0, 0.5, 150_000, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn tail_is_small() {
        for &(s, m) in &[(0.5, 0.05), (50.0, 5.0), (1000.0, 100.0), (1e-3, 1e-9)] {
            let d = displaced_thermal(s, m).unwrap();
            assert!((d.total() - 1.0).abs() < 1e-9);
        }
        // Exact tails for the two closed-form branches.
        let d = displaced_thermal(50.0, 0.0).unwrap();
        let tail: f64 = (d.cutoff() + 1..d.cutoff() + 400)
            .map(|n| (-50.0 + n as f64 * 50f64.ln() - ln_factorial(n)).exp())
            .sum();
        assert!(tail < TAIL_MASS, "poisson tail {tail}");
        let m = 5.0f64;
        let d = displaced_thermal(0.0, m).unwrap();
        let tail = (m / (1.0 + m)).powi(d.cutoff() as i32 + 1);
        assert!(tail < TAIL_MASS, "geometric tail {tail}");
    }

    #[test]
    fn invalid_inputs() {
        assert!(displaced_thermal(-1.0, 0.0).is_err());
        assert!(displaced_thermal(1.0, f64::NAN).is_err());
        assert!(count_distribution(1.0, 1.0, 0.0).is_err());
        assert!(matches!(displaced_thermal(1e300, 1e300), Err(Error::Overflow { .. })));
        assert!(sample_displaced_thermal(1.0, 1.0, 0, 1).is_err());
    }

    #[test]
    fn tv_and_overlap() {
        let a = PhotonDistribution::from_probs(vec![0.5, 0.5]).unwrap();
        let b = PhotonDistribution::from_probs(vec![0.0, 0.5, 0.5]).unwrap();
        assert!((a.tv_distance(&b) - 0.5).abs() < 1e-15);
        assert!((a.overlap(&b) - 0.5).abs() < 1e-15);
        assert!((a.tv_distance(&b) + a.overlap(&b) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn limit_continuity_towards_poisson() {
        let s = 5.0;
        let poisson = displaced_thermal(s, 0.0).unwrap();
        let d6 = displaced_thermal(s, 1e-6).unwrap().tv_distance(&poisson);
        let d9 = displaced_thermal(s, 1e-9).unwrap().tv_distance(&poisson);
        assert!(d9 < d6);
        assert!(d9 < 1e-8);
    }

    proptest! {
        #[test]
        fn normalized(s in 0.0f64..1000.0, m in 0.0f64..100.0) {
            let d = displaced_thermal(s, m).unwrap();
            let total = d.total();
            prop_assert!((1.0 - 1e-9..=1.0 + 1e-12).contains(&total), "total {}", total);
            prop_assert!(d.probs().iter().all(|p| (0.0..=1.0).contains(p)));
        }

        #[test]
        fn mean_is_additive(s in 0.0f64..500.0, m in 0.0f64..50.0) {
            let d = displaced_thermal(s, m).unwrap();
            let expect = s + m;
            prop_assert!((d.mean() - expect).abs() <= 1e-8 * expect.max(1e-300) + 1e-12);
        }

        #[test]
        fn stochastic_dominance_in_signal(s in 0.0f64..60.0, ds in 0.01f64..20.0, m in 0.0f64..10.0) {
            let lo = displaced_thermal(s, m).unwrap();
            let hi = displaced_thermal(s + ds, m).unwrap();
            let mut c_lo = 0.0;
            let mut c_hi = 0.0;
            for n in 0..=lo.cutoff().max(hi.cutoff()) {
                c_lo += lo.prob(n);
                c_hi += hi.prob(n);
                prop_assert!(c_hi <= c_lo + 1e-12);
            }
        }
    }
}
