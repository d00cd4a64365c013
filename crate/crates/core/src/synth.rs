//! Seeded generators for synthetic reflection traces, frequency time series
//! and shift curves.
//!
//! Randomness comes from ChaCha8 seeded with a 64-bit integer, so output is
//! identical across platforms for a given seed. These generators evaluate
//! their own copies of the model equations and share no code with the
//! fitters they validate.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise_psd::TimeSeries;
use crate::photon_response::ShiftCurve;
use crate::resonance_fit::ComplexTrace;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// One resonant mode seen in reflection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    /// Hz
    pub f0: f64,
    pub q_i: f64,
    pub q_c: f64,
    /// rad
    #[serde(default)]
    pub phi: f64,
}

impl Mode {
    /// Loaded Q from 1/Q_l = 1/Q_i + cos φ/Q_c.
    pub fn q_l(&self) -> f64 {
        1.0 / (1.0 / self.q_i + self.phi.cos() / self.q_c)
    }

    fn validate(&self) -> Result<()> {
        if !(self.f0 > 0.0 && self.q_i > 0.0 && self.q_c > 0.0) || !self.phi.is_finite() {
            return Err(Error::invalid("mode needs positive f0, Q_i and Q_c"));
        }
        if !(self.q_l() > 0.0) {
            return Err(Error::invalid("mode parameters give a non-positive loaded Q"));
        }
        Ok(())
    }

    /// Resonant factor 1 − (2Q_l/Q_c)·e^{iφ}·A where A is the normalized
    /// intracavity field.
    fn factor(&self, field: Complex64) -> Complex64 {
        1.0 - 2.0 * self.q_l() / self.q_c * Complex64::from_polar(1.0, self.phi) * field
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct S11Spec {
    pub seed: u64,
    pub modes: Vec<Mode>,
    pub amplitude: f64,
    /// rad
    pub phase: f64,
    /// s
    pub delay: f64,
    /// 10·log10(a²/σ²) with σ² the total complex noise variance; `None` is
    /// noiseless.
    pub snr_db: Option<f64>,
    /// Hz
    pub f_start: f64,
    /// Hz
    pub f_stop: f64,
    pub n_points: usize,
    /// Duffing parameter of the first mode in linewidths per unit normalized
    /// intensity; 0 is linear.
    #[serde(default)]
    pub kerr: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power_dbm: Option<f64>,
}

impl S11Spec {
    /// Single mode on a grid of `linewidths` loaded linewidths around f0.
    pub fn single(seed: u64, mode: Mode, snr_db: Option<f64>, linewidths: f64, n_points: usize) -> Self {
        let half = 0.5 * linewidths * mode.f0 / mode.q_l();
        S11Spec {
            seed,
            modes: vec![mode],
            amplitude: 1.0,
            phase: 0.0,
            delay: 0.0,
            snr_db,
            f_start: mode.f0 - half,
            f_stop: mode.f0 + half,
            n_points,
            kerr: 0.0,
            power_dbm: None,
        }
    }

    /// Two modes split by `splitting` Hz with coupling Qs differing by
    /// `qc_ratio`, on a grid spanning twice the splitting.
    pub fn doublet(seed: u64, f_low: f64, splitting: f64, q_i: f64, q_c_low: f64, qc_ratio: f64, snr_db: Option<f64>) -> Self {
        let modes = vec![
            Mode {
                f0: f_low,
                q_i,
                q_c: q_c_low,
                phi: 0.0,
            },
            Mode {
                f0: f_low + splitting,
                q_i,
                q_c: q_c_low * qc_ratio,
                phi: 0.0,
            },
        ];
        S11Spec {
            seed,
            modes,
            amplitude: 1.0,
            phase: 0.0,
            delay: 0.0,
            snr_db,
            f_start: f_low - 0.5 * splitting,
            f_stop: f_low + 1.5 * splitting,
            n_points: 4001,
            kerr: 0.0,
            power_dbm: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.modes.is_empty() {
            return Err(Error::invalid("s11 spec needs at least one mode"));
        }
        for m in &self.modes {
            m.validate()?;
        }
        if !(self.f_stop > self.f_start && self.f_start > 0.0) {
            return Err(Error::invalid("frequency grid needs 0 < f_start < f_stop"));
        }
        if self.n_points < crate::resonance_fit::MIN_TRACE_SAMPLES {
            return Err(Error::invalid(format!("n_points must be at least {}", crate::resonance_fit::MIN_TRACE_SAMPLES)));
        }
        if !(self.amplitude > 0.0) || !self.kerr.is_finite() || !self.delay.is_finite() {
            return Err(Error::invalid("amplitude must be positive; delay and kerr finite"));
        }
        Ok(())
    }

    pub fn frequencies(&self) -> Vec<f64> {
        let n = self.n_points;
        (0..n)
            .map(|i| self.f_start + (self.f_stop - self.f_start) * i as f64 / (n - 1) as f64)
            .collect()
    }
}

/// Normalized intensity u of a Duffing mode at detuning x (in half
/// linewidths): the root of u·(1 + (x − k·u)²) = 1 reached from `prev` by
/// safeguarded Newton, which follows the current branch of an upward sweep.
fn duffing_intensity(x: f64, k: f64, prev: f64) -> f64 {
    let h = |u: f64| u * (1.0 + (x - k * u).powi(2)) - 1.0;
    let dh = |u: f64| 1.0 + (x - k * u).powi(2) - 2.0 * k * u * (x - k * u);
    let mut u = prev.clamp(0.0, 1.0);
    for _ in 0..200 {
        let d = dh(u);
        let step = h(u) / d;
        let next = u - step;
        if !next.is_finite() || !(0.0..=1.0).contains(&next) {
            break;
        }
        u = next;
        if step.abs() < 1e-15 {
            return u;
        }
    }
    // bisection on the bracket nearest to `prev`
    let grid = 2000;
    let mut best: Option<(f64, f64)> = None;
    for i in 0..grid {
        let (a, b) = (i as f64 / grid as f64, (i + 1) as f64 / grid as f64);
        if h(a) * h(b) <= 0.0 {
            let (mut lo, mut hi) = (a, b);
            for _ in 0..80 {
                let m = 0.5 * (lo + hi);
                if h(lo) * h(m) <= 0.0 {
                    hi = m;
                } else {
                    lo = m;
                }
            }
            let r = 0.5 * (lo + hi);
            if best.is_none_or(|(_, dist)| (r - prev).abs() < dist) {
                best = Some((r, (r - prev).abs()));
            }
        }
    }
    best.map_or(u, |(r, _)| r)
}

/// Reflection trace for `spec`. Modes multiply as cascaded one-port
/// responses; noise is circular complex Gaussian.
pub fn synth_s11(spec: &S11Spec) -> Result<ComplexTrace> {
    spec.validate()?;
    let freqs = spec.frequencies();
    let mut rng = rng(spec.seed);
    let sigma = spec
        .snr_db
        .map_or(0.0, |snr| spec.amplitude * 10f64.powf(-snr / 20.0));
    let mut u_prev = 0.0;
    let mut s11 = Vec::with_capacity(freqs.len());
    for &f in &freqs {
        let mut s = Complex64::from_polar(spec.amplitude, spec.phase - 2.0 * PI * f * spec.delay);
        for (j, m) in spec.modes.iter().enumerate() {
            let x = 2.0 * m.q_l() * (f / m.f0 - 1.0);
            let field = if j == 0 && spec.kerr != 0.0 {
                let u = duffing_intensity(x, spec.kerr, u_prev);
                u_prev = u;
                1.0 / Complex64::new(1.0, x - spec.kerr * u)
            } else {
                1.0 / Complex64::new(1.0, x)
            };
            s *= m.factor(field);
        }
        if sigma > 0.0 {
            let s2 = sigma / 2f64.sqrt();
            s += Complex64::new(s2 * normal(&mut rng), s2 * normal(&mut rng));
        }
        s11.push(s);
    }
    ComplexTrace::new(freqs, s11, spec.power_dbm)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesSpec {
    pub seed: u64,
    /// Hz
    pub sample_rate: f64,
    pub n_samples: usize,
    /// Hz²/Hz
    pub s0: f64,
    pub s1: f64,
    pub alpha: f64,
    #[serde(default)]
    pub lorentz_a: f64,
    /// Hz
    #[serde(default = "one")]
    pub f_c: f64,
    /// Mean resonance frequency added to the fluctuations, Hz.
    #[serde(default)]
    pub mean_hz: f64,
}

fn one() -> f64 {
    1.0
}

impl TimeSeriesSpec {
    /// One-sided target PSD at f > 0.
    pub fn psd(&self, f: f64) -> f64 {
        self.s0 + self.s1 * f.powf(-self.alpha) + self.lorentz_a / (1.0 + (f / self.f_c).powi(2))
    }

    /// S1 giving a 1/f^α-only ASD of `asd` Hz/√Hz at `f` Hz.
    pub fn s1_for_asd(asd: f64, f: f64, alpha: f64) -> f64 {
        asd * asd * f.powf(alpha)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples < 1024 {
            return Err(Error::invalid("time-series synthesis needs at least 1024 samples"));
        }
        if !(self.sample_rate > 0.0) {
            return Err(Error::invalid("sample rate must be positive"));
        }
        if self.s0 < 0.0 || self.s1 < 0.0 || self.lorentz_a < 0.0 || !(0.0..=2.0).contains(&self.alpha) {
            return Err(Error::invalid("amplitudes must be non-negative and α in [0, 2]"));
        }
        if !(self.f_c > 0.0) {
            return Err(Error::invalid("Lorentzian corner must be positive"));
        }
        Ok(())
    }
}

/// Spectral synthesis: independent complex Gaussian Fourier coefficients
/// with E|X_k|² = P(f_k)·fs·N/2 (real Nyquist bin with E X² = P·fs·N), zero
/// DC, Hermitian completion and inverse DFT.
pub fn synth_timeseries(spec: &TimeSeriesSpec) -> Result<TimeSeries> {
    spec.validate()?;
    let n = spec.n_samples;
    let fs = spec.sample_rate;
    let mut rng = rng(spec.seed);
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    for k in 1..=n / 2 {
        let f = k as f64 * fs / n as f64;
        let p = spec.psd(f);
        if n.is_multiple_of(2) && k == n / 2 {
            x[k] = Complex64::new((p * fs * n as f64).sqrt() * normal(&mut rng), 0.0);
        } else {
            let s = (p * fs * n as f64 / 4.0).sqrt();
            x[k] = Complex64::new(s * normal(&mut rng), s * normal(&mut rng));
            x[n - k] = x[k].conj();
        }
    }
    FftPlanner::<f64>::new().plan_fft_inverse(n).process(&mut x);
    let values = x.iter().map(|v| spec.mean_hz + v.re / n as f64).collect();
    TimeSeries::new(1.0 / fs, values)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftCurveSpec {
    pub seed: u64,
    /// Hz/photon
    pub k11: f64,
    /// Hz
    #[serde(default)]
    pub amplitude: f64,
    /// photons
    #[serde(default = "ten")]
    pub n_c: f64,
    /// Hz
    pub sigma: f64,
    pub n_lo: f64,
    pub n_hi: f64,
    pub n_points: usize,
}

fn ten() -> f64 {
    10.0
}

impl ShiftCurveSpec {
    pub fn model(&self, n: f64) -> f64 {
        self.amplitude * (1.0 - (-n / self.n_c).exp()) + self.k11 * n
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.n_lo > 0.0 && self.n_hi > self.n_lo) || self.n_points < 2 {
            return Err(Error::invalid("shift curve needs 0 < n_lo < n_hi and at least 2 points"));
        }
        if !(self.n_c > 0.0) || self.sigma < 0.0 {
            return Err(Error::invalid("n_c must be positive and σ non-negative"));
        }
        Ok(())
    }
}

/// Logarithmic n̄ grid, model plus Gaussian noise, re-zeroed on the first
/// point. Per-point σ is attached when noise is present.
pub fn synth_shift_curve(spec: &ShiftCurveSpec) -> Result<ShiftCurve> {
    spec.validate()?;
    let mut rng = rng(spec.seed);
    let k = spec.n_points;
    let n_bar: Vec<f64> = (0..k)
        .map(|i| spec.n_lo * (spec.n_hi / spec.n_lo).powf(i as f64 / (k - 1) as f64))
        .collect();
    let df: Vec<f64> = n_bar
        .iter()
        .map(|&n| spec.model(n) + spec.sigma * normal(&mut rng))
        .collect();
    let sigma = (spec.sigma > 0.0).then(|| vec![spec.sigma; k]);
    ShiftCurve::new(n_bar, df, sigma)
}

/// Any generator, tagged for serialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum SynthSpec {
    S11(S11Spec),
    Doublet(S11Spec),
    Timeseries(TimeSeriesSpec),
    Shiftcurve(ShiftCurveSpec),
}
