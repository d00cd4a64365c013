//! Frequency-noise spectra of resonance-frequency time series.
//!
//! Spectra are estimated with Bartlett's method (equal non-overlapping
//! segments, rectangular window, per-segment mean removal) and fitted in
//! log-log space with
//!
//! ```text
//! S(f) = S0 + S1/f^α [+ A/(1 + (f/f_c)²)]
//! ```
//!
//! Fitting uses the log of the averaged periodogram, corrected for its bias
//! (ψ(K) − ln K for K averaged segments). Models are chosen by AICc; a larger
//! model must win by [`SELECTION_MARGIN`].

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::digamma;

use crate::error::{Error, Result};
use crate::lsq::{self, LmOptions};

pub const MIN_SERIES_SAMPLES: usize = 256;
pub const MIN_SEGMENT_SAMPLES: usize = 64;
pub const MIN_FIT_BINS: usize = 8;
pub const MIN_FIT_DECADES: f64 = 1.5;
/// AICc improvement a larger model needs before it is preferred.
/// Factor by which a Lorentzian corner must sit inside the fitted band.
pub const CORNER_MARGIN: f64 = 2.0;
pub const SELECTION_MARGIN: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    /// s
    pub dt: f64,
    /// Resonance frequency samples, Hz.
    pub values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(dt: f64, values: Vec<f64>) -> Result<Self> {
        let ts = TimeSeries { dt, values };
        ts.validate()?;
        Ok(ts)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::invalid(format!("sample interval must be positive, got {}", self.dt)));
        }
        if self.values.len() < MIN_SERIES_SAMPLES {
            return Err(Error::invalid(format!(
                "time series needs at least {MIN_SERIES_SAMPLES} samples, got {}",
                self.values.len()
            )));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("time series contains non-finite values"));
        }
        Ok(())
    }

    pub fn sample_rate(&self) -> f64 {
        1.0 / self.dt
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Population variance.
    pub fn variance(&self) -> f64 {
        let n = self.values.len() as f64;
        let m = self.values.iter().sum::<f64>() / n;
        self.values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpectrum {
    /// Hz, excluding DC.
    pub frequencies: Vec<f64>,
    /// One-sided PSD, Hz²/Hz.
    pub psd: Vec<f64>,
    /// Hz/√Hz
    pub asd: Vec<f64>,
    pub n_segments: usize,
    pub segment_length: usize,
    pub normalization: String,
}

impl NoiseSpectrum {
    pub fn resolution(&self) -> f64 {
        self.frequencies[0]
    }

    /// ∫ PSD df over the positive-frequency bins.
    pub fn integrated_power(&self) -> f64 {
        self.psd.iter().sum::<f64>() * self.resolution()
    }

    /// Whether the last bin is the Nyquist bin (even segment length).
    fn has_nyquist(&self) -> bool {
        self.segment_length.is_multiple_of(2)
    }
}

/// Bartlett estimate with `n_segments` equal segments. Trailing samples that
/// do not fill a whole segment are dropped.
pub fn bartlett_psd(series: &TimeSeries, n_segments: usize) -> Result<NoiseSpectrum> {
    series.validate()?;
    if n_segments < 2 {
        return Err(Error::invalid(format!("need at least 2 segments, got {n_segments}")));
    }
    let len = series.len() / n_segments;
    if len < MIN_SEGMENT_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "{} samples give {len}-sample segments for {n_segments} segments; at least {MIN_SEGMENT_SAMPLES} are needed",
            series.len()
        )));
    }
    let fs = series.sample_rate();
    let n_bins = len / 2;
    let mut acc = vec![0.0; n_bins];
    let fft = FftPlanner::<f64>::new().plan_fft_forward(len);
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    for seg in series.values.chunks_exact(len).take(n_segments) {
        let mean = seg.iter().sum::<f64>() / len as f64;
        for (b, v) in buf.iter_mut().zip(seg) {
            *b = Complex64::new(v - mean, 0.0);
        }
        fft.process(&mut buf);
        for (k, a) in acc.iter_mut().enumerate() {
            *a += buf[k + 1].norm_sqr();
        }
    }
    let scale = 1.0 / (n_segments as f64 * fs * len as f64);
    let psd: Vec<f64> = acc
        .iter()
        .enumerate()
        .map(|(k, a)| {
            let nyquist = len.is_multiple_of(2) && k + 1 == n_bins;
            a * scale * if nyquist { 1.0 } else { 2.0 }
        })
        .collect();
    Ok(NoiseSpectrum {
        frequencies: (1..=n_bins).map(|k| k as f64 * fs / len as f64).collect(),
        asd: psd.iter().map(|p| p.sqrt()).collect(),
        psd,
        n_segments,
        segment_length: len,
        normalization: "one_sided".into(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseModelKind {
    White,
    PowerLaw,
    Lorentzian,
}

impl NoiseModelKind {
    pub fn n_params(self) -> usize {
        match self {
            NoiseModelKind::White => 1,
            NoiseModelKind::PowerLaw => 3,
            NoiseModelKind::Lorentzian => 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelScore {
    pub model: NoiseModelKind,
    pub aicc: f64,
    pub rss: f64,
    pub converged: bool,
    /// Lorentzian corners must lie inside the band by [`CORNER_MARGIN`].
    pub admissible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecadeResidual {
    /// Lower edge of the decade, Hz.
    pub f_lo: f64,
    pub n_bins: usize,
    /// RMS of ln(data) − ln(model) after bias correction.
    pub rms_log: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModelFit {
    pub model: NoiseModelKind,
    /// Hz²/Hz
    pub s0: f64,
    pub s1: f64,
    pub alpha: f64,
    pub lorentz_a: Option<f64>,
    /// Hz
    pub f_c: Option<f64>,
    pub s0_err: f64,
    pub s1_err: f64,
    pub alpha_err: f64,
    pub lorentz_a_err: Option<f64>,
    pub f_c_err: Option<f64>,
    pub aicc: f64,
    pub candidates: Vec<ModelScore>,
    pub decade_residuals: Vec<DecadeResidual>,
    pub n_bins: usize,
    pub converged: bool,
}

impl NoiseModelFit {
    pub fn psd_at(&self, f: f64) -> f64 {
        let mut p = self.s0 + self.s1 * f.powf(-self.alpha);
        if let (Some(a), Some(fc)) = (self.lorentz_a, self.f_c) {
            p += a / (1.0 + (f / fc).powi(2));
        }
        p
    }
}

/// Model ASD (Hz/√Hz) at `f` (Hz).
pub fn asd_at(fit: &NoiseModelFit, f: f64) -> f64 {
    fit.psd_at(f).sqrt()
}

fn alpha_of(u: f64) -> f64 {
    2.0 / (1.0 + (-u).exp())
}

fn alpha_inv(alpha: f64) -> f64 {
    let a = alpha.clamp(0.02, 1.98) / 2.0;
    (a / (1.0 - a)).ln()
}

/// Parameter vector: ln S0, ln S1, logit(α/2), ln A, ln f_c.
fn model_psd(kind: NoiseModelKind, p: &[f64], f: f64) -> f64 {
    let mut s = p[0].exp();
    if kind != NoiseModelKind::White {
        s += p[1].exp() * f.powf(-alpha_of(p[2]));
    }
    if kind == NoiseModelKind::Lorentzian {
        s += p[3].exp() / (1.0 + (f / p[4].exp()).powi(2));
    }
    s
}

struct Trial {
    kind: NoiseModelKind,
    report: lsq::LmReport,
    aicc: f64,
}

fn aicc(rss: f64, n: usize, k: usize) -> f64 {
    let nf = n as f64;
    let kf = k as f64;
    nf * (rss / nf).max(f64::MIN_POSITIVE).ln() + 2.0 * kf + 2.0 * kf * (kf + 1.0) / (nf - kf - 1.0).max(1.0)
}

/// Starts carried from the short prescreen to a full fit.
const REFINED_STARTS: usize = 3;
const PRESCREEN_ITERATIONS: usize = 15;

fn run_model(kind: NoiseModelKind, f: &[f64], y: &[f64], starts: &[Vec<f64>]) -> Trial {
    let opts = LmOptions {
        max_iterations: 400,
        ftol: 1e-10,
        xtol: 1e-9,
        ..Default::default()
    };
    let resid = |p: &[f64], r: &mut [f64]| {
        for ((ri, fi), yi) in r.iter_mut().zip(f).zip(y) {
            *ri = model_psd(kind, p, *fi).ln() - yi;
        }
    };
    let mut seeds: Vec<Vec<f64>> = starts.to_vec();
    if starts.len() > REFINED_STARTS {
        let short = LmOptions {
            max_iterations: PRESCREEN_ITERATIONS,
            ..opts
        };
        let mut pre: Vec<lsq::LmReport> = starts
            .iter()
            .map(|x0| lsq::minimize(resid, x0, f.len(), &short))
            .filter(|r| r.rss.is_finite())
            .collect();
        pre.sort_by(|a, b| a.rss.total_cmp(&b.rss));
        if !pre.is_empty() {
            seeds = pre.into_iter().take(REFINED_STARTS).map(|r| r.params).collect();
        }
    }
    let mut best: Option<lsq::LmReport> = None;
    for x0 in &seeds {
        let rep = lsq::minimize(resid, x0, f.len(), &opts);
        if rep.rss.is_finite() && best.as_ref().is_none_or(|b| rep.rss < b.rss) {
            best = Some(rep);
        }
    }
    let report = best.unwrap_or_else(|| lsq::minimize(resid, &starts[0], f.len(), &opts));
    let aicc = aicc(report.rss, f.len(), kind.n_params());
    Trial { kind, report, aicc }
}

fn quantile_mean(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s[s.len() / 2]
}

/// Fits the white and white + 1/f^α models, and the Lorentzian extension when
/// asked, and reports the AICc-selected one.
pub fn fit_noise_model(spectrum: &NoiseSpectrum, include_lorentzian: bool) -> Result<NoiseModelFit> {
    let n = spectrum.frequencies.len();
    if n < MIN_FIT_BINS {
        return Err(Error::InsufficientData(format!(
            "noise fit needs at least {MIN_FIT_BINS} bins, got {n}"
        )));
    }
    let f = &spectrum.frequencies;
    let decades = (f[n - 1] / f[0]).log10();
    if decades < MIN_FIT_DECADES {
        return Err(Error::InsufficientData(format!(
            "spectrum spans {decades:.2} decades; at least {MIN_FIT_DECADES} are needed"
        )));
    }
    if spectrum.psd.iter().any(|p| !(*p > 0.0)) {
        return Err(Error::invalid("spectrum has non-positive bins; the log-log fit needs a positive PSD"));
    }
    let k = spectrum.n_segments as f64;
    let bias = digamma(k) - k.ln();
    let bias_nyq = digamma(k / 2.0) + (2.0 / k).ln();
    let y: Vec<f64> = spectrum
        .psd
        .iter()
        .enumerate()
        .map(|(i, p)| p.ln() - if spectrum.has_nyquist() && i + 1 == n { bias_nyq } else { bias })
        .collect();

    // starting points
    let hi = &y[n * 3 / 4..];
    let ln_s0 = quantile_mean(hi);
    let lo_n = (n / 8).max(3);
    let ln_lo = quantile_mean(&y[..lo_n]);
    let f_lo = f[lo_n / 2];
    let white = run_model(NoiseModelKind::White, f, &y, &[vec![y.iter().sum::<f64>() / n as f64]]);
    let excess = (ln_lo.exp() - ln_s0.exp()).max(ln_lo.exp() * 1e-3);
    let pl_starts: Vec<Vec<f64>> = [0.5, 1.0, 1.5]
        .iter()
        .map(|&a: &f64| vec![ln_s0, (excess * f_lo.powf(a)).ln(), alpha_inv(a)])
        .collect();
    let power = run_model(NoiseModelKind::PowerLaw, f, &y, &pl_starts);

    let mut trials = vec![white, power];
    if include_lorentzian {
        let pp = &trials[1].report.params;
        let mut starts = Vec::new();
        let n_fc = 8;
        for j in 0..n_fc {
            let fc = f[0] * (f[n - 1] / f[0]).powf((j as f64 + 0.5) / n_fc as f64);
            let base = model_psd(NoiseModelKind::PowerLaw, pp, fc);
            for amp in [0.5, 2.0] {
                starts.push(vec![pp[0], pp[1], pp[2], (amp * base).ln(), fc.ln()]);
            }
        }
        trials.push(run_model(NoiseModelKind::Lorentzian, f, &y, &starts));
    }

    // a corner at the edge of the band is a bend in the power law, not a
    // resolved Lorentzian
    let admissible = |t: &Trial| {
        t.report.rss.is_finite()
            && (t.kind != NoiseModelKind::Lorentzian || {
                let fc = t.report.params[4].exp();
                fc >= CORNER_MARGIN * f[0] && fc <= f[n - 1] / CORNER_MARGIN
            })
    };
    let mut chosen = 0;
    for (i, t) in trials.iter().enumerate().skip(1) {
        if admissible(t) && t.aicc < trials[chosen].aicc - SELECTION_MARGIN {
            chosen = i;
        }
    }
    let candidates = trials
        .iter()
        .map(|t| ModelScore {
            model: t.kind,
            aicc: t.aicc,
            rss: t.report.rss,
            converged: t.report.converged,
            admissible: admissible(t),
        })
        .collect();
    let t = &trials[chosen];
    let p = &t.report.params;
    let se = |i: usize| t.report.std_error(i).unwrap_or(f64::NAN);
    let s0 = p[0].exp();
    let (s1, alpha, s1_err, alpha_err) = if t.kind == NoiseModelKind::White {
        (0.0, 0.0, 0.0, 0.0)
    } else {
        let a = alpha_of(p[2]);
        // dα/du = α(1 − α/2)
        (p[1].exp(), a, p[1].exp() * se(1), a * (1.0 - a / 2.0) * se(2))
    };
    let (lorentz_a, f_c, lorentz_a_err, f_c_err) = if t.kind == NoiseModelKind::Lorentzian {
        (
            Some(p[3].exp()),
            Some(p[4].exp()),
            Some(p[3].exp() * se(3)),
            Some(p[4].exp() * se(4)),
        )
    } else {
        (None, None, None, None)
    };

    let mut decade_residuals: Vec<DecadeResidual> = Vec::new();
    for (fi, yi) in f.iter().zip(&y) {
        let d = fi.log10().floor();
        let r = yi - model_psd(t.kind, p, *fi).ln();
        let f_lo = 10f64.powf(d);
        match decade_residuals.last_mut() {
            Some(last) if last.f_lo == f_lo => {
                last.n_bins += 1;
                last.rms_log += r * r;
            }
            _ => decade_residuals.push(DecadeResidual {
                f_lo,
                n_bins: 1,
                rms_log: r * r,
            }),
        }
    }
    for d in &mut decade_residuals {
        d.rms_log = (d.rms_log / d.n_bins as f64).sqrt();
    }

    Ok(NoiseModelFit {
        model: t.kind,
        s0,
        s1,
        alpha,
        lorentz_a,
        f_c,
        s0_err: s0 * se(0),
        s1_err,
        alpha_err,
        lorentz_a_err,
        f_c_err,
        aicc: t.aicc,
        candidates,
        decade_residuals,
        n_bins: n,
        converged: t.report.converged,
    })
}

/// Sum of a sinusoid's power A²/2 recovered from the spectrum around `f`.
pub fn line_power(spectrum: &NoiseSpectrum, f: f64, half_width_bins: usize) -> f64 {
    let df = spectrum.resolution();
    let k = ((f / df).round() as usize).max(1) - 1;
    let lo = k.saturating_sub(half_width_bins);
    let hi = (k + half_width_bins + 1).min(spectrum.psd.len());
    spectrum.psd[lo..hi].iter().sum::<f64>() * df
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn series(values: Vec<f64>, fs: f64) -> TimeSeries {
        TimeSeries::new(1.0 / fs, values).unwrap()
    }

    #[test]
    fn constant_series_has_zero_spectrum() {
        let s = series(vec![5.0e9; 1024], 10.0);
        let sp = bartlett_psd(&s, 4).unwrap();
        assert!(sp.psd.iter().all(|p| *p == 0.0));
        assert_eq!(sp.frequencies.len(), 128);
        assert!((sp.frequencies[0] - 10.0 / 256.0).abs() < 1e-15);
    }

    #[test]
    fn sine_line_power() {
        let fs = 100.0;
        let len = 256;
        let k = 20;
        let f = k as f64 * fs / len as f64;
        let amp = 3.0;
        let v: Vec<f64> = (0..len * 8)
            .map(|i| amp * (2.0 * PI * f * i as f64 / fs + 0.3).sin())
            .collect();
        let sp = bartlett_psd(&series(v.clone(), fs), 8).unwrap();
        let p = line_power(&sp, f, 1);
        assert!((p / (amp * amp / 2.0) - 1.0).abs() < 1e-9);
        assert!((sp.integrated_power() / series(v, fs).variance() - 1.0).abs() < 0.02);
    }

    #[test]
    fn segmentation_errors() {
        let s = series(vec![0.0; 300], 1.0);
        assert!(bartlett_psd(&s, 1).is_err());
        assert!(matches!(bartlett_psd(&s, 5), Err(Error::InsufficientData(_))));
        assert!(bartlett_psd(&s, 4).is_ok());
        assert!(TimeSeries::new(1.0, vec![0.0; 100]).is_err());
    }

    #[test]
    fn asd_scaling() {
        let mut fit = NoiseModelFit {
            model: NoiseModelKind::PowerLaw,
            s0: 0.0,
            s1: 500.0f64.powi(2) * 10.0,
            alpha: 1.0,
            lorentz_a: None,
            f_c: None,
            s0_err: 0.0,
            s1_err: 0.0,
            alpha_err: 0.0,
            lorentz_a_err: None,
            f_c_err: None,
            aicc: 0.0,
            candidates: vec![],
            decade_residuals: vec![],
            n_bins: 0,
            converged: true,
        };
        assert!((asd_at(&fit, 10.0) - 500.0).abs() < 1e-9);
        assert!((asd_at(&fit, 40.0) / asd_at(&fit, 10.0) - 0.5).abs() < 1e-12);
        fit.lorentz_a = Some(4.0);
        fit.f_c = Some(1.0);
        fit.s1 = 0.0;
        assert!((fit.psd_at(1.0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn exact_power_law_is_recovered() {
        let f: Vec<f64> = (1..=500).map(|k| k as f64 * 0.02).collect();
        let psd: Vec<f64> = f.iter().map(|x| 1.0 + 2.5e5 * x.powf(-0.9)).collect();
        // bias-free input: pretend a huge segment count
        let sp = NoiseSpectrum {
            asd: psd.iter().map(|p| p.sqrt()).collect(),
            frequencies: f,
            psd,
            n_segments: 1_000_000,
            segment_length: 1001,
            normalization: "one_sided".into(),
        };
        let fit = fit_noise_model(&sp, false).unwrap();
        assert_eq!(fit.model, NoiseModelKind::PowerLaw);
        assert!((fit.alpha - 0.9).abs() < 1e-4, "{}", fit.alpha);
        assert!((fit.s1 / 2.5e5 - 1.0).abs() < 1e-3);
    }
}
