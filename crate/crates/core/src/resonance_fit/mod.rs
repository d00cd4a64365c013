//! One-port reflection fitting: resonance frequency, loaded, coupling and
//! internal quality factors, impedance-mismatch angle and a Q_i uncertainty
//! band.
//!
//! The fitted model is
//!
//! ```text
//! S11(f) = a·e^{iθ}·e^{−2πifτ}·[1 − (2Q_l/Q_c)·e^{iφ} / (1 + 2iQ_l(f/f0 − 1))]
//! ```
//!
//! with 1/Q_l = 1/Q_i + cos(φ)/Q_c.

pub mod circle;
mod doublet;
mod power;

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lsq::{self, LmOptions};

pub use doublet::{detect_doublet, TraceWindow};
pub use power::{photon_number, qi_vs_power, Bifurcation, PowerPoint, PowerSweep};

pub const MIN_TRACE_SAMPLES: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexTrace {
    /// Hz, strictly increasing.
    pub frequencies: Vec<f64>,
    pub s11: Vec<Complex64>,
    /// Drive power at the device, dBm.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub power_dbm: Option<f64>,
}

impl ComplexTrace {
    pub fn new(frequencies: Vec<f64>, s11: Vec<Complex64>, power_dbm: Option<f64>) -> Result<Self> {
        let t = ComplexTrace {
            frequencies,
            s11,
            power_dbm,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.frequencies.len() != self.s11.len() {
            return Err(Error::invalid(format!(
                "frequency and S11 arrays differ in length ({} vs {})",
                self.frequencies.len(),
                self.s11.len()
            )));
        }
        if self.frequencies.len() < MIN_TRACE_SAMPLES {
            return Err(Error::invalid(format!(
                "trace needs at least {MIN_TRACE_SAMPLES} samples, got {}",
                self.frequencies.len()
            )));
        }
        if let Some(i) = self.frequencies.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::invalid(format!("frequencies not strictly increasing at sample {}", i + 1)));
        }
        if self.frequencies.iter().any(|f| !f.is_finite())
            || self.s11.iter().any(|z| !(z.re.is_finite() && z.im.is_finite()))
        {
            return Err(Error::invalid("trace contains non-finite values"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    pub fn span(&self) -> f64 {
        self.frequencies[self.len() - 1] - self.frequencies[0]
    }

    pub fn slice(&self, range: std::ops::Range<usize>) -> Result<ComplexTrace> {
        ComplexTrace::new(
            self.frequencies[range.clone()].to_vec(),
            self.s11[range].to_vec(),
            self.power_dbm,
        )
    }
}

/// How the Q_i band treats the fitted mismatch angle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FanoBandMode {
    /// Q_i over φ swept through its fitted value ± 1σ, widened at each end by
    /// the 95% statistical half-width of Q_i.
    #[default]
    Statistical,
    /// Additionally sweeps φ over [−|φ_fit|, +|φ_fit|].
    WorstCase,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub band_mode: FanoBandMode,
    /// Fraction of the span on each side used for the initial delay estimate.
    pub wing_fraction: f64,
    /// Coverage factor of the statistical part of the Q_i band.
    pub band_sigma: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            band_mode: FanoBandMode::Statistical,
            wing_fraction: 0.2,
            band_sigma: 1.96,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResonanceFit {
    /// Hz
    pub f0: f64,
    pub q_l: f64,
    pub q_c: f64,
    pub q_i: f64,
    /// [min, max]; the upper edge is infinite when the band admits an
    /// internally lossless resonator (serialized as `null`).
    pub q_i_band: [f64; 2],
    /// rad
    pub phi: f64,
    pub amplitude: f64,
    /// rad
    pub phase: f64,
    /// s
    pub delay: f64,
    /// RMS of |model − data|, in S11 units.
    pub residual_rms: f64,
    /// `residual_rms / amplitude`.
    pub residual_rms_relative: f64,
    pub f0_err: f64,
    pub q_l_err: f64,
    pub q_c_err: f64,
    pub q_i_err: f64,
    pub phi_err: f64,
    /// Noise level estimated from sample-to-sample differences.
    pub noise_rms: f64,
    pub n_points: usize,
    pub iterations: usize,
}

impl ResonanceFit {
    /// Evaluates the fitted model at `f` (Hz).
    pub fn model(&self, f: f64) -> Complex64 {
        reflection(f, self.f0, self.q_l, self.q_c, self.phi, self.amplitude, self.phase, self.delay)
    }

    /// Internal Q implied by a mismatch angle `phi` with the fitted Q_l, Q_c.
    pub fn q_i_at(&self, phi: f64) -> f64 {
        q_i_from(self.q_l, self.q_c, phi.cos())
    }
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn reflection(f: f64, f0: f64, q_l: f64, q_c: f64, phi: f64, a: f64, theta: f64, tau: f64) -> Complex64 {
    let env = Complex64::from_polar(a, theta - 2.0 * PI * f * tau);
    let x = 2.0 * q_l * (f / f0 - 1.0);
    env * (1.0 - (2.0 * q_l / q_c) * Complex64::from_polar(1.0, phi) / Complex64::new(1.0, x))
}

fn q_i_from(q_l: f64, q_c: f64, cos_phi: f64) -> f64 {
    let inv = 1.0 / q_l - cos_phi / q_c;
    if inv > 0.0 {
        1.0 / inv
    } else {
        f64::INFINITY
    }
}

fn wrap(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y == -PI {
        PI
    } else {
        y
    }
}

fn unwrap_phase(z: &[Complex64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(z.len());
    let mut prev = z[0].arg();
    out.push(prev);
    for w in z.windows(2) {
        let d = wrap(w[1].arg() - w[0].arg());
        prev += d;
        out.push(prev);
    }
    out
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// RMS of complex white noise estimated from adjacent-sample differences.
///
/// |z_{i+1} − z_i| is Rayleigh with scale σ for noise of E|n|² = σ², whose
/// median is σ·sqrt(2 ln 2).
pub(crate) fn noise_rms(z: &[Complex64]) -> f64 {
    let diffs: Vec<f64> = z.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
    median(diffs) / (2.0 * std::f64::consts::LN_2).sqrt()
}

/// Delay from the unwrapped phase slope of the off-resonant wings, fitting a
/// common slope with a separate offset per wing.
fn wing_delay(freqs: &[f64], z: &[Complex64], wing_fraction: f64) -> f64 {
    let n = freqs.len();
    let k = ((n as f64 * wing_fraction).round() as usize).clamp(3, n / 2);
    let phase = unwrap_phase(z);
    let mut num = 0.0;
    let mut den = 0.0;
    for range in [0..k, n - k..n] {
        let fm = freqs[range.clone()].iter().sum::<f64>() / k as f64;
        let pm = phase[range.clone()].iter().sum::<f64>() / k as f64;
        for i in range {
            num += (freqs[i] - fm) * (phase[i] - pm);
            den += (freqs[i] - fm).powi(2);
        }
    }
    -(num / den) / (2.0 * PI)
}

fn remove_delay(freqs: &[f64], z: &[Complex64], tau: f64, f_ref: f64) -> Vec<Complex64> {
    freqs
        .iter()
        .zip(z)
        .map(|(f, v)| v * Complex64::from_polar(1.0, 2.0 * PI * (f - f_ref) * tau))
        .collect()
}

fn circle_residual_at(freqs: &[f64], z: &[Complex64], tau: f64, f_ref: f64) -> f64 {
    let zz = remove_delay(freqs, z, tau, f_ref);
    match circle::algebraic_fit(&zz) {
        // absolute, not radius-normalized: a wrong delay bends the background
        // into a large arc that would otherwise score well
        Some(c) => c.normalized_residual(&zz) * c.radius * c.radius,
        None => f64::INFINITY,
    }
}

/// Delay that makes the delay-corrected trace most circular, searched
/// around the wing estimate.
fn refine_delay(freqs: &[f64], z: &[Complex64], tau0: f64, f_ref: f64) -> f64 {
    let span = freqs[freqs.len() - 1] - freqs[0];
    let half = 0.5 / span;
    let steps = 40;
    let (mut best, mut best_val) = (tau0, circle_residual_at(freqs, z, tau0, f_ref));
    for i in 0..=steps {
        let t = tau0 - half + 2.0 * half * i as f64 / steps as f64;
        let v = circle_residual_at(freqs, z, t, f_ref);
        if v < best_val {
            best = t;
            best_val = v;
        }
    }
    let step = 2.0 * half / steps as f64;
    lsq::golden_min(|t| circle_residual_at(freqs, z, t, f_ref), best - step, best + step, step * 1e-6)
}

struct PhaseFit {
    theta0: f64,
    q_l: f64,
    f0: f64,
}

/// Fits θ(f) = θ0 + 2·atan(2Q_l(1 − f/f0)) to the phase about the circle
/// center.
fn fit_phase(freqs: &[f64], w: &[Complex64], f0_guess: f64, q_guess: f64, theta_guess: f64) -> Option<PhaseFit> {
    let lw = f0_guess / q_guess;
    let phases: Vec<f64> = w.iter().map(|v| v.arg()).collect();
    let resid = |p: &[f64], r: &mut [f64]| {
        let q = p[1].exp() * q_guess;
        let f0 = f0_guess + p[2] * lw;
        for ((ri, f), ph) in r.iter_mut().zip(freqs).zip(&phases) {
            *ri = wrap(ph - (p[0] + 2.0 * (2.0 * q * (1.0 - f / f0)).atan()));
        }
    };
    let opts = LmOptions {
        max_iterations: 100,
        ..Default::default()
    };
    let mut best: Option<lsq::LmReport> = None;
    for lnq in [0.0, -0.7, 0.7] {
        let rep = lsq::minimize(resid, &[theta_guess, lnq, 0.0], freqs.len(), &opts);
        if best.as_ref().is_none_or(|b| rep.rss < b.rss) {
            best = Some(rep);
        }
    }
    let p = best?.params;
    Some(PhaseFit {
        theta0: p[0],
        q_l: p[1].exp() * q_guess,
        f0: f0_guess + p[2] * lw,
    })
}

/// Fits a single-resonance reflection trace with default options.
pub fn fit_reflection(trace: &ComplexTrace) -> Result<ResonanceFit> {
    fit_reflection_with(trace, &FitOptions::default())
}

pub fn fit_reflection_with(trace: &ComplexTrace, opts: &FitOptions) -> Result<ResonanceFit> {
    trace.validate()?;
    let freqs = &trace.frequencies;
    let z = &trace.s11;
    let n = freqs.len();
    let f_ref = 0.5 * (freqs[0] + freqs[n - 1]);
    let span = trace.span();
    let noise = noise_rms(z);

    // delay, then circle
    let tau0 = wing_delay(freqs, z, opts.wing_fraction);
    let tau = refine_delay(freqs, z, tau0, f_ref);
    let zc = remove_delay(freqs, z, tau, f_ref);
    let circ = circle::fit(&zc).ok_or_else(|| Error::NoResonance("degenerate circle fit".into()))?;
    if !(circ.radius > 2.5 * noise) || !circ.radius.is_finite() {
        return Err(Error::NoResonance(format!(
            "circle radius {:.3e} is below the noise floor {:.3e}",
            circ.radius, noise
        )));
    }

    // off-resonant point guess from both trace ends
    let k = (n / 20).max(2);
    let ends = (zc[..k].iter().sum::<Complex64>() + zc[n - k..].iter().sum::<Complex64>()) / (2 * k) as f64;
    let dist: Vec<f64> = zc.iter().map(|v| (v - ends).norm()).collect();
    let smooth: Vec<f64> = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(2);
            let hi = (i + 3).min(n);
            dist[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect();
    let (i_peak, &d_peak) = smooth
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty trace");
    let f0_guess = freqs[i_peak];
    let half = d_peak / 2f64.sqrt();
    let lo = (0..=i_peak).rev().find(|&i| smooth[i] < half).unwrap_or(0);
    let hi = (i_peak..n).find(|&i| smooth[i] < half).unwrap_or(n - 1);
    let fwhm = (freqs[hi] - freqs[lo]).max(span / n as f64);
    let q_guess = f0_guess / fwhm;
    let w: Vec<Complex64> = zc.iter().map(|v| v - circ.center).collect();
    let theta_guess = (ends - circ.center).arg() - PI;

    let ph = fit_phase(freqs, &w, f0_guess, q_guess, theta_guess)
        .ok_or_else(|| Error::NonConvergence {
            iterations: 0,
            message: "phase fit failed".into(),
        })?;
    let off = circ.center + Complex64::from_polar(circ.radius, ph.theta0 + PI);
    let a0 = off.norm();
    let c_norm = circ.center / off;
    let phi0 = (1.0 - c_norm).arg();
    let r_norm = circ.radius / a0;
    let q_c0 = ph.q_l / r_norm;

    // full-model refinement; parameters scaled to order one
    let lw = ph.f0 / ph.q_l;
    let data: Vec<Complex64> = z.iter().map(|v| v / a0).collect();
    let theta_ref0 = off.arg();
    let model = move |p: &[f64], f: f64| -> Complex64 {
        let f0 = ph.f0 + p[0] * lw;
        let q_l = ph.q_l * p[1].exp();
        let q_c = q_c0 * p[2].exp();
        let env = Complex64::from_polar(p[4].exp(), theta_ref0 + p[5] - p[6] * (f - f_ref) / span);
        let x = 2.0 * q_l * (f / f0 - 1.0);
        env * (1.0 - (2.0 * q_l / q_c) * Complex64::from_polar(1.0, p[3]) / Complex64::new(1.0, x))
    };
    let resid = |p: &[f64], r: &mut [f64]| {
        for (i, (f, d)) in freqs.iter().zip(&data).enumerate() {
            let m = model(p, *f) - d;
            r[2 * i] = m.re;
            r[2 * i + 1] = m.im;
        }
    };
    let x0 = [0.0, 0.0, 0.0, phi0, 0.0, 0.0, 2.0 * PI * span * tau];
    let rep = lsq::minimize(resid, &x0, 2 * n, &LmOptions::default());
    if !rep.converged || rep.params.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonConvergence {
            iterations: rep.iterations,
            message: "reflection model refinement diverged".into(),
        });
    }
    let p = &rep.params;
    let f0 = ph.f0 + p[0] * lw;
    let q_l = ph.q_l * p[1].exp();
    let q_c = q_c0 * p[2].exp();
    let phi = wrap(p[3]);
    let amplitude = a0 * p[4].exp();
    let delay = p[6] / (2.0 * PI * span);
    let phase = wrap(theta_ref0 + p[5] + 2.0 * PI * f_ref * delay);

    if !(f0 >= freqs[0] && f0 <= freqs[n - 1]) {
        return Err(Error::NoResonance(format!("fitted f0 {f0:.6e} Hz lies outside the trace")));
    }
    let diameter = 2.0 * q_l / q_c * amplitude;
    if !(diameter > 5.0 * noise) {
        return Err(Error::NoResonance(format!(
            "resonance circle diameter {diameter:.3e} is below the noise floor {noise:.3e}"
        )));
    }
    let inv_qi = 1.0 / q_l - phi.cos() / q_c;
    if !(inv_qi > 0.0) {
        return Err(Error::NonConvergence {
            iterations: rep.iterations,
            message: format!("non-physical fit: 1/Q_l − cos(φ)/Q_c = {inv_qi:.3e} ≤ 0"),
        });
    }
    let q_i = 1.0 / inv_qi;

    let cov = rep.covariance.clone();
    let var = |i: usize| cov.as_ref().map_or(f64::NAN, |c| c[(i, i)].max(0.0));
    let cv = |i: usize, j: usize| cov.as_ref().map_or(f64::NAN, |c| c[(i, j)]);
    let f0_err = var(0).sqrt() * lw;
    let q_l_err = var(1).sqrt() * q_l;
    let q_c_err = var(2).sqrt() * q_c;
    let phi_err = var(3).sqrt();
    // delta method on 1/Q_i over (ln Q_l, ln Q_c, φ)
    let g = [-1.0 / q_l, phi.cos() / q_c, phi.sin() / q_c];
    let idx = [1, 2, 3];
    let mut var_inv = 0.0;
    for a in 0..3 {
        for b in 0..3 {
            var_inv += g[a] * g[b] * cv(idx[a], idx[b]);
        }
    }
    let q_i_err = q_i * q_i * var_inv.max(0.0).sqrt();

    let q_i_band = q_i_band(q_l, q_c, phi, phi_err, q_i, q_i_err, opts);
    let residual_rms = (rep.rss / n as f64).sqrt() * a0;

    Ok(ResonanceFit {
        f0,
        q_l,
        q_c,
        q_i,
        q_i_band,
        phi,
        amplitude,
        phase,
        delay,
        residual_rms,
        residual_rms_relative: residual_rms / amplitude,
        f0_err,
        q_l_err,
        q_c_err,
        q_i_err,
        phi_err,
        noise_rms: noise,
        n_points: n,
        iterations: rep.iterations,
    })
}

fn cos_range(lo: f64, hi: f64) -> (f64, f64) {
    let (c1, c2) = (lo.cos(), hi.cos());
    let mut cmin = c1.min(c2);
    let mut cmax = c1.max(c2);
    // interior extrema of cos at multiples of π
    let k_lo = (lo / PI).ceil() as i64;
    let k_hi = (hi / PI).floor() as i64;
    for k in k_lo..=k_hi {
        let c = if k % 2 == 0 { 1.0 } else { -1.0 };
        cmin = cmin.min(c);
        cmax = cmax.max(c);
    }
    (cmin, cmax)
}

fn q_i_band(q_l: f64, q_c: f64, phi: f64, phi_err: f64, q_i: f64, q_i_err: f64, opts: &FitOptions) -> [f64; 2] {
    let phi_err = if phi_err.is_finite() { phi_err } else { 0.0 };
    let (mut cmin, mut cmax) = cos_range(phi - phi_err, phi + phi_err);
    if opts.band_mode == FanoBandMode::WorstCase {
        let (a, b) = cos_range(-phi.abs(), phi.abs());
        cmin = cmin.min(a);
        cmax = cmax.max(b);
    }
    // Q_i grows with cos φ
    let mut lo = q_i_from(q_l, q_c, cmin).min(q_i);
    let mut hi = q_i_from(q_l, q_c, cmax).max(q_i);
    // systematic (φ) range widened by the statistical margin at each end
    if q_i_err.is_finite() {
        lo -= opts.band_sigma * q_i_err;
        hi += opts.band_sigma * q_i_err;
    }
    [lo.max(q_i * 1e-3), hi]
}
