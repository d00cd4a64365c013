//! Frequency shift versus mean photon number: self-Kerr coefficient, the
//! low-photon anomalous shift, and K11 ∝ ρ/V comparisons between devices.
//!
//! The anomalous shift is modeled as a saturating exponential added to the
//! Kerr line, Δf = A·(1 − e^{−n̄/n_c}) + K11·n̄ + b. This is a detection
//! convention, not a physical model.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lsq;
use crate::ring_model::RingGeometry;

pub const MIN_KERR_POINTS: usize = 3;
pub const MIN_ANOMALY_POINTS: usize = 8;
pub const MIN_ANOMALY_DECADES: f64 = 2.0;
/// Required |A|/σ_A.
pub const ANOMALY_SIGNIFICANCE: f64 = 3.0;
/// AICc improvement the saturating model needs over the line.
pub const SELECTION_MARGIN: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftCurve {
    /// Strictly increasing, positive.
    pub n_bar: Vec<f64>,
    /// Hz, relative to the first (lowest-power) point.
    pub df_hz: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_hz: Option<Vec<f64>>,
}

impl ShiftCurve {
    /// Builds a curve, re-referencing the shifts to the first point.
    pub fn new(n_bar: Vec<f64>, df_hz: Vec<f64>, sigma_hz: Option<Vec<f64>>) -> Result<Self> {
        if n_bar.len() != df_hz.len() {
            return Err(Error::invalid(format!(
                "n̄ and Δf differ in length ({} vs {})",
                n_bar.len(),
                df_hz.len()
            )));
        }
        if n_bar.is_empty() {
            return Err(Error::invalid("empty shift curve"));
        }
        if let Some(s) = &sigma_hz {
            if s.len() != n_bar.len() {
                return Err(Error::invalid("σ column length differs from n̄"));
            }
            if s.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
                return Err(Error::invalid("uncertainties must be positive"));
            }
        }
        if n_bar.iter().any(|n| !(*n > 0.0) || !n.is_finite()) {
            return Err(Error::invalid("n̄ must be positive and finite"));
        }
        if let Some(i) = n_bar.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::invalid(format!("n̄ not strictly increasing at point {}", i + 1)));
        }
        if df_hz.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("Δf contains non-finite values"));
        }
        let d0 = df_hz[0];
        Ok(ShiftCurve {
            n_bar,
            df_hz: df_hz.iter().map(|v| v - d0).collect(),
            sigma_hz,
        })
    }

    pub fn len(&self) -> usize {
        self.n_bar.len()
    }

    pub fn is_empty(&self) -> bool {
        self.n_bar.is_empty()
    }

    fn weight(&self, i: usize) -> f64 {
        self.sigma_hz.as_ref().map_or(1.0, |s| 1.0 / (s[i] * s[i]))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnomalousShift {
    /// `None` when the saturating fit could not be evaluated.
    pub present: Option<bool>,
    /// Hz; negative when the mode shifts down first.
    pub amplitude: f64,
    pub amplitude_err: f64,
    /// photons
    pub n_c: f64,
    pub n_c_err: f64,
    /// Hz/photon, from the saturating model.
    pub k11: f64,
    pub k11_err: f64,
    pub aicc_linear: f64,
    pub aicc_saturating: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KerrFit {
    /// Hz/photon
    pub k11: f64,
    pub k11_err: f64,
    /// Hz
    pub intercept: f64,
    pub intercept_err: f64,
    /// [n̄_lo, n̄_hi] of the points used.
    pub window: [f64; 2],
    pub n_points: usize,
    /// Hz
    pub residual_rms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anomalous: Option<AnomalousShift>,
}

struct LineFit {
    slope: f64,
    slope_err: f64,
    intercept: f64,
    intercept_err: f64,
    rss: f64,
}

/// Weighted straight line. Absolute weights when the curve carries σ,
/// otherwise errors scaled by the residual variance.
fn line_fit(curve: &ShiftCurve, idx: &[usize]) -> LineFit {
    let w: Vec<f64> = idx.iter().map(|&i| curve.weight(i)).collect();
    let x: Vec<f64> = idx.iter().map(|&i| curve.n_bar[i]).collect();
    let y: Vec<f64> = idx.iter().map(|&i| curve.df_hz[i]).collect();
    let sw: f64 = w.iter().sum();
    let xm = w.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() / sw;
    let ym = w.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() / sw;
    let sxx: f64 = w.iter().zip(&x).map(|(a, b)| a * (b - xm).powi(2)).sum();
    let sxy: f64 = w.iter().zip(&x).zip(&y).map(|((a, b), c)| a * (b - xm) * (c - ym)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = ym - slope * xm;
    let rss: f64 = w
        .iter()
        .zip(&x)
        .zip(&y)
        .map(|((a, b), c)| a * (c - intercept - slope * b).powi(2))
        .sum();
    let dof = idx.len().saturating_sub(2).max(1) as f64;
    let s2 = if curve.sigma_hz.is_some() { 1.0 } else { rss / dof };
    LineFit {
        slope,
        slope_err: (s2 / sxx).sqrt(),
        intercept,
        intercept_err: (s2 * (1.0 / sw + xm * xm / sxx)).sqrt(),
        rss,
    }
}

fn rms(curve: &ShiftCurve, idx: &[usize], f: impl Fn(f64) -> f64) -> f64 {
    let ss: f64 = idx.iter().map(|&i| (curve.df_hz[i] - f(curve.n_bar[i])).powi(2)).sum();
    (ss / idx.len() as f64).sqrt()
}

/// Linear fit Δf = K11·n̄ + b over the points with n̄ ≥ `n_threshold`.
pub fn fit_kerr(curve: &ShiftCurve, n_threshold: f64) -> Result<KerrFit> {
    let idx: Vec<usize> = (0..curve.len()).filter(|&i| curve.n_bar[i] >= n_threshold).collect();
    if idx.len() < MIN_KERR_POINTS {
        return Err(Error::InsufficientData(format!(
            "{} points at n̄ ≥ {n_threshold}; at least {MIN_KERR_POINTS} are needed",
            idx.len()
        )));
    }
    let l = line_fit(curve, &idx);
    Ok(KerrFit {
        k11: l.slope,
        k11_err: l.slope_err,
        intercept: l.intercept,
        intercept_err: l.intercept_err,
        window: [curve.n_bar[idx[0]], curve.n_bar[idx[idx.len() - 1]]],
        n_points: idx.len(),
        residual_rms: rms(curve, &idx, |n| l.intercept + l.slope * n),
        anomalous: None,
    })
}

/// Default lower edge of the Kerr window: 10·n_c when an anomalous shift is
/// present, the median n̄ otherwise.
pub fn default_threshold(curve: &ShiftCurve, anomaly: Option<&AnomalousShift>) -> f64 {
    match anomaly {
        Some(a) if a.present == Some(true) => 10.0 * a.n_c,
        _ => {
            let n = curve.len();
            if n % 2 == 1 {
                curve.n_bar[n / 2]
            } else {
                0.5 * (curve.n_bar[n / 2 - 1] + curve.n_bar[n / 2])
            }
        }
    }
}

/// Runs anomaly detection when the curve allows it, then fits the Kerr line
/// above the default threshold.
pub fn fit_kerr_auto(curve: &ShiftCurve) -> Result<KerrFit> {
    let anomaly = if curve.len() >= MIN_ANOMALY_POINTS && decades(curve) >= MIN_ANOMALY_DECADES {
        Some(detect_anomalous_shift(curve)?)
    } else {
        None
    };
    let mut fit = fit_kerr(curve, default_threshold(curve, anomaly.as_ref()))?;
    fit.anomalous = anomaly;
    Ok(fit)
}

fn decades(curve: &ShiftCurve) -> f64 {
    (curve.n_bar[curve.len() - 1] / curve.n_bar[0]).log10()
}

fn aicc(rss: f64, n: usize, k: usize) -> f64 {
    let nf = n as f64;
    let kf = k as f64;
    nf * (rss / nf).max(f64::MIN_POSITIVE).ln() + 2.0 * kf + 2.0 * kf * (kf + 1.0) / (nf - kf - 1.0).max(1.0)
}

/// Weighted least squares for (A, K, b) at fixed n_c; returns the rss.
fn saturating_at(curve: &ShiftCurve, n_c: f64) -> Option<([f64; 3], f64)> {
    let n = curve.len();
    let mut a = nalgebra::DMatrix::zeros(n, 3);
    let mut y = nalgebra::DVector::zeros(n);
    for i in 0..n {
        let s = curve.weight(i).sqrt();
        let x = curve.n_bar[i];
        a[(i, 0)] = s * (1.0 - (-x / n_c).exp());
        a[(i, 1)] = s * x;
        a[(i, 2)] = s;
        y[i] = s * curve.df_hz[i];
    }
    let sol = a.clone().svd(true, true).solve(&y, 1e-12).ok()?;
    let rss = (a * &sol - y).norm_squared();
    Some(([sol[0], sol[1], sol[2]], rss))
}

/// Compares the saturating-plus-linear model with the plain line. The
/// anomaly is declared present when |A| ≥ 3σ_A, n_c lies inside the sampled
/// n̄ range, and the saturating model wins by the AICc margin.
pub fn detect_anomalous_shift(curve: &ShiftCurve) -> Result<AnomalousShift> {
    let n = curve.len();
    if n < MIN_ANOMALY_POINTS {
        return Err(Error::InsufficientData(format!(
            "anomaly detection needs at least {MIN_ANOMALY_POINTS} points, got {n}"
        )));
    }
    if decades(curve) < MIN_ANOMALY_DECADES {
        return Err(Error::InsufficientData(format!(
            "n̄ spans {:.2} decades; at least {MIN_ANOMALY_DECADES} are needed",
            decades(curve)
        )));
    }
    let all: Vec<usize> = (0..n).collect();
    let line = line_fit(curve, &all);
    let aicc_linear = aicc(line.rss, n, 2);

    // n_c by grid then golden section on the profiled rss; A, K, b are
    // linear at fixed n_c
    let n_lo = curve.n_bar[0];
    let n_hi = curve.n_bar[n - 1];
    let grid = 80;
    let (u_lo, u_hi) = ((n_lo / 3.0).ln(), (3.0 * n_hi).ln());
    let u_at = |j: usize| u_lo + (u_hi - u_lo) * j as f64 / grid as f64;
    let profile = |u: f64| saturating_at(curve, u.exp()).map_or(f64::INFINITY, |(_, rss)| rss);
    let j_best = (0..=grid)
        .map(|j| (j, profile(u_at(j))))
        .filter(|(_, r)| r.is_finite())
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(j, _)| j);
    let undetermined = |msg: &str| AnomalousShift {
        present: None,
        amplitude: f64::NAN,
        amplitude_err: f64::NAN,
        n_c: f64::NAN,
        n_c_err: f64::NAN,
        k11: line.slope,
        k11_err: line.slope_err,
        aicc_linear,
        aicc_saturating: f64::NAN,
        diagnostic: Some(msg.to_string()),
    };
    let Some(j) = j_best else {
        return Ok(undetermined("saturating model could not be evaluated"));
    };
    let u = lsq::golden_min(profile, u_at(j.saturating_sub(1)), u_at((j + 1).min(grid)), 1e-9);
    let n_c0 = u.exp();
    let Some((lin, rss)) = saturating_at(curve, n_c0) else {
        return Ok(undetermined("saturating model could not be evaluated"));
    };

    // covariance of (A, ln n_c, K, b) from the Jacobian at the optimum
    let y_scale = curve.df_hz.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let k_scale = y_scale / n_hi;
    let sw: Vec<f64> = (0..n).map(|i| curve.weight(i).sqrt()).collect();
    let resid = |p: &[f64], r: &mut [f64]| {
        let (a, n_c, k, b) = (p[0] * y_scale, p[1].exp() * n_c0, p[2] * k_scale, p[3] * y_scale);
        for i in 0..n {
            let x = curve.n_bar[i];
            r[i] = sw[i] * (a * (1.0 - (-x / n_c).exp()) + k * x + b - curve.df_hz[i]);
        }
    };
    let p = [lin[0] / y_scale, 0.0, lin[1] / k_scale, lin[2] / y_scale];
    if p.iter().any(|v| !v.is_finite()) {
        return Ok(undetermined("saturating fit produced non-finite parameters"));
    }
    let j = lsq::jacobian(&resid, &p, n, 1e-6);
    let jtj = j.transpose() * &j;
    let tol = 1e-12 * jtj.amax();
    // absolute weights when σ is given, residual variance otherwise
    let s2 = if curve.sigma_hz.is_some() { 1.0 } else { rss / (n - 4) as f64 };
    let cov = jtj.pseudo_inverse(tol).ok();
    let se = |i: usize| cov.as_ref().map_or(f64::INFINITY, |c| (c[(i, i)].max(0.0) * s2).sqrt());
    let amplitude = p[0] * y_scale;
    let amplitude_err = se(0) * y_scale;
    let n_c = p[1].exp() * n_c0;
    let n_c_err = n_c * se(1);
    let aicc_saturating = aicc(rss, n, 4);

    let significant = amplitude.abs() >= ANOMALY_SIGNIFICANCE * amplitude_err;
    let in_range = n_c >= n_lo && n_c <= n_hi;
    let wins = aicc_saturating < aicc_linear - SELECTION_MARGIN;
    Ok(AnomalousShift {
        present: Some(significant && in_range && wins),
        amplitude,
        amplitude_err,
        n_c,
        n_c_err,
        k11: p[2] * k_scale,
        k11_err: se(2) * k_scale,
        aicc_linear,
        aicc_saturating,
        diagnostic: None,
    })
}

/// Reference device for K11 ∝ ρ/V comparisons.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KerrReference {
    /// µΩ·cm
    pub resistivity: f64,
    /// µm³
    pub mode_volume: f64,
    /// Hz/photon
    pub k11: f64,
}

/// Current mode volume ℓ·w·t in µm³.
pub fn mode_volume(geometry: &RingGeometry) -> f64 {
    geometry.trace_length() * geometry.w * 1e-3 * geometry.t * 1e-3
}

/// K11 scaled from a reference device by (ρ/ρ_ref)·(V_ref/V).
pub fn kerr_scaling_estimate(resistivity: f64, mode_volume: f64, reference: &KerrReference) -> f64 {
    reference.k11 * (resistivity / reference.resistivity) * (reference.mode_volume / mode_volume)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve(n: &[f64], f: impl Fn(f64) -> f64) -> ShiftCurve {
        ShiftCurve::new(n.to_vec(), n.iter().map(|&x| f(x)).collect(), None).unwrap()
    }

    fn log_grid(lo: f64, hi: f64, k: usize) -> Vec<f64> {
        (0..k).map(|i| lo * (hi / lo).powf(i as f64 / (k - 1) as f64)).collect()
    }

    #[test]
    fn rezeroes_and_validates() {
        let c = ShiftCurve::new(vec![1.0, 2.0], vec![5.0, 7.0], None).unwrap();
        assert_eq!(c.df_hz, vec![0.0, 2.0]);
        assert!(ShiftCurve::new(vec![2.0, 1.0], vec![0.0, 0.0], None).is_err());
        assert!(ShiftCurve::new(vec![0.0, 1.0], vec![0.0, 0.0], None).is_err());
    }

    #[test]
    fn zero_curve() {
        let n = log_grid(1.0, 1e4, 20);
        let fit = fit_kerr(&curve(&n, |_| 0.0), 1.0).unwrap();
        assert_eq!(fit.k11, 0.0);
        assert_eq!(fit.intercept, 0.0);
    }

    #[test]
    fn exact_line_and_rescaling() {
        let n = log_grid(1.0, 1e4, 20);
        let fit = fit_kerr(&curve(&n, |x| -40.0 * x), 1.0).unwrap();
        assert!((fit.k11 + 40.0).abs() < 1e-9);
        let s = 3.7;
        let n2: Vec<f64> = n.iter().map(|x| x * s).collect();
        let c2 = ShiftCurve::new(n2, curve(&n, |x| -40.0 * x).df_hz, None).unwrap();
        let fit2 = fit_kerr(&c2, 0.0).unwrap();
        assert!((fit2.k11 * s / fit.k11 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn too_few_points_above_threshold() {
        let n = log_grid(1.0, 1e4, 20);
        assert!(matches!(fit_kerr(&curve(&n, |x| x), 5e3), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn noiseless_anomaly_found() {
        let n = log_grid(0.1, 1e4, 41);
        let c = curve(&n, |x| 2000.0 * (1.0 - (-x / 10.0).exp()) - 40.0 * x);
        let a = detect_anomalous_shift(&c).unwrap();
        assert_eq!(a.present, Some(true));
        assert!((a.amplitude / 2000.0 - 1.0).abs() < 1e-4, "{}", a.amplitude);
        assert!((a.k11 + 40.0).abs() < 1e-4);
    }

    #[test]
    fn scaling_homogeneity() {
        let r = KerrReference {
            resistivity: 860.0,
            mode_volume: 9.43,
            k11: -10.0,
        };
        assert!((kerr_scaling_estimate(1720.0, 9.43, &r) + 20.0).abs() < 1e-12);
        assert!((kerr_scaling_estimate(860.0, 18.86, &r) + 5.0).abs() < 1e-12);
    }
}
