//! Power sweeps: photon number and Q_i versus n̄ up to bifurcation.

use serde::{Deserialize, Serialize};

use super::{fit_reflection_with, noise_rms, ComplexTrace, FitOptions};
use crate::error::{Error, Result};
use crate::material::HBAR;

/// Residual growth over the lowest-power fit that marks bifurcation.
pub const BIFURCATION_RESIDUAL_FACTOR: f64 = 5.0;

/// Mean intracavity photon number n̄ = 2·Q_c·P/(ħ·ω0²) for drive power
/// `p_dbm` at the device.
pub fn photon_number(q_c: f64, f0_hz: f64, p_dbm: f64) -> f64 {
    let p_w = 1e-3 * 10f64.powf(p_dbm / 10.0);
    let w0 = 2.0 * std::f64::consts::PI * f0_hz;
    2.0 * q_c * p_w / (HBAR * w0 * w0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerPoint {
    pub power_dbm: f64,
    pub n_bar: f64,
    pub f0: f64,
    pub q_l: f64,
    pub q_c: f64,
    pub q_i: f64,
    pub q_i_band: [f64; 2],
    pub residual_rms_relative: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bifurcation {
    pub power_dbm: f64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSweep {
    /// Ascending in power.
    pub points: Vec<PowerPoint>,
    pub bifurcation: Option<Bifurcation>,
    /// Powers at and above the bifurcation, not fitted.
    pub excluded_dbm: Vec<f64>,
}

/// A step between adjacent samples that dwarfs both neighbouring steps and
/// the noise: the swept response jumped between branches.
pub fn has_jump(trace: &ComplexTrace) -> bool {
    let z = &trace.s11;
    let noise = noise_rms(z);
    let steps: Vec<f64> = z.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
    (1..steps.len().saturating_sub(1)).any(|i| {
        let s = steps[i];
        s > 10.0 * noise && s > 4.0 * steps[i - 1].max(steps[i + 1])
    })
}

/// Fits every trace in ascending power order and stops at the first power
/// whose response is non-single-valued or whose fit residual exceeds
/// [`BIFURCATION_RESIDUAL_FACTOR`] times the lowest-power residual.
pub fn qi_vs_power(traces: &[(ComplexTrace, f64)], opts: &FitOptions) -> Result<PowerSweep> {
    if traces.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "power sweep needs at least 2 powers, got {}",
            traces.len()
        )));
    }
    let mut order: Vec<usize> = (0..traces.len()).collect();
    order.sort_by(|&a, &b| traces[a].1.total_cmp(&traces[b].1));

    let mut points: Vec<PowerPoint> = Vec::new();
    let mut bifurcation = None;
    let mut excluded_dbm = Vec::new();
    for i in order {
        let (trace, power_dbm) = (&traces[i].0, traces[i].1);
        if bifurcation.is_some() {
            excluded_dbm.push(power_dbm);
            continue;
        }
        let at = |e: Error| Error::AtPower {
            power_dbm,
            source: Box::new(e),
        };
        trace.validate().map_err(at)?;
        if has_jump(trace) {
            bifurcation = Some(Bifurcation {
                power_dbm,
                reason: "non-single-valued response".into(),
            });
            excluded_dbm.push(power_dbm);
            continue;
        }
        let fit = fit_reflection_with(trace, opts).map_err(at)?;
        if let Some(base) = points.first() {
            if fit.residual_rms_relative > BIFURCATION_RESIDUAL_FACTOR * base.residual_rms_relative {
                bifurcation = Some(Bifurcation {
                    power_dbm,
                    reason: format!(
                        "fit residual {:.3e} exceeds {}x the low-power baseline {:.3e}",
                        fit.residual_rms_relative, BIFURCATION_RESIDUAL_FACTOR, base.residual_rms_relative
                    ),
                });
                excluded_dbm.push(power_dbm);
                continue;
            }
        }
        points.push(PowerPoint {
            power_dbm,
            n_bar: photon_number(fit.q_c, fit.f0, power_dbm),
            f0: fit.f0,
            q_l: fit.q_l,
            q_c: fit.q_c,
            q_i: fit.q_i,
            q_i_band: fit.q_i_band,
            residual_rms_relative: fit.residual_rms_relative,
        });
    }
    Ok(PowerSweep {
        points,
        bifurcation,
        excluded_dbm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn photon_number_reference() {
        let n = photon_number(1e5, 5e9, -140.0);
        assert!((n - 19.22).abs() < 0.01, "{n}");
        assert!((photon_number(2e5, 5e9, -140.0) / n - 2.0).abs() < 1e-12);
        assert_eq!(photon_number(1e5, 5e9, f64::NEG_INFINITY), 0.0);
    }
}
