//! Splitting traces that contain two fundamental modes.
//!
//! Resonances are found as runs where the smoothed speed of the trace in the
//! complex plane, |dS11/df|, rises above its median. The speed is |S11| times
//! the group delay plus the rate of change of |S11|, so it picks up the dip
//! and the group-delay peak alike, for over- and under-coupled modes, and a
//! cable delay only adds a small constant.

use serde::{Deserialize, Serialize};

use super::{median, ComplexTrace};
use crate::error::{Error, Result};

/// Detection threshold in robust standard deviations of the speed.
const THRESHOLD_SIGMA: f64 = 8.0;
/// Threshold floor relative to the strongest excursion.
const THRESHOLD_RELATIVE: f64 = 0.1;
const HYSTERESIS: f64 = 0.5;
const SMOOTH_HALF_WIDTH: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceWindow {
    /// Frequency of the strongest excursion, Hz.
    pub center_hz: f64,
    pub trace: ComplexTrace,
}

/// Speed along the trace, |dS11/df|, in units of S11 per median sample
/// step. Delay only adds a small constant; each resonance adds a peak.
fn trace_speed(trace: &ComplexTrace) -> Vec<f64> {
    let f = &trace.frequencies;
    let z = &trace.s11;
    let n = f.len();
    let step = median(f.windows(2).map(|w| w[1] - w[0]).collect());
    (0..n)
        .map(|i| {
            let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
            (z[b] - z[a]).norm() / (f[b] - f[a]) * step
        })
        .collect()
}

fn smooth(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(SMOOTH_HALF_WIDTH);
            let hi = (i + SMOOTH_HALF_WIDTH + 1).min(n);
            v[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

/// Index of the peak of every above-threshold run.
fn excursion_peaks(d: &[f64], threshold: f64) -> Vec<usize> {
    let low = HYSTERESIS * threshold;
    let mut peaks = Vec::new();
    let mut i = 0;
    while i < d.len() {
        if d[i] > threshold {
            let mut hi = i;
            while hi + 1 < d.len() && d[hi + 1] > low {
                hi += 1;
            }
            let peak = (i..=hi).max_by(|&a, &b| d[a].total_cmp(&d[b])).unwrap_or(i);
            peaks.push(peak);
            i = hi + 1;
        } else {
            i += 1;
        }
    }
    peaks
}

/// Finds up to two resonances and returns one window per resonance: the
/// whole trace for a single mode, the two halves split at the midpoint
/// between the modes for a doublet, nothing for a featureless trace.
pub fn detect_doublet(trace: &ComplexTrace) -> Result<Vec<TraceWindow>> {
    trace.validate()?;
    let speed = smooth(&trace_speed(trace));
    let base = median(speed.clone());
    let spread = 1.4826 * median(speed.iter().map(|v| (v - base).abs()).collect());
    let d: Vec<f64> = speed.iter().map(|v| v - base).collect();
    let d_max = d.iter().copied().fold(0.0, f64::max);
    let threshold = (THRESHOLD_SIGMA * spread).max(THRESHOLD_RELATIVE * d_max);
    if !(d_max > threshold) {
        return Ok(Vec::new());
    }
    let peaks = excursion_peaks(&d, threshold);
    let f = &trace.frequencies;
    match peaks.as_slice() {
        [] => Ok(Vec::new()),
        [p] => Ok(vec![TraceWindow {
            center_hz: f[*p],
            trace: trace.clone(),
        }]),
        [a, b] => {
            let mid = 0.5 * (f[*a] + f[*b]);
            let cut = f.partition_point(|&x| x < mid);
            Ok(vec![
                TraceWindow {
                    center_hz: f[*a],
                    trace: trace.slice(0..cut)?,
                },
                TraceWindow {
                    center_hz: f[*b],
                    trace: trace.slice(cut..trace.len())?,
                },
            ])
        }
        many => Err(Error::AmbiguousResonances(many.iter().map(|&i| f[i]).collect())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hysteresis_keeps_ragged_runs_whole() {
        let d = [0.0, 0.0, 1.2, 0.7, 1.1, 0.0, 0.0, 2.0, 0.0];
        assert_eq!(excursion_peaks(&d, 1.0), vec![2, 7]);
        let d = [0.0, 1.2, 0.4, 1.1, 0.0];
        assert_eq!(excursion_peaks(&d, 1.0), vec![1, 3]);
    }
}
