//! Readers and writers for the measurement file formats.
//!
//! Data files are written with full `f64` precision so that a write/read
//! cycle is lossless.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise_psd::{NoiseModelFit, NoiseSpectrum, TimeSeries};
use crate::photon_response::ShiftCurve;
use crate::resonance_fit::ComplexTrace;

pub const TRACE_HEADER: [&str; 3] = ["freq_hz", "re", "im"];
pub const SERIES_HEADER: [&str; 2] = ["t_s", "f0_hz"];
pub const CURVE_HEADER: [&str; 3] = ["nbar", "df_hz", "sigma_hz"];
/// Relative jitter tolerated in time-series sample spacing.
const SPACING_TOLERANCE: f64 = 1e-6;

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Writes via a temporary sibling and a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    std::fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Parses a numeric CSV whose header must start with `required` and may
/// continue with the `optional` columns, in order.
fn parse_columns(text: &str, source: &str, required: &[&str], optional: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| parse_err(source, e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();
    let allowed: Vec<&str> = required.iter().chain(optional).copied().collect();
    if header.len() < required.len() || header.len() > allowed.len() || header.iter().zip(&allowed).any(|(h, a)| h != a) {
        return Err(parse_err(
            source,
            format!("expected header `{}`, got `{}`", allowed.join(","), header.join(",")),
        ));
    }
    let mut cols = vec![Vec::new(); header.len()];
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| parse_err(source, e.to_string()))?;
        for (j, col) in cols.iter_mut().enumerate() {
            let cell = rec.get(j).unwrap_or("");
            let v: f64 = cell.parse().map_err(|_| Error::Table {
                source_name: source.to_owned(),
                row: i + 1,
                column: header[j].clone(),
                message: format!("`{cell}` is not a number"),
            })?;
            col.push(v);
        }
    }
    Ok(cols)
}

fn parse_err(source: &str, message: impl Into<String>) -> Error {
    Error::Parse {
        source_name: source.to_owned(),
        message: message.into(),
    }
}

pub fn parse_trace_csv(text: &str, source: &str) -> Result<ComplexTrace> {
    let cols = parse_columns(text, source, &TRACE_HEADER, &[])?;
    let s11 = cols[1].iter().zip(&cols[2]).map(|(&re, &im)| Complex64::new(re, im)).collect();
    ComplexTrace::new(cols[0].clone(), s11, None)
}

/// Touchstone one-port subset: RI data, any of the Hz/kHz/MHz/GHz units.
pub fn parse_touchstone(text: &str, source: &str) -> Result<ComplexTrace> {
    let mut scale = 1e9;
    let mut seen_options = false;
    let mut freqs = Vec::new();
    let mut s11 = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('!').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(opts) = line.strip_prefix('#') {
            if seen_options {
                continue;
            }
            seen_options = true;
            let mut format = "MA".to_owned();
            for tok in opts.split_whitespace() {
                match tok.to_ascii_uppercase().as_str() {
                    "HZ" => scale = 1.0,
                    "KHZ" => scale = 1e3,
                    "MHZ" => scale = 1e6,
                    "GHZ" => scale = 1e9,
                    f @ ("RI" | "MA" | "DB") => format = f.to_owned(),
                    "S" | "R" => {}
                    other if other.parse::<f64>().is_ok() => {}
                    other => {
                        return Err(parse_err(source, format!("line {}: unsupported option `{other}`", lineno + 1)));
                    }
                }
            }
            if format != "RI" {
                return Err(parse_err(source, format!("only RI data is supported, got {format}")));
            }
            continue;
        }
        if !seen_options {
            return Err(parse_err(source, "data before the `#` option line"));
        }
        let nums: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| parse_err(source, format!("line {}: not numeric", lineno + 1)))?;
        if nums.len() != 3 {
            return Err(parse_err(
                source,
                format!("line {}: expected 3 values for a one-port, got {}", lineno + 1, nums.len()),
            ));
        }
        freqs.push(nums[0] * scale);
        s11.push(Complex64::new(nums[1], nums[2]));
    }
    ComplexTrace::new(freqs, s11, None)
}

/// Dispatches on the extension: `.s1p` is Touchstone, anything else CSV.
pub fn read_trace(path: &Path) -> Result<ComplexTrace> {
    let text = read_text(path)?;
    let name = path.display().to_string();
    let is_touchstone = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("s1p"));
    if is_touchstone {
        parse_touchstone(&text, &name)
    } else {
        parse_trace_csv(&text, &name)
    }
}

pub fn trace_to_csv(trace: &ComplexTrace) -> String {
    let mut out = TRACE_HEADER.join(",");
    out.push('\n');
    for (f, z) in trace.frequencies.iter().zip(&trace.s11) {
        let _ = writeln!(out, "{f:?},{:?},{:?}", z.re, z.im);
    }
    out
}

pub fn trace_to_touchstone(trace: &ComplexTrace) -> String {
    let mut out = String::from("# Hz S RI R 50\n");
    for (f, z) in trace.frequencies.iter().zip(&trace.s11) {
        let _ = writeln!(out, "{f:?} {:?} {:?}", z.re, z.im);
    }
    out
}

/// Requires uniformly spaced timestamps.
pub fn parse_series_csv(text: &str, source: &str) -> Result<TimeSeries> {
    let cols = parse_columns(text, source, &SERIES_HEADER, &[])?;
    let t = &cols[0];
    if t.len() < 2 {
        return Err(Error::InsufficientData(format!("{source}: fewer than two samples")));
    }
    let dt = (t[t.len() - 1] - t[0]) / (t.len() - 1) as f64;
    if !(dt > 0.0) {
        return Err(parse_err(source, "timestamps must increase"));
    }
    for (i, w) in t.windows(2).enumerate() {
        if ((w[1] - w[0]) / dt - 1.0).abs() > SPACING_TOLERANCE.max(1e-9 * t[i + 1].abs() / dt) {
            return Err(Error::Table {
                source_name: source.to_owned(),
                row: i + 2,
                column: "t_s".into(),
                message: format!("non-uniform sample spacing {} s vs {dt} s", w[1] - w[0]),
            });
        }
    }
    TimeSeries::new(dt, cols[1].clone())
}

pub fn read_series(path: &Path) -> Result<TimeSeries> {
    parse_series_csv(&read_text(path)?, &path.display().to_string())
}

pub fn series_to_csv(series: &TimeSeries) -> String {
    let mut out = SERIES_HEADER.join(",");
    out.push('\n');
    for (i, v) in series.values.iter().enumerate() {
        let _ = writeln!(out, "{:?},{v:?}", i as f64 * series.dt);
    }
    out
}

pub fn parse_curve_csv(text: &str, source: &str) -> Result<ShiftCurve> {
    let mut cols = parse_columns(text, source, &CURVE_HEADER[..2], &CURVE_HEADER[2..])?;
    let sigma = (cols.len() == 3).then(|| cols.pop().unwrap_or_default());
    let df = cols.pop().unwrap_or_default();
    let n = cols.pop().unwrap_or_default();
    ShiftCurve::new(n, df, sigma)
}

pub fn read_curve(path: &Path) -> Result<ShiftCurve> {
    parse_curve_csv(&read_text(path)?, &path.display().to_string())
}

pub fn curve_to_csv(curve: &ShiftCurve) -> String {
    let mut out = match curve.sigma_hz {
        Some(_) => CURVE_HEADER.join(","),
        None => CURVE_HEADER[..2].join(","),
    };
    out.push('\n');
    for i in 0..curve.n_bar.len() {
        let _ = write!(out, "{:?},{:?}", curve.n_bar[i], curve.df_hz[i]);
        if let Some(s) = &curve.sigma_hz {
            let _ = write!(out, ",{:?}", s[i]);
        }
        out.push('\n');
    }
    out
}

/// Plot data `f_hz,asd_hzrthz,model_asd`.
pub fn spectrum_plot_csv(spectrum: &NoiseSpectrum, fit: Option<&NoiseModelFit>) -> String {
    let mut out = String::from("f_hz,asd_hzrthz,model_asd\n");
    for (f, a) in spectrum.frequencies.iter().zip(&spectrum.asd) {
        let model = fit.map(|m| m.psd_at(*f).sqrt().to_string()).unwrap_or_default();
        let _ = writeln!(out, "{f:?},{a:?},{model}");
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub file: PathBuf,
    #[serde(alias = "power_dBm")]
    pub power_dbm: f64,
}

/// Power-sweep manifest: a JSON array of `{file, power_dBm}`; relative
/// paths resolve against the manifest's directory.
pub fn read_sweep_manifest(path: &Path) -> Result<Vec<(ComplexTrace, f64)>> {
    let entries: Vec<SweepEntry> = serde_json::from_str(&read_text(path)?).map_err(|e| Error::Parse {
        source_name: path.display().to_string(),
        message: e.to_string(),
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    entries
        .into_iter()
        .map(|e| {
            let file = if e.file.is_absolute() { e.file } else { base.join(e.file) };
            let mut trace = read_trace(&file)?;
            trace.power_dbm = Some(e.power_dbm);
            Ok((trace, e.power_dbm))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn touchstone_units_and_comments() {
        let text = "! header\n# MHz S RI R 50\n4000.0 0.5 -0.1 ! note\n4000.5 0.4 0.2\n4001 0.3 0.3\n";
        let t = parse_touchstone(text, "x.s1p").unwrap_err();
        // three points are below the trace minimum
        assert!(matches!(t, Error::InsufficientData(_) | Error::InvalidInput(_)));
        let mut text = String::from("# GHz S RI R 50\n");
        for i in 0..40 {
            let _ = writeln!(text, "{} 0.5 {}", 4.0 + i as f64 * 1e-4, i as f64 * 0.01);
        }
        let t = parse_touchstone(&text, "x.s1p").unwrap();
        assert_eq!(t.frequencies[1], (4.0 + 1e-4) * 1e9);
        assert_eq!(t.s11[2], Complex64::new(0.5, 0.02));
        assert!(parse_touchstone("# GHz S MA R 50\n4 1 0\n", "x").is_err());
    }

    #[test]
    fn header_is_checked() {
        assert!(matches!(
            parse_curve_csv("n,df\n1,2\n", "c.csv"),
            Err(Error::Parse { .. })
        ));
        let c = parse_curve_csv("nbar,df_hz\n0.1,0\n1,-40\n10,-400\n", "c.csv").unwrap();
        assert_eq!(c.df_hz, vec![0.0, -40.0, -400.0]);
        assert!(matches!(
            parse_curve_csv("nbar,df_hz\n0.1,0\n1,x\n", "c.csv"),
            Err(Error::Table { row: 2, .. })
        ));
    }

    #[test]
    fn series_spacing() {
        let mut text = String::from("t_s,f0_hz\n");
        for i in 0..300 {
            let _ = writeln!(text, "{},{}", i as f64 * 0.01, i % 7);
        }
        let s = parse_series_csv(&text, "s").unwrap();
        assert!((s.dt - 0.01).abs() < 1e-15);
        let bad = text.replacen("0.02,", "0.025,", 1);
        assert!(parse_series_csv(&bad, "s").is_err());
    }
}
