use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::Serialize;

use super::svg::{self, Plot, Series};
use super::{to_json, Run};
use crate::calibration::sig6;
use crate::error::{Error, Result};
use crate::io;
use crate::noise_psd::{self, NoiseModelFit, NoiseSpectrum};
use crate::photon_response::{self, KerrFit, ShiftCurve};
use crate::resonance_fit::{self, ComplexTrace, FanoBandMode, FitOptions, ResonanceFit};

#[derive(Debug, Args, Serialize)]
pub struct FitS11Args {
    /// Trace as `freq_hz,re,im` CSV or `.s1p`; stdin when omitted or `-`.
    pub input: Option<PathBuf>,
    /// Power-sweep manifest: JSON array of {"file", "power_dBm"}.
    #[arg(long, conflicts_with = "input")]
    pub sweep: Option<PathBuf>,
    /// Split a doublet and fit each mode.
    #[arg(long, conflicts_with = "sweep")]
    pub doublet: bool,
    /// Fano band over the full ±|φ| range instead of φ ± σ.
    #[arg(long)]
    pub worst_case: bool,
    #[arg(long)]
    pub svg: bool,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

fn parse_trace_text(text: &str, name: &str) -> Result<ComplexTrace> {
    let first = text.trim_start().chars().next();
    if name.to_ascii_lowercase().ends_with(".s1p") || matches!(first, Some('!' | '#')) {
        io::parse_touchstone(text, name)
    } else {
        io::parse_trace_csv(text, name)
    }
}

#[derive(Serialize)]
struct WindowFit {
    center_hz: f64,
    fit: ResonanceFit,
}

fn plot_csv(trace: &ComplexTrace, fits: &[&ResonanceFit]) -> String {
    let mut out = String::from("freq_hz,re,im,model_re,model_im\n");
    for (f, z) in trace.frequencies.iter().zip(&trace.s11) {
        // each mode is drawn over its own half of a split trace
        let fit = fits
            .iter()
            .min_by(|a, b| (a.f0 - f).abs().total_cmp(&(b.f0 - f).abs()))
            .copied();
        let m = fit.map(|m| m.model(*f));
        let _ = writeln!(
            out,
            "{f:?},{:?},{:?},{},{}",
            z.re,
            z.im,
            m.map(|m| format!("{:?}", m.re)).unwrap_or_default(),
            m.map(|m| format!("{:?}", m.im)).unwrap_or_default()
        );
    }
    out
}

fn s11_svg(trace: &ComplexTrace, fits: &[&ResonanceFit]) -> String {
    let plot = Plot {
        title: "|S11|",
        x_label: "f (Hz)",
        y_label: "|S11|",
        log_x: false,
        log_y: false,
    };
    let data = Series {
        label: "data",
        points: trace.frequencies.iter().zip(&trace.s11).map(|(f, z)| (*f, z.norm())).collect(),
        markers: true,
    };
    let model = Series {
        label: "fit",
        points: trace
            .frequencies
            .iter()
            .filter_map(|&f| {
                let fit = fits.iter().min_by(|a, b| (a.f0 - f).abs().total_cmp(&(b.f0 - f).abs()))?;
                Some((f, fit.model(f).norm()))
            })
            .collect(),
        markers: false,
    };
    svg::line_plot(&plot, &[data, model])
}

pub fn fit_s11(args: FitS11Args) -> Result<()> {
    let mut run = Run::new("fit-s11", &args, args.out_dir.as_deref())?;
    let opts = FitOptions {
        band_mode: if args.worst_case {
            FanoBandMode::WorstCase
        } else {
            FanoBandMode::Statistical
        },
        ..FitOptions::default()
    };

    if let Some(manifest) = &args.sweep {
        let (text, name) = run.read_input(Some(manifest))?;
        let entries: Vec<io::SweepEntry> = serde_json::from_str(&text).map_err(|e| Error::Parse {
            source_name: name,
            message: e.to_string(),
        })?;
        let base = manifest.parent().unwrap_or(Path::new("."));
        let mut traces = Vec::with_capacity(entries.len());
        for e in entries {
            let path = if e.file.is_absolute() { e.file } else { base.join(e.file) };
            let (text, name) = run.read_input(Some(&path))?;
            let mut t = parse_trace_text(&text, &name)?;
            t.power_dbm = Some(e.power_dbm);
            traces.push((t, e.power_dbm));
        }
        let sweep = resonance_fit::qi_vs_power(&traces, &opts)?;
        let mut csv = String::from("power_dbm,n_bar,f0_hz,q_l,q_c,q_i,q_i_lo,q_i_hi\n");
        for p in &sweep.points {
            let _ = writeln!(
                csv,
                "{}",
                [p.power_dbm, p.n_bar, p.f0, p.q_l, p.q_c, p.q_i, p.q_i_band[0], p.q_i_band[1]]
                    .map(sig6)
                    .join(",")
            );
        }
        run.primary("fit_s11.json", &to_json(&sweep)?)?;
        run.emit("fit_s11_power.csv", &csv)?;
        if args.svg {
            let plot = Plot {
                title: "Q_i vs photon number",
                x_label: "n",
                y_label: "Q_i",
                log_x: true,
                log_y: true,
            };
            let s = Series {
                label: "Q_i",
                points: sweep.points.iter().map(|p| (p.n_bar, p.q_i)).collect(),
                markers: true,
            };
            run.emit("fit_s11_power.svg", &svg::line_plot(&plot, &[s]))?;
        }
        return run.finish();
    }

    let (text, name) = run.read_input(args.input.as_deref())?;
    let trace = parse_trace_text(&text, &name)?;
    let fits: Vec<WindowFit> = if args.doublet {
        resonance_fit::detect_doublet(&trace)?
            .into_iter()
            .map(|w| {
                Ok(WindowFit {
                    center_hz: w.center_hz,
                    fit: resonance_fit::fit_reflection_with(&w.trace, &opts)?,
                })
            })
            .collect::<Result<_>>()?
    } else {
        let fit = resonance_fit::fit_reflection_with(&trace, &opts)?;
        vec![WindowFit {
            center_hz: fit.f0,
            fit,
        }]
    };
    if args.doublet && fits.is_empty() {
        return Err(Error::NoResonance(format!("{name}: no resonance above the noise")));
    }
    let json = if args.doublet { to_json(&fits)? } else { to_json(&fits[0].fit)? };
    run.primary("fit_s11.json", &json)?;
    let refs: Vec<&ResonanceFit> = fits.iter().map(|w| &w.fit).collect();
    run.emit("fit_s11_plot.csv", &plot_csv(&trace, &refs))?;
    if args.svg {
        run.emit("fit_s11.svg", &s11_svg(&trace, &refs))?;
    }
    run.finish()
}

#[derive(Debug, Args, Serialize)]
pub struct FitNoiseArgs {
    /// Time series as `t_s,f0_hz` CSV; stdin when omitted or `-`.
    pub input: Option<PathBuf>,
    /// Number of Bartlett segments.
    #[arg(long, default_value_t = 16)]
    pub segments: usize,
    /// Restrict model selection to white and power-law spectra.
    #[arg(long)]
    pub no_lorentzian: bool,
    /// Frequency at which the ASD is reported, Hz.
    #[arg(long, default_value_t = 10.0)]
    pub at: f64,
    #[arg(long)]
    pub svg: bool,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Serialize)]
struct NoiseReport {
    n_samples: usize,
    sample_rate: f64,
    n_segments: usize,
    segment_length: usize,
    resolution_hz: f64,
    integrated_power: f64,
    series_variance: f64,
    asd_at_hz: f64,
    asd: f64,
    fit: NoiseModelFit,
}

fn noise_svg(spectrum: &NoiseSpectrum, fit: &NoiseModelFit) -> String {
    let plot = Plot {
        title: "Frequency noise",
        x_label: "f (Hz)",
        y_label: "ASD (Hz/√Hz)",
        log_x: true,
        log_y: true,
    };
    let data = Series {
        label: "data",
        points: spectrum.frequencies.iter().copied().zip(spectrum.asd.iter().copied()).collect(),
        markers: false,
    };
    let model = Series {
        label: "model",
        points: spectrum.frequencies.iter().map(|&f| (f, fit.psd_at(f).sqrt())).collect(),
        markers: false,
    };
    svg::line_plot(&plot, &[data, model])
}

pub fn fit_noise(args: FitNoiseArgs) -> Result<()> {
    let mut run = Run::new("fit-noise", &args, args.out_dir.as_deref())?;
    let (text, name) = run.read_input(args.input.as_deref())?;
    let series = io::parse_series_csv(&text, &name)?;
    let spectrum = noise_psd::bartlett_psd(&series, args.segments)?;
    let fit = noise_psd::fit_noise_model(&spectrum, !args.no_lorentzian)?;
    let report = NoiseReport {
        n_samples: series.values.len(),
        sample_rate: series.sample_rate(),
        n_segments: spectrum.n_segments,
        segment_length: spectrum.segment_length,
        resolution_hz: spectrum.resolution(),
        integrated_power: spectrum.integrated_power(),
        series_variance: series.variance(),
        asd_at_hz: args.at,
        asd: noise_psd::asd_at(&fit, args.at),
        fit,
    };
    run.primary("fit_noise.json", &to_json(&report)?)?;
    run.emit("fit_noise_plot.csv", &io::spectrum_plot_csv(&spectrum, Some(&report.fit)))?;
    if args.svg {
        run.emit("fit_noise.svg", &noise_svg(&spectrum, &report.fit))?;
    }
    run.finish()
}

#[derive(Debug, Args, Serialize)]
pub struct FitKerrArgs {
    /// Curve as `nbar,df_hz[,sigma_hz]` CSV; stdin when omitted or `-`.
    pub input: Option<PathBuf>,
    /// Upper n̄ of the linear window; chosen automatically when omitted.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub svg: bool,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

fn kerr_plot(curve: &ShiftCurve, fit: &KerrFit) -> String {
    let mut out = String::from("nbar,df_hz,kerr_model_hz,saturating_model_hz\n");
    for (n, df) in curve.n_bar.iter().zip(&curve.df_hz) {
        let lin = fit.intercept + fit.k11 * n;
        let sat = fit
            .anomalous
            .as_ref()
            .filter(|a| a.present.is_some())
            .map(|a| format!("{:?}", a.amplitude * (1.0 - (-n / a.n_c).exp()) + a.k11 * n))
            .unwrap_or_default();
        let _ = writeln!(out, "{n:?},{df:?},{lin:?},{sat}");
    }
    out
}

pub fn fit_kerr(args: FitKerrArgs) -> Result<()> {
    let mut run = Run::new("fit-kerr", &args, args.out_dir.as_deref())?;
    let (text, name) = run.read_input(args.input.as_deref())?;
    let curve = io::parse_curve_csv(&text, &name)?;
    let fit = match args.threshold {
        Some(n) => {
            let mut fit = photon_response::fit_kerr(&curve, n)?;
            fit.anomalous = photon_response::detect_anomalous_shift(&curve).ok();
            fit
        }
        None => photon_response::fit_kerr_auto(&curve)?,
    };
    run.primary("fit_kerr.json", &to_json(&fit)?)?;
    run.emit("fit_kerr_plot.csv", &kerr_plot(&curve, &fit))?;
    if args.svg {
        let plot = Plot {
            title: "Frequency shift",
            x_label: "n",
            y_label: "Δf (Hz)",
            log_x: true,
            log_y: false,
        };
        let data = Series {
            label: "data",
            points: curve.n_bar.iter().copied().zip(curve.df_hz.iter().copied()).collect(),
            markers: true,
        };
        let model = Series {
            label: "K11·n",
            points: curve.n_bar.iter().map(|&n| (n, fit.intercept + fit.k11 * n)).collect(),
            markers: false,
        };
        run.emit("fit_kerr.svg", &svg::line_plot(&plot, &[data, model]))?;
    }
    run.finish()
}
