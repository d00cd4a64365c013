use std::path::PathBuf;

use clap::{Args, Subcommand, ValueEnum};
use serde::Serialize;

use super::Run;
use crate::error::{Error, Result};
use crate::io;
use crate::synth::{self, Mode, S11Spec, ShiftCurveSpec, SynthSpec, TimeSeriesSpec};

#[derive(Debug, Args, Serialize)]
#[command(args_conflicts_with_subcommands = true)]
pub struct SynthArgs {
    #[command(subcommand)]
    pub variant: Option<Variant>,
    /// Full generator spec as JSON, tagged by `variant`.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Trace format.
    #[arg(long, global = true, value_enum, default_value = "csv")]
    pub trace_format: TraceFormat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceFormat {
    Csv,
    S1p,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum Variant {
    /// Single-mode reflection trace.
    S11(S11Args),
    /// Two modes with unequal coupling.
    Doublet(DoubletArgs),
    /// Frequency-noise time series.
    Timeseries(SeriesArgs),
    /// Photon-number shift curve.
    Shiftcurve(CurveArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct S11Args {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Hz
    #[arg(long, default_value_t = 5e9)]
    pub f0: f64,
    #[arg(long, default_value_t = 1e5)]
    pub qi: f64,
    #[arg(long, default_value_t = 5e4)]
    pub qc: f64,
    /// Impedance-mismatch angle, rad.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub phi: f64,
    #[arg(long, default_value_t = 1.0)]
    pub amplitude: f64,
    /// rad
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub phase: f64,
    /// Cable delay, s.
    #[arg(long, default_value_t = 0.0)]
    pub delay: f64,
    /// dB; omit with --noiseless.
    #[arg(long, default_value_t = 40.0)]
    pub snr: f64,
    #[arg(long)]
    pub noiseless: bool,
    /// Span in loaded linewidths.
    #[arg(long, default_value_t = 20.0)]
    pub linewidths: f64,
    #[arg(long, default_value_t = 1601)]
    pub points: usize,
    /// Duffing parameter, linewidths per normalized intensity.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub kerr: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub power_dbm: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct DoubletArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Lower mode, Hz.
    #[arg(long, default_value_t = 5e9)]
    pub f_low: f64,
    /// Hz
    #[arg(long, default_value_t = 25e6)]
    pub splitting: f64,
    #[arg(long, default_value_t = 1e5)]
    pub qi: f64,
    /// Coupling Q of the lower mode.
    #[arg(long, default_value_t = 2e4)]
    pub qc: f64,
    /// Upper-mode Q_c over lower-mode Q_c.
    #[arg(long, default_value_t = 4.0)]
    pub qc_ratio: f64,
    #[arg(long, default_value_t = 40.0)]
    pub snr: f64,
    #[arg(long)]
    pub noiseless: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct SeriesArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Hz
    #[arg(long, default_value_t = 200.0)]
    pub fs: f64,
    #[arg(long, default_value_t = 65536)]
    pub samples: usize,
    /// White level, Hz²/Hz.
    #[arg(long, default_value_t = 0.0)]
    pub s0: f64,
    /// 1/f^α coefficient; overrides --asd.
    #[arg(long)]
    pub s1: Option<f64>,
    /// 1/f^α ASD at --asd-freq, Hz/√Hz.
    #[arg(long, default_value_t = 500.0)]
    pub asd: f64,
    #[arg(long, default_value_t = 10.0)]
    pub asd_freq: f64,
    #[arg(long, default_value_t = 0.9)]
    pub alpha: f64,
    /// Lorentzian plateau, Hz²/Hz.
    #[arg(long, default_value_t = 0.0)]
    pub lorentz_a: f64,
    /// Lorentzian corner, Hz.
    #[arg(long, default_value_t = 1.0)]
    pub fc: f64,
    /// Mean frequency, Hz.
    #[arg(long, default_value_t = 0.0)]
    pub mean: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct CurveArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Hz/photon
    #[arg(long, default_value_t = -40.0, allow_hyphen_values = true)]
    pub k11: f64,
    /// Anomalous-shift amplitude, Hz.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub amplitude: f64,
    #[arg(long, default_value_t = 10.0)]
    pub nc: f64,
    /// Noise per point, Hz.
    #[arg(long, default_value_t = 5.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0.1)]
    pub n_lo: f64,
    #[arg(long, default_value_t = 1e4)]
    pub n_hi: f64,
    #[arg(long, default_value_t = 41)]
    pub points: usize,
}

impl Variant {
    pub fn spec(&self) -> SynthSpec {
        match self {
            Variant::S11(a) => {
                let mode = Mode {
                    f0: a.f0,
                    q_i: a.qi,
                    q_c: a.qc,
                    phi: a.phi,
                };
                let mut s = S11Spec::single(a.seed, mode, (!a.noiseless).then_some(a.snr), a.linewidths, a.points);
                s.amplitude = a.amplitude;
                s.phase = a.phase;
                s.delay = a.delay;
                s.kerr = a.kerr;
                s.power_dbm = a.power_dbm;
                SynthSpec::S11(s)
            }
            Variant::Doublet(a) => SynthSpec::Doublet(S11Spec::doublet(
                a.seed,
                a.f_low,
                a.splitting,
                a.qi,
                a.qc,
                a.qc_ratio,
                (!a.noiseless).then_some(a.snr),
            )),
            Variant::Timeseries(a) => SynthSpec::Timeseries(TimeSeriesSpec {
                seed: a.seed,
                sample_rate: a.fs,
                n_samples: a.samples,
                s0: a.s0,
                s1: a.s1.unwrap_or_else(|| TimeSeriesSpec::s1_for_asd(a.asd, a.asd_freq, a.alpha)),
                alpha: a.alpha,
                lorentz_a: a.lorentz_a,
                f_c: a.fc,
                mean_hz: a.mean,
            }),
            Variant::Shiftcurve(a) => SynthSpec::Shiftcurve(ShiftCurveSpec {
                seed: a.seed,
                k11: a.k11,
                amplitude: a.amplitude,
                n_c: a.nc,
                sigma: a.sigma,
                n_lo: a.n_lo,
                n_hi: a.n_hi,
                n_points: a.points,
            }),
        }
    }
}

/// Generator output in the matching fitter's input format.
pub fn render(spec: &SynthSpec, trace_format: TraceFormat) -> Result<String> {
    let trace = |s: &S11Spec| -> Result<String> {
        let t = synth::synth_s11(s)?;
        Ok(match trace_format {
            TraceFormat::Csv => io::trace_to_csv(&t),
            TraceFormat::S1p => io::trace_to_touchstone(&t),
        })
    };
    match spec {
        SynthSpec::S11(s) | SynthSpec::Doublet(s) => trace(s),
        SynthSpec::Timeseries(s) => Ok(io::series_to_csv(&synth::synth_timeseries(s)?)),
        SynthSpec::Shiftcurve(s) => Ok(io::curve_to_csv(&synth::synth_shift_curve(s)?)),
    }
}

pub fn synth(args: SynthArgs) -> Result<()> {
    let mut run = Run::for_file("synth", &args, args.out.as_deref())?;
    let spec = match (&args.variant, &args.spec) {
        (Some(v), _) => v.spec(),
        (None, Some(path)) => {
            let (text, name) = run.read_input(Some(path))?;
            serde_json::from_str(&text).map_err(|e| Error::Parse {
                source_name: name,
                message: e.to_string(),
            })?
        }
        (None, None) => return Err(Error::invalid("choose a variant or pass --spec")),
    };
    let text = render(&spec, args.trace_format)?;
    match &args.out {
        Some(p) => {
            let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("out").to_owned();
            run.emit(&name, &text)?;
        }
        None => run.primary("synth", &text)?,
    }
    run.finish()
}
