//! C interface to `ringforge`.
//!
//! Every function returns an [`RfStatus`]; results go through out-pointers.
//! On failure the message is kept per thread and read back with
//! [`rf_last_error_message`]. Traces and optimization results are opaque
//! handles released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use ringforge::design_opt::{self, DesignConstraints, Optimization};
use ringforge::material::{self, MaterialSpec};
use ringforge::noise_psd::{self, NoiseModelKind, TimeSeries};
use ringforge::photon_response::{self, ShiftCurve};
use ringforge::resonance_fit::{self, ComplexTrace};
use ringforge::ring_model::{self, CalibrationConstants, RingGeometry};
use ringforge::{io, Error};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidInput = 2,
    Parse = 3,
    InsufficientData = 4,
    NoResonance = 5,
    NonConvergence = 6,
    Io = 7,
    Other = 8,
    Panic = 9,
}

impl From<&Error> for RfStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidInput(_) | Error::AmbiguousBranch { .. } => RfStatus::InvalidInput,
            Error::Table { .. } | Error::Parse { .. } | Error::Json(_) => RfStatus::Parse,
            Error::InsufficientData(_) => RfStatus::InsufficientData,
            Error::NoResonance(_) | Error::AmbiguousResonances(_) => RfStatus::NoResonance,
            Error::NonConvergence { .. } => RfStatus::NonConvergence,
            Error::Io { .. } | Error::StaleInput { .. } => RfStatus::Io,
            Error::AtPower { source, .. } => RfStatus::from(source.as_ref()),
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), RfStatus>) -> RfStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RfStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic".into());
            RfStatus::Panic
        }
    }
}

fn fail(e: Error) -> RfStatus {
    let s = RfStatus::from(&e);
    set_error(e.to_string());
    s
}

fn null(name: &str) -> RfStatus {
    set_error(format!("`{name}` is null"));
    RfStatus::NullPointer
}

unsafe fn out<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, RfStatus> {
    p.as_mut().ok_or_else(|| null(name))
}

unsafe fn slice<'a>(p: *const f64, n: usize, name: &str) -> Result<&'a [f64], RfStatus> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call on the same thread.
#[no_mangle]
pub extern "C" fn rf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

#[no_mangle]
pub extern "C" fn rf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Sheet inductance (pH/sq) of a film with resistivity `rho` (µΩ·cm),
/// thickness `t` (nm) and critical temperature `tc` (K).
///
/// # Safety
/// `out_lsq` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rf_sheet_inductance(rho: f64, t: f64, tc: f64, out_lsq: *mut f64) -> RfStatus {
    guard(|| {
        let dst = out(out_lsq, "out_lsq")?;
        let m = MaterialSpec::with_tc(rho, t, tc).map_err(fail)?;
        *dst = material::sheet_inductance(&m).map_err(fail)?;
        Ok(())
    })
}

/// Resistivity (µΩ·cm) giving sheet inductance `lsq` (pH/sq).
///
/// # Safety
/// `out_rho` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rf_resistivity_from_sheet_inductance(lsq: f64, t: f64, tc: f64, out_rho: *mut f64) -> RfStatus {
    guard(|| {
        let dst = out(out_rho, "out_rho")?;
        *dst = material::resistivity_from_sheet_inductance(lsq, t, tc).map_err(fail)?.resistivity;
        Ok(())
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RfCircuit {
    /// µm
    pub trace_length: f64,
    pub squares: f64,
    /// µH
    pub inductance: f64,
    /// fF
    pub capacitance: f64,
    /// GHz
    pub f0: f64,
    /// kΩ
    pub impedance: f64,
}

/// Forward model of one ring. `length` (µm) is estimated from `r_in` and
/// `p` when NaN; `k_c` (fF/µm) falls back to the default when NaN.
///
/// # Safety
/// `out_circuit` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rf_ring_predict(
    r_in: f64,
    w: f64,
    p: f64,
    t: f64,
    length: f64,
    lsq: f64,
    k_c: f64,
    out_circuit: *mut RfCircuit,
) -> RfStatus {
    guard(|| {
        let dst = out(out_circuit, "out_circuit")?;
        let mut g = RingGeometry::new(r_in, w, p, t).map_err(fail)?;
        if !length.is_nan() {
            g = g.with_length(length);
        }
        let k = if k_c.is_nan() {
            CalibrationConstants::default()
        } else {
            CalibrationConstants::with_k_c(k_c).map_err(fail)?
        };
        let c = ring_model::predict_with_sheet_inductance(&g, lsq, &k).map_err(fail)?;
        *dst = RfCircuit {
            trace_length: c.trace_length,
            squares: c.squares,
            inductance: c.inductance,
            capacitance: c.capacitance,
            f0: c.f0,
            impedance: c.impedance,
        };
        Ok(())
    })
}

/// Opaque reflection trace.
pub struct RfTrace(ComplexTrace);

/// Builds a trace from `n` frequencies (Hz) and S11 real/imaginary parts.
///
/// # Safety
/// The arrays must hold `n` values; `out_trace` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rf_trace_new(
    freq_hz: *const f64,
    re: *const f64,
    im: *const f64,
    n: usize,
    out_trace: *mut *mut RfTrace,
) -> RfStatus {
    guard(|| {
        let dst = out(out_trace, "out_trace")?;
        let f = slice(freq_hz, n, "freq_hz")?;
        let re = slice(re, n, "re")?;
        let im = slice(im, n, "im")?;
        let s11 = re.iter().zip(im).map(|(a, b)| num_complex::Complex64::new(*a, *b)).collect();
        let trace = ComplexTrace::new(f.to_vec(), s11, None).map_err(fail)?;
        *dst = Box::into_raw(Box::new(RfTrace(trace)));
        Ok(())
    })
}

/// Reads a `freq_hz,re,im` CSV or `.s1p` file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out_trace` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rf_trace_read(path: *const c_char, out_trace: *mut *mut RfTrace) -> RfStatus {
    guard(|| {
        let dst = out(out_trace, "out_trace")?;
        if path.is_null() {
            return Err(null("path"));
        }
        let p = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| fail(Error::InvalidInput("path is not UTF-8".into())))?;
        let trace = io::read_trace(Path::new(p)).map_err(fail)?;
        *dst = Box::into_raw(Box::new(RfTrace(trace)));
        Ok(())
    })
}

/// # Safety
/// `trace` must be null or a handle from `rf_trace_new`/`rf_trace_read`
/// that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn rf_trace_free(trace: *mut RfTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

/// # Safety
/// `trace` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn rf_trace_len(trace: *const RfTrace) -> usize {
    trace.as_ref().map_or(0, |t| t.0.len())
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RfResonanceFit {
    /// Hz
    pub f0: f64,
    pub q_l: f64,
    pub q_c: f64,
    pub q_i: f64,
    /// Q_i band; the upper edge is infinite for a band admitting Q_i → ∞.
    pub q_i_lo: f64,
    pub q_i_hi: f64,
    /// rad
    pub phi: f64,
    pub amplitude: f64,
    /// rad
    pub phase: f64,
    /// s
    pub delay: f64,
    pub f0_err: f64,
    pub q_l_err: f64,
    pub q_c_err: f64,
    pub q_i_err: f64,
    pub residual_rms: f64,
}

/// # Safety
/// `trace` must be a live handle; `out_fit` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rf_fit_reflection(trace: *const RfTrace, out_fit: *mut RfResonanceFit) -> RfStatus {
    guard(|| {
        let dst = out(out_fit, "out_fit")?;
        let t = trace.as_ref().ok_or_else(|| null("trace"))?;
        let f = resonance_fit::fit_reflection(&t.0).map_err(fail)?;
        *dst = RfResonanceFit {
            f0: f.f0,
            q_l: f.q_l,
            q_c: f.q_c,
            q_i: f.q_i,
            q_i_lo: f.q_i_band[0],
            q_i_hi: f.q_i_band[1],
            phi: f.phi,
            amplitude: f.amplitude,
            phase: f.phase,
            delay: f.delay,
            f0_err: f.f0_err,
            q_l_err: f.q_l_err,
            q_c_err: f.q_c_err,
            q_i_err: f.q_i_err,
            residual_rms: f.residual_rms,
        };
        Ok(())
    })
}

/// Average intracavity photon number at drive power `p_dbm`.
///
/// # Safety
/// `out_n` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rf_photon_number(q_c: f64, f0_hz: f64, p_dbm: f64, out_n: *mut f64) -> RfStatus {
    guard(|| {
        let dst = out(out_n, "out_n")?;
        if !(q_c > 0.0 && f0_hz > 0.0 && p_dbm.is_finite()) {
            return Err(fail(Error::InvalidInput("Q_c and f0 must be positive, power finite".into())));
        }
        *dst = resonance_fit::photon_number(q_c, f0_hz, p_dbm);
        Ok(())
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RfConstraints {
    /// GHz
    pub f_min: f64,
    pub f_max: f64,
    /// nm
    pub w_min: f64,
    pub p_min: f64,
    pub t_min: f64,
    /// µΩ·cm
    pub resistivity_max: f64,
    /// pH/sq; NaN for no cap.
    pub sheet_inductance_max: f64,
    /// µm
    pub r_in_min: f64,
    pub r_in_max: f64,
    pub suspended: bool,
}

impl From<&DesignConstraints> for RfConstraints {
    fn from(c: &DesignConstraints) -> Self {
        RfConstraints {
            f_min: c.band[0],
            f_max: c.band[1],
            w_min: c.w_min,
            p_min: c.p_min,
            t_min: c.t_min,
            resistivity_max: c.resistivity_max,
            sheet_inductance_max: c.sheet_inductance_max.unwrap_or(f64::NAN),
            r_in_min: c.r_in_range[0],
            r_in_max: c.r_in_range[1],
            suspended: c.suspended,
        }
    }
}

impl From<&RfConstraints> for DesignConstraints {
    fn from(c: &RfConstraints) -> Self {
        DesignConstraints {
            band: [c.f_min, c.f_max],
            w_min: c.w_min,
            p_min: c.p_min,
            t_min: c.t_min,
            resistivity_max: c.resistivity_max,
            sheet_inductance_max: (!c.sheet_inductance_max.is_nan()).then_some(c.sheet_inductance_max),
            r_in_range: [c.r_in_min, c.r_in_max],
            suspended: c.suspended,
        }
    }
}

/// Fills `out_constraints` with the default profile, or the relaxed one
/// when `relaxed` is set.
///
/// # Safety
/// `out_constraints` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rf_constraints_default(relaxed: bool, out_constraints: *mut RfConstraints) -> RfStatus {
    guard(|| {
        let dst = out(out_constraints, "out_constraints")?;
        let c = if relaxed {
            DesignConstraints::relaxed()
        } else {
            DesignConstraints::default()
        };
        *dst = RfConstraints::from(&c);
        Ok(())
    })
}

/// Opaque optimizer result.
pub struct RfOptimization(Optimization);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RfDesign {
    /// µm
    pub r_in: f64,
    /// nm
    pub w: f64,
    pub p: f64,
    pub t: f64,
    /// µm
    pub trace_length: f64,
    /// pH/sq
    pub sheet_inductance: f64,
    /// µΩ·cm
    pub resistivity: f64,
    pub circuit: RfCircuit,
    /// kΩ; NaN unless suspended.
    pub suspended_impedance: f64,
}

/// Optimizes one design per film of sheet inductance `lsq[i]` (pH/sq) at
/// thickness `t` (nm). `k_c` falls back to the default when NaN.
///
/// # Safety
/// `lsq` must hold `n` values; `out_result` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rf_optimize(
    constraints: *const RfConstraints,
    k_c: f64,
    lsq: *const f64,
    n: usize,
    t: f64,
    tc: f64,
    out_result: *mut *mut RfOptimization,
) -> RfStatus {
    guard(|| {
        let dst = out(out_result, "out_result")?;
        let c = DesignConstraints::from(constraints.as_ref().ok_or_else(|| null("constraints"))?);
        let k_c = if k_c.is_nan() { ring_model::DEFAULT_K_C } else { k_c };
        let materials = slice(lsq, n, "lsq")?
            .iter()
            .map(|&l| MaterialSpec::from_sheet_inductance(l, t, tc))
            .collect::<Result<Vec<_>, _>>()
            .map_err(fail)?;
        let result = design_opt::optimize(&c, k_c, &materials).map_err(fail)?;
        *dst = Box::into_raw(Box::new(RfOptimization(result)));
        Ok(())
    })
}

/// Number of feasible designs, best first.
///
/// # Safety
/// `result` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn rf_optimization_len(result: *const RfOptimization) -> usize {
    result.as_ref().map_or(0, |r| r.0.candidates.len())
}

/// Number of films for which no design satisfied the constraints.
///
/// # Safety
/// `result` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn rf_optimization_infeasible(result: *const RfOptimization) -> usize {
    result.as_ref().map_or(0, |r| r.0.infeasible.len())
}

/// # Safety
/// `result` must be a live handle; `out_design` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rf_optimization_get(
    result: *const RfOptimization,
    index: usize,
    out_design: *mut RfDesign,
) -> RfStatus {
    guard(|| {
        let dst = out(out_design, "out_design")?;
        let r = result.as_ref().ok_or_else(|| null("result"))?;
        let Some(c) = r.0.candidates.get(index) else {
            return Err(fail(Error::InvalidInput(format!(
                "index {index} out of range for {} designs",
                r.0.candidates.len()
            ))));
        };
        let p = &c.predicted;
        *dst = RfDesign {
            r_in: c.geometry.r_in,
            w: c.geometry.w,
            p: c.geometry.p,
            t: c.geometry.t,
            trace_length: p.trace_length,
            sheet_inductance: c.sheet_inductance,
            resistivity: c.material.resistivity,
            circuit: RfCircuit {
                trace_length: p.trace_length,
                squares: p.squares,
                inductance: p.inductance,
                capacitance: p.capacitance,
                f0: p.f0,
                impedance: p.impedance,
            },
            suspended_impedance: c.suspended_impedance.unwrap_or(f64::NAN),
        };
        Ok(())
    })
}

/// # Safety
/// `result` must be null or a handle from `rf_optimize` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rf_optimization_free(result: *mut RfOptimization) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RfNoiseModel {
    White = 0,
    PowerLaw = 1,
    Lorentzian = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RfNoiseFit {
    pub model: RfNoiseModel,
    /// Hz²/Hz
    pub s0: f64,
    pub s1: f64,
    pub alpha: f64,
    /// NaN unless the Lorentzian model was selected.
    pub lorentz_a: f64,
    /// Hz
    pub f_c: f64,
    pub alpha_err: f64,
    /// Model ASD at `asd_freq`, Hz/√Hz.
    pub asd: f64,
    /// ∫ PSD df, Hz².
    pub integrated_power: f64,
}

/// Bartlett PSD of `n` samples spaced `dt` seconds, followed by model
/// selection; the model ASD is reported at `asd_freq` Hz.
///
/// # Safety
/// `values` must hold `n` samples; `out_fit` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rf_fit_noise(
    values: *const f64,
    n: usize,
    dt: f64,
    segments: usize,
    include_lorentzian: bool,
    asd_freq: f64,
    out_fit: *mut RfNoiseFit,
) -> RfStatus {
    guard(|| {
        let dst = out(out_fit, "out_fit")?;
        let series = TimeSeries::new(dt, slice(values, n, "values")?.to_vec()).map_err(fail)?;
        let spectrum = noise_psd::bartlett_psd(&series, segments).map_err(fail)?;
        let fit = noise_psd::fit_noise_model(&spectrum, include_lorentzian).map_err(fail)?;
        *dst = RfNoiseFit {
            model: match fit.model {
                NoiseModelKind::White => RfNoiseModel::White,
                NoiseModelKind::PowerLaw => RfNoiseModel::PowerLaw,
                NoiseModelKind::Lorentzian => RfNoiseModel::Lorentzian,
            },
            s0: fit.s0,
            s1: fit.s1,
            alpha: fit.alpha,
            lorentz_a: fit.lorentz_a.unwrap_or(f64::NAN),
            f_c: fit.f_c.unwrap_or(f64::NAN),
            alpha_err: fit.alpha_err,
            asd: noise_psd::asd_at(&fit, asd_freq),
            integrated_power: spectrum.integrated_power(),
        };
        Ok(())
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RfKerrFit {
    /// Hz/photon
    pub k11: f64,
    pub k11_err: f64,
    /// Hz
    pub intercept: f64,
    pub window_lo: f64,
    pub window_hi: f64,
    /// 1 detected, 0 absent, -1 undecided.
    pub anomalous: i32,
    /// Hz; NaN when no saturating fit was made.
    pub anomalous_amplitude: f64,
    /// photons
    pub anomalous_n_c: f64,
}

/// Self-Kerr fit of a shift curve; `threshold` bounds the linear window
/// and is chosen automatically when NaN.
///
/// # Safety
/// `n_bar` and `df_hz` must hold `n` values; `out_fit` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn rf_fit_kerr(
    n_bar: *const f64,
    df_hz: *const f64,
    n: usize,
    threshold: f64,
    out_fit: *mut RfKerrFit,
) -> RfStatus {
    guard(|| {
        let dst = out(out_fit, "out_fit")?;
        let curve = ShiftCurve::new(
            slice(n_bar, n, "n_bar")?.to_vec(),
            slice(df_hz, n, "df_hz")?.to_vec(),
            None,
        )
        .map_err(fail)?;
        let fit = if threshold.is_nan() {
            photon_response::fit_kerr_auto(&curve)
        } else {
            photon_response::fit_kerr(&curve, threshold).map(|mut f| {
                f.anomalous = photon_response::detect_anomalous_shift(&curve).ok();
                f
            })
        }
        .map_err(fail)?;
        let a = fit.anomalous.as_ref();
        *dst = RfKerrFit {
            k11: fit.k11,
            k11_err: fit.k11_err,
            intercept: fit.intercept,
            window_lo: fit.window[0],
            window_hi: fit.window[1],
            anomalous: match a.and_then(|a| a.present) {
                Some(true) => 1,
                Some(false) => 0,
                None => -1,
            },
            anomalous_amplitude: a.map_or(f64::NAN, |a| a.amplitude),
            anomalous_n_c: a.map_or(f64::NAN, |a| a.n_c),
        };
        Ok(())
    })
}
