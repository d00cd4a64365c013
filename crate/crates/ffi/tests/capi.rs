use std::ffi::{CStr, CString};
use std::process::Command;
use std::ptr;

use ringforge::synth::{self, Mode, S11Spec, ShiftCurveSpec, TimeSeriesSpec};
use ringforge_ffi::*;

fn last_error() -> String {
    let p = rf_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn material_and_ring() {
    let mut lsq = 0.0;
    assert_eq!(unsafe { rf_sheet_inductance(860.0, 30.0, 2.2, &mut lsq) }, RfStatus::Ok);
    assert!(rel(lsq, 180.0) < 1e-3);
    assert!(rf_last_error_message().is_null());

    let mut rho = 0.0;
    assert_eq!(unsafe { rf_resistivity_from_sheet_inductance(670.0, 20.0, 2.2, &mut rho) }, RfStatus::Ok);
    assert!(rel(rho, 2546.27) < 1e-4);

    let mut c = RfCircuit::default();
    let s = unsafe { rf_ring_predict(6.7, 150.0, 325.0, 20.0, 966.0, 670.0, f64::NAN, &mut c) };
    assert_eq!(s, RfStatus::Ok);
    assert!(rel(c.impedance, 126.886) < 1e-4);
    assert!(rel(c.f0, 4.6803) < 1e-4);
}

#[test]
fn errors_are_reported() {
    let s = unsafe { rf_sheet_inductance(860.0, -1.0, 2.2, &mut 0.0) };
    assert_eq!(s, RfStatus::InvalidInput);
    assert!(last_error().contains("thickness"));

    assert_eq!(unsafe { rf_sheet_inductance(860.0, 30.0, 2.2, ptr::null_mut()) }, RfStatus::NullPointer);
    assert!(last_error().contains("out_lsq"));

    let mut c = RfCircuit::default();
    assert_eq!(
        unsafe { rf_ring_predict(10.0, 200.0, 200.0, 20.0, f64::NAN, 500.0, f64::NAN, &mut c) },
        RfStatus::InvalidInput
    );

    let path = CString::new("/nonexistent/trace.csv").unwrap();
    let mut t = ptr::null_mut();
    assert_eq!(unsafe { rf_trace_read(path.as_ptr(), &mut t) }, RfStatus::Io);
    assert!(t.is_null());
    unsafe { rf_trace_free(ptr::null_mut()) };
    unsafe { rf_optimization_free(ptr::null_mut()) };
}

#[test]
fn reflection_fit() {
    let mode = Mode { f0: 6e9, q_i: 8e4, q_c: 3e4, phi: 0.0 };
    let trace = synth::synth_s11(&S11Spec::single(5, mode, Some(40.0), 20.0, 1601)).unwrap();
    let re: Vec<f64> = trace.s11.iter().map(|z| z.re).collect();
    let im: Vec<f64> = trace.s11.iter().map(|z| z.im).collect();
    let mut h = ptr::null_mut();
    let s = unsafe { rf_trace_new(trace.frequencies.as_ptr(), re.as_ptr(), im.as_ptr(), re.len(), &mut h) };
    assert_eq!(s, RfStatus::Ok);
    assert_eq!(unsafe { rf_trace_len(h) }, 1601);
    let mut fit = RfResonanceFit::default();
    assert_eq!(unsafe { rf_fit_reflection(h, &mut fit) }, RfStatus::Ok);
    unsafe { rf_trace_free(h) };
    assert!(rel(fit.f0, 6e9) < 1e-6);
    assert!(rel(fit.q_i, 8e4) < 0.02);
    assert!(fit.q_i_lo <= fit.q_i && fit.q_i <= fit.q_i_hi);

    let mut n = 0.0;
    assert_eq!(unsafe { rf_photon_number(fit.q_c, fit.f0, -120.0, &mut n) }, RfStatus::Ok);
    assert!(n > 0.0);
}

#[test]
fn optimizer_handles() {
    let mut c = RfConstraints::default();
    assert_eq!(unsafe { rf_constraints_default(true, &mut c) }, RfStatus::Ok);
    c.f_min = 4.0;
    c.f_max = 8.0;
    let films = [1200.0, 1800.0];
    let mut h = ptr::null_mut();
    let s = unsafe { rf_optimize(&c, f64::NAN, films.as_ptr(), films.len(), 20.0, 2.2, &mut h) };
    assert_eq!(s, RfStatus::Ok, "{}", last_error());
    assert_eq!(unsafe { rf_optimization_len(h) }, 2);
    assert_eq!(unsafe { rf_optimization_infeasible(h) }, 0);
    let mut best = RfDesign::default();
    assert_eq!(unsafe { rf_optimization_get(h, 0, &mut best) }, RfStatus::Ok);
    assert_eq!(best.sheet_inductance, 1800.0);
    assert!(rel(best.circuit.impedance, 227.0) < 0.03);
    assert!(best.circuit.f0 >= 4.0 - 1e-6);
    assert!(best.suspended_impedance.is_nan());
    assert_eq!(unsafe { rf_optimization_get(h, 2, &mut best) }, RfStatus::InvalidInput);
    unsafe { rf_optimization_free(h) };
}

#[test]
fn noise_and_kerr() {
    let spec = TimeSeriesSpec {
        seed: 3,
        sample_rate: 200.0,
        n_samples: 1 << 16,
        s0: 0.0,
        s1: TimeSeriesSpec::s1_for_asd(500.0, 10.0, 0.9),
        alpha: 0.9,
        lorentz_a: 0.0,
        f_c: 1.0,
        mean_hz: 0.0,
    };
    let series = synth::synth_timeseries(&spec).unwrap();
    let mut fit = std::mem::MaybeUninit::<RfNoiseFit>::uninit();
    let s = unsafe {
        rf_fit_noise(series.values.as_ptr(), series.values.len(), series.dt, 32, false, 10.0, fit.as_mut_ptr())
    };
    assert_eq!(s, RfStatus::Ok, "{}", last_error());
    let fit = unsafe { fit.assume_init() };
    assert!(rel(fit.asd, 500.0) < 0.05);
    assert!((fit.alpha - 0.9).abs() < 0.05);
    assert!(fit.lorentz_a.is_nan());

    let curve = synth::synth_shift_curve(&ShiftCurveSpec {
        seed: 3,
        k11: -40.0,
        amplitude: 2000.0,
        n_c: 10.0,
        sigma: 5.0,
        n_lo: 0.1,
        n_hi: 1e4,
        n_points: 41,
    })
    .unwrap();
    let mut k = RfKerrFit::default();
    let s = unsafe { rf_fit_kerr(curve.n_bar.as_ptr(), curve.df_hz.as_ptr(), curve.len(), f64::NAN, &mut k) };
    assert_eq!(s, RfStatus::Ok, "{}", last_error());
    assert!(rel(k.k11, -40.0) < 0.05);
    assert_eq!(k.anomalous, 1);
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(rf_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_compiles_as_c() {
    let include = concat!(env!("CARGO_MANIFEST_DIR"), "/include");
    let header = std::fs::read_to_string(format!("{include}/ringforge.h")).unwrap();
    for name in ["rf_fit_reflection", "rf_optimize", "rf_last_error_message", "RF_STATUS_OK"] {
        assert!(header.contains(name), "{name}");
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        r#"#include "ringforge.h"
int probe(void) {
    RfCircuit c;
    RfTrace *t = NULL;
    rf_trace_free(t);
    return rf_ring_predict(6.7, 150, 325, 20, 966, 670, 0.16, &c) == RF_STATUS_OK;
}
"#,
    )
    .unwrap();
    let Ok(out) = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I", include])
        .arg(&src)
        .output()
    else {
        eprintln!("no C compiler; skipping");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
