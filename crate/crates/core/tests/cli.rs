use std::io::Write;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use ringforge::calibration::APPENDIX_B_CSV;
use serde_json::Value;

fn ringforge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ringforge"))
        .args(args)
        .env_remove("RINGFORGE_CONFIG")
        .output()
        .unwrap()
}

fn piped(args: &[&str], input: &[u8]) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_ringforge"))
        .args(args)
        .env_remove("RINGFORGE_CONFIG")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(input).unwrap();
    child.wait_with_output().unwrap()
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn num(v: &Value, key: &str) -> f64 {
    v[key].as_f64().unwrap_or_else(|| panic!("{key} missing in {v}"))
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn exit_codes() {
    assert_eq!(ringforge(&["--help"]).status.code(), Some(0));
    assert_eq!(ringforge(&["material"]).status.code(), Some(2));
    assert_eq!(ringforge(&["bogus"]).status.code(), Some(2));
    // pitch must exceed width
    let out = ringforge(&["ring", "--r-in", "10", "--w", "200", "--p", "200", "--t", "20", "--lsq", "500"]);
    assert_eq!(out.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(err["error"].is_string() && err["message"].is_string());
    assert_eq!(ringforge(&["fit-s11", "/nonexistent/trace.csv"]).status.code(), Some(1));
}

#[test]
fn material_sheet_parameters() {
    let v = json(&ringforge(&["material", "--rho", "860", "--t", "30"]));
    assert!(rel(num(&v, "sheet_inductance"), 180.0) < 1e-3);
    assert_eq!(v["sit"]["status"], "OK");
    let v = json(&ringforge(&["material", "--lsq", "670", "--t", "20", "--invert"]));
    assert!(rel(num(&v, "resistivity"), 2546.27) < 1e-4, "{v}");
}

#[test]
fn ring_reproduces_best_device() {
    let v = json(&ringforge(&[
        "ring", "--r-in", "6.7", "--w", "150", "--p", "325", "--t", "20", "--length", "966", "--lsq", "670",
    ]));
    assert!(rel(v["params"]["impedance"].as_f64().unwrap(), 126.886) < 1e-4);
    assert!(rel(v["params"]["f0"].as_f64().unwrap(), 4.6803) < 1e-4);
}

#[test]
fn optimize_reaches_high_impedance() {
    let v = json(&ringforge(&["optimize", "--band", "4:8", "--lsq", "1800", "--relaxed"]));
    let z = v["candidates"][0]["predicted"]["impedance"].as_f64().unwrap();
    assert!(rel(z, 227.0) < 0.03, "Z = {z}");
}

#[test]
fn calibrate_fits_capacitance() {
    let out = piped(&["calibrate", "-"], APPENDIX_B_CSV.as_bytes());
    let v = json(&out);
    assert!(rel(v["capacitance"]["k_c"].as_f64().unwrap(), 0.1566) < 0.01);
}

#[test]
fn synth_fit_round_trip() {
    let trace = ringforge(&["synth", "s11", "--seed", "7", "--qi", "8e4", "--qc", "3e4", "--f0", "6e9"]);
    assert!(trace.status.success());
    let v = json(&piped(&["fit-s11"], &trace.stdout));
    assert!(rel(num(&v, "f0"), 6e9) < 1e-6);
    assert!(rel(num(&v, "q_i"), 8e4) < 0.02);
    assert!(rel(num(&v, "q_c"), 3e4) < 0.02);

    let s1p = ringforge(&["synth", "s11", "--seed", "7", "--trace-format", "s1p"]);
    let v = json(&piped(&["fit-s11"], &s1p.stdout));
    assert!(rel(num(&v, "q_c"), 5e4) < 0.02);
}

#[test]
fn synth_is_byte_identical_per_seed() {
    for variant in ["s11", "doublet", "timeseries", "shiftcurve"] {
        let a = ringforge(&["synth", variant, "--seed", "11"]);
        let b = ringforge(&["synth", variant, "--seed", "11"]);
        let c = ringforge(&["synth", variant, "--seed", "12"]);
        assert!(a.status.success());
        assert_eq!(a.stdout, b.stdout, "{variant}");
        assert_ne!(a.stdout, c.stdout, "{variant}");
    }
}

#[test]
fn noise_and_kerr_pipelines() {
    let series = ringforge(&["synth", "timeseries", "--seed", "1"]);
    let v = json(&piped(&["fit-noise", "--no-lorentzian"], &series.stdout));
    assert!(rel(num(&v, "asd"), 500.0) < 0.05, "{v}");
    // segment means are removed before the transform
    assert!(num(&v, "integrated_power") <= num(&v, "series_variance"));

    let curve = ringforge(&["synth", "shiftcurve", "--seed", "1", "--k11", "-40"]);
    let v = json(&piped(&["fit-kerr"], &curve.stdout));
    assert!(rel(num(&v, "k11"), -40.0) < 0.02, "{v}");
}

#[test]
fn manifests_and_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let trace = d.join("trace.csv");
    assert!(ringforge(&["synth", "s11", "--seed", "2", "--out", trace.to_str().unwrap()]).status.success());
    assert!(d.join("trace.csv.manifest.json").exists());

    let fit_dir = d.join("fit");
    let out = ringforge(&["fit-s11", trace.to_str().unwrap(), "--svg", "--out-dir", fit_dir.to_str().unwrap()]);
    assert!(out.status.success() && out.stdout.is_empty());
    let manifest: Value = serde_json::from_str(&read(&fit_dir.join("fit-s11.manifest.json"))).unwrap();
    assert_eq!(manifest["command"], "fit-s11");
    let digest = manifest["inputs"][0]["sha256"].as_str().unwrap();
    assert_eq!(digest.len(), 64);
    for name in ["fit_s11.json", "fit_s11_plot.csv", "fit_s11.svg"] {
        assert!(fit_dir.join(name).exists(), "{name}");
    }

    let ring_dir = d.join("ring");
    let args = ["ring", "--r-in", "6.7", "--w", "150", "--p", "325", "--t", "20", "--lsq", "670"];
    assert!(ringforge(&[&args[..], &["--out-dir", ring_dir.to_str().unwrap()]].concat()).status.success());

    let report = ringforge(&["report", fit_dir.to_str().unwrap(), ring_dir.to_str().unwrap()]);
    assert!(report.status.success(), "{}", String::from_utf8_lossy(&report.stderr));
    let text = String::from_utf8(report.stdout).unwrap();
    assert!(text.contains("ring:ring"));
    assert!(text.contains("fit-s11"));

    // a modified input invalidates the fit's manifest
    std::fs::write(&trace, read(&trace) + "\n").unwrap();
    let stale = ringforge(&["report", fit_dir.to_str().unwrap()]);
    assert_eq!(stale.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&stale.stderr).contains("error"));
}

#[test]
fn config_profiles() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("ringforge.json");
    std::fs::write(&cfg, r#"{"profiles": {"coarse": {"w_min": 300.0, "p_min": 400.0}}}"#).unwrap();
    let run = |profile: &str| {
        let out = Command::new(env!("CARGO_BIN_EXE_ringforge"))
            .args(["optimize", "--band", "4:8", "--lsq", "1800", "--profile", profile])
            .env("RINGFORGE_CONFIG", &cfg)
            .output()
            .unwrap();
        json(&out)
    };
    let coarse = run("coarse");
    let g = &coarse["candidates"][0]["geometry"];
    assert_eq!(g["w"].as_f64(), Some(300.0));
    let z_coarse = coarse["candidates"][0]["predicted"]["impedance"].as_f64().unwrap();
    let z_default = run("default")["candidates"][0]["predicted"]["impedance"].as_f64().unwrap();
    assert!(z_coarse < z_default);
}
