use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::Serialize;

use super::config::Config;
use super::svg::{self, Plot, Series};
use super::{parse_pair, text_table, to_json, Run};
use crate::calibration::{self, sig6, DeviceRecord, DeviceTable, TableFormat};
use crate::design_opt::{self, DesignConstraints, GridOptions};
use crate::error::{Error, Result};
use crate::material::{self, MaterialSpec, DEFAULT_TC_K};
use crate::ring_model::{self, CalibrationConstants, RingGeometry, DEFAULT_K_C};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Table,
    Csv,
}

#[derive(Debug, Args, Serialize)]
pub struct MaterialArgs {
    /// Normal-state resistivity, µΩ·cm.
    #[arg(long, required_unless_present = "lsq", conflicts_with = "lsq")]
    pub rho: Option<f64>,
    /// Film thickness, nm.
    #[arg(long)]
    pub t: f64,
    /// Critical temperature, K.
    #[arg(long, default_value_t = DEFAULT_TC_K)]
    pub tc: f64,
    /// Target sheet inductance, pH/sq; solves for the resistivity.
    #[arg(long)]
    pub lsq: Option<f64>,
    /// Accepted for clarity; `--lsq` alone already inverts.
    #[arg(long, requires = "lsq")]
    pub invert: bool,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Serialize)]
struct MaterialReport {
    resistivity: f64,
    thickness: f64,
    critical_temperature: f64,
    sheet_resistance: f64,
    sheet_inductance: f64,
    gap_ratio: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    ambiguous_branch: Option<bool>,
    sit: material::SitReport,
}

pub fn material(args: MaterialArgs) -> Result<()> {
    let mut run = Run::new("material", &args, args.out_dir.as_deref())?;
    let (spec, ambiguous) = match (args.rho, args.lsq) {
        (Some(rho), _) => (MaterialSpec::with_tc(rho, args.t, args.tc)?, None),
        (None, Some(lsq)) => {
            let inv = material::resistivity_from_sheet_inductance(lsq, args.t, args.tc)?;
            (MaterialSpec::from_sheet_inductance(lsq, args.t, args.tc)?, Some(inv.ambiguous))
        }
        (None, None) => return Err(Error::invalid("one of --rho or --lsq is required")),
    };
    let sheet = material::sheet_params(&spec)?;
    let report = MaterialReport {
        resistivity: spec.resistivity,
        thickness: spec.thickness,
        critical_temperature: spec.critical_temperature,
        sheet_resistance: sheet.sheet_resistance,
        sheet_inductance: sheet.sheet_inductance,
        gap_ratio: sheet.gap_ratio,
        ambiguous_branch: ambiguous,
        sit: material::check_sit(spec.resistivity),
    };
    let text = match args.format {
        Format::Json => to_json(&report)?,
        Format::Table | Format::Csv => {
            let rows = vec![
                vec!["resistivity_uohm_cm".into(), sig6(report.resistivity)],
                vec!["thickness_nm".into(), sig6(report.thickness)],
                vec!["tc_k".into(), sig6(report.critical_temperature)],
                vec!["sheet_resistance_ohm".into(), sig6(report.sheet_resistance)],
                vec!["sheet_inductance_ph".into(), sig6(report.sheet_inductance)],
                vec!["gap_ratio".into(), sig6(report.gap_ratio)],
                vec!["sit".into(), format!("{:?}", report.sit.status).to_uppercase()],
            ];
            text_table(&["quantity", "value"], &rows)
        }
    };
    run.primary("material.json", &text)?;
    run.finish()
}

/// Film given either by resistivity or by sheet inductance.
#[derive(Debug, Args, Serialize)]
pub struct FilmArgs {
    /// Resistivity, µΩ·cm.
    #[arg(long, required_unless_present = "lsq", conflicts_with = "lsq")]
    pub rho: Option<f64>,
    /// Sheet inductance, pH/sq.
    #[arg(long)]
    pub lsq: Option<f64>,
    /// Critical temperature, K.
    #[arg(long, default_value_t = DEFAULT_TC_K)]
    pub tc: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct RingArgs {
    /// Inner radius, µm.
    #[arg(long)]
    pub r_in: f64,
    /// Trace width, nm.
    #[arg(long)]
    pub w: f64,
    /// Meander pitch, nm.
    #[arg(long)]
    pub p: f64,
    /// Film thickness, nm.
    #[arg(long)]
    pub t: f64,
    /// Trace length, µm; estimated from r_in and p when omitted.
    #[arg(long)]
    pub length: Option<f64>,
    #[command(flatten)]
    pub film: FilmArgs,
    /// Capacitance per inner radius, fF/µm.
    #[arg(long)]
    pub k_c: Option<f64>,
    /// Sweep one of r_in, w, p, t, length over START:STOP:STEP.
    #[arg(long, num_args = 2, value_names = ["PARAM", "RANGE"])]
    pub sweep: Option<Vec<String>>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    /// Also write an SVG of the sweep.
    #[arg(long)]
    pub svg: bool,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

fn resolve_k_c(flag: Option<f64>) -> Result<f64> {
    match flag {
        Some(k) => Ok(k),
        None => Ok(Config::from_env()?.k_c.unwrap_or(DEFAULT_K_C)),
    }
}

fn film_sheet_inductance(film: &FilmArgs, t: f64) -> Result<(f64, MaterialSpec)> {
    match (film.rho, film.lsq) {
        (Some(rho), _) => {
            let m = MaterialSpec::with_tc(rho, t, film.tc)?;
            Ok((material::sheet_inductance(&m)?, m))
        }
        (None, Some(lsq)) => Ok((lsq, MaterialSpec::from_sheet_inductance(lsq, t, film.tc)?)),
        (None, None) => Err(Error::invalid("one of --rho or --lsq is required")),
    }
}

fn parse_range(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<f64> = s
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::invalid(format!("sweep range `{s}` is not START:STOP:STEP")))?;
    let [start, stop, step] = parts[..] else {
        return Err(Error::invalid(format!("sweep range `{s}` is not START:STOP:STEP")));
    };
    if !(step > 0.0 && stop >= start && start.is_finite() && stop.is_finite()) {
        return Err(Error::invalid("sweep needs STEP > 0 and STOP ≥ START"));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
    if n > 1_000_000 {
        return Err(Error::invalid(format!("sweep of {n} points is too large")));
    }
    Ok((0..n).map(|i| start + i as f64 * step).collect())
}

#[derive(Serialize)]
struct RingReport {
    geometry: RingGeometry,
    sheet_inductance: f64,
    k_c: f64,
    params: ring_model::CircuitParams,
    sit: material::SitReport,
}

pub fn ring(args: RingArgs) -> Result<()> {
    let mut run = Run::new("ring", &args, args.out_dir.as_deref())?;
    let k_c = resolve_k_c(args.k_c)?;
    let constants = CalibrationConstants::with_k_c(k_c)?;
    let (lsq, film) = film_sheet_inductance(&args.film, args.t)?;
    let mut geometry = RingGeometry::new(args.r_in, args.w, args.p, args.t)?;
    if let Some(l) = args.length {
        geometry = geometry.with_length(l);
        geometry.validate()?;
    }
    let params = ring_model::predict_with_sheet_inductance(&geometry, lsq, &constants)?;
    let report = RingReport {
        geometry,
        sheet_inductance: lsq,
        k_c,
        params,
        sit: material::check_sit(film.resistivity),
    };

    let sweep = match &args.sweep {
        Some(v) => Some(sweep_table(&v[0], &v[1], &geometry, lsq, &constants)?),
        None => None,
    };
    let row = DeviceRecord {
        id: "ring".into(),
        r_in: geometry.r_in,
        w: geometry.w,
        length: params.trace_length,
        p: geometry.p,
        t: geometry.t,
        f0: params.f0,
        sheet_inductance: lsq,
        inductance: params.inductance,
        capacitance: params.capacitance,
        impedance: params.impedance,
        q_c: None,
    };
    let table = DeviceTable::new("ring", vec![row])?;
    if run.writes_files() {
        run.emit("ring.json", &to_json(&report)?)?;
        run.emit("ring.csv", &table.to_csv_string())?;
        if let Some((csv, param, points)) = &sweep {
            run.emit("ring_sweep.csv", csv)?;
            if args.svg {
                let plot = Plot {
                    title: "Impedance sweep",
                    x_label: param,
                    y_label: "Z (kΩ)",
                    log_x: false,
                    log_y: false,
                };
                let s = Series {
                    label: "Z",
                    points: points.clone(),
                    markers: false,
                };
                run.emit("ring_sweep.svg", &svg::line_plot(&plot, &[s]))?;
            }
        }
    } else if let Some((csv, _, _)) = &sweep {
        run.primary("ring_sweep.csv", csv)?;
    } else {
        let text = match args.format {
            Format::Json => to_json(&report)?,
            Format::Csv => table.to_csv_string(),
            Format::Table => circuit_table(&[("ring", &geometry, lsq, &params)]),
        };
        run.primary("ring.json", &text)?;
    }
    run.finish()
}

fn circuit_table(rows: &[(&str, &RingGeometry, f64, &ring_model::CircuitParams)]) -> String {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|(id, g, lsq, c)| {
            vec![
                id.to_string(),
                sig6(g.r_in),
                sig6(g.w),
                sig6(c.trace_length),
                sig6(g.p),
                sig6(g.t),
                sig6(c.f0),
                sig6(*lsq),
                sig6(c.inductance),
                sig6(c.capacitance),
                sig6(c.impedance),
            ]
        })
        .collect();
    text_table(
        &["id", "r_in_um", "w_nm", "l_um", "p_nm", "t_nm", "f0_GHz", "Lsq_pH", "L_uH", "C_fF", "Z_kOhm"],
        &body,
    )
}

type Sweep = (String, String, Vec<(f64, f64)>);

fn sweep_table(
    param: &str,
    range: &str,
    base: &RingGeometry,
    lsq: f64,
    constants: &CalibrationConstants,
) -> Result<Sweep> {
    let values = parse_range(range)?;
    let mut csv = format!("{param},l_um,squares,L_uH,C_fF,f0_GHz,Z_kOhm\n");
    let mut points = Vec::with_capacity(values.len());
    for v in values {
        let mut g = *base;
        match param {
            "r_in" => g.r_in = v,
            "w" => g.w = v,
            "p" => g.p = v,
            "t" => g.t = v,
            "length" => g.explicit_length = Some(v),
            other => {
                return Err(Error::invalid(format!(
                    "cannot sweep `{other}`; choose r_in, w, p, t or length"
                )))
            }
        }
        let c = ring_model::predict_with_sheet_inductance(&g, lsq, constants)?;
        csv.push_str(
            &[v, c.trace_length, c.squares, c.inductance, c.capacitance, c.f0, c.impedance]
                .map(sig6)
                .join(","),
        );
        csv.push('\n');
        points.push((v, c.impedance));
    }
    Ok((csv, param.to_owned(), points))
}

#[derive(Debug, Args, Serialize)]
pub struct CalibrateArgs {
    /// Device table, CSV or JSON by extension; `-` reads CSV from stdin.
    pub table: PathBuf,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    #[arg(long)]
    pub svg: bool,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Serialize)]
struct FilmFit {
    sheet_inductance_table: f64,
    sheet_inductance_fit: f64,
    thickness: f64,
    n_rows: usize,
}

#[derive(Serialize)]
struct CalibrationReport {
    source: String,
    n_rows: usize,
    capacitance: calibration::CapacitanceFit,
    #[serde(skip_serializing_if = "Option::is_none")]
    scaling: Option<calibration::ScalingReport>,
    films: Vec<FilmFit>,
    flags: Vec<calibration::ConsistencyFlag>,
}

pub fn calibrate(args: CalibrateArgs) -> Result<()> {
    let mut run = Run::new("calibrate", &args, args.out_dir.as_deref())?;
    let (text, name) = run.read_input(Some(&args.table))?;
    let table = match TableFormat::from_path(&args.table) {
        TableFormat::Json if args.table != Path::new("-") => DeviceTable::from_json_str(&text, &name)?,
        _ => DeviceTable::from_csv_str(&text, &name)?,
    };
    let cap = calibration::fit_k_c(&table)?;
    let scaling = match calibration::validate_scaling(&table) {
        Ok(s) => Some(s),
        Err(Error::InsufficientData(_)) => None,
        Err(e) => return Err(e),
    };
    let films = table
        .films()
        .into_iter()
        .map(|g| {
            Ok(FilmFit {
                sheet_inductance_table: g[0].sheet_inductance,
                sheet_inductance_fit: calibration::fit_sheet_inductance(&g, cap.k_c)?,
                thickness: g[0].t,
                n_rows: g.len(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let constants = CalibrationConstants::with_k_c(cap.k_c)?;
    let mut model_rows = Vec::with_capacity(table.records.len());
    let mut plot_csv = String::from("id,r_in_um,C_fF,C_model_fF,residual\n");
    for r in &table.records {
        let c = ring_model::predict_with_sheet_inductance(&r.geometry(), r.sheet_inductance, &constants)?;
        model_rows.push(DeviceRecord {
            f0: c.f0,
            inductance: c.inductance,
            capacitance: c.capacitance,
            impedance: c.impedance,
            ..r.clone()
        });
        plot_csv.push_str(&format!(
            "{},{},{},{},{}\n",
            r.id,
            sig6(r.r_in),
            sig6(r.capacitance),
            sig6(c.capacitance),
            sig6((r.capacitance - c.capacitance) / c.capacitance)
        ));
    }
    let model = DeviceTable::new(format!("{name} (model)"), model_rows)?;
    let report = CalibrationReport {
        source: name,
        n_rows: table.records.len(),
        capacitance: cap,
        scaling,
        films,
        flags: table.flags.clone(),
    };
    if run.writes_files() {
        run.emit("calibrate.json", &to_json(&report)?)?;
        run.emit("calibrate_model.csv", &model.to_csv_string())?;
        run.emit("calibrate_capacitance.csv", &plot_csv)?;
        if args.svg {
            let plot = Plot {
                title: "Capacitance law",
                x_label: "r_in (µm)",
                y_label: "C (fF)",
                log_x: false,
                log_y: false,
            };
            let data = Series {
                label: "table",
                points: table.records.iter().map(|r| (r.r_in, r.capacitance)).collect(),
                markers: true,
            };
            let r_max = table.records.iter().map(|r| r.r_in).fold(0.0, f64::max);
            let fit = Series {
                label: "k_C·r_in",
                points: vec![(0.0, 0.0), (r_max, report.capacitance.k_c * r_max)],
                markers: false,
            };
            run.emit("calibrate_capacitance.svg", &svg::line_plot(&plot, &[data, fit]))?;
        }
    } else {
        let text = match args.format {
            Format::Json => to_json(&report)?,
            Format::Csv => model.to_csv_string(),
            Format::Table => {
                let c = &report.capacitance;
                let mut rows = vec![
                    vec!["k_C_fF_per_um".into(), sig6(c.k_c)],
                    vec!["k_C_std_error".into(), sig6(c.std_error)],
                    vec!["max_abs_residual".into(), sig6(c.max_abs_residual)],
                ];
                if let Some(s) = &report.scaling {
                    rows.push(vec!["r2_impedance".into(), sig6(s.impedance_fit.r_squared)]);
                    rows.push(vec!["r2_product".into(), sig6(s.product_fit.r_squared)]);
                    rows.push(vec!["z_f0_r_spread".into(), sig6(s.radius_product.max_deviation)]);
                }
                rows.push(vec!["flags".into(), report.flags.len().to_string()]);
                text_table(&["quantity", "value"], &rows)
            }
        };
        run.primary("calibrate.json", &text)?;
    }
    run.finish()
}

#[derive(Debug, Args, Serialize)]
pub struct OptimizeArgs {
    /// Target band in GHz, MIN:MAX.
    #[arg(long, value_parser = parse_pair)]
    pub band: Option<[f64; 2]>,
    /// Candidate sheet inductances, pH/sq.
    #[arg(long, value_delimiter = ',', required_unless_present = "rho")]
    pub lsq: Vec<f64>,
    /// Candidate resistivities, µΩ·cm.
    #[arg(long, value_delimiter = ',')]
    pub rho: Vec<f64>,
    /// Film thickness, nm; defaults to the profile's minimum.
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_TC_K)]
    pub tc: f64,
    /// Constraint profile from the built-ins or RINGFORGE_CONFIG.
    #[arg(long, default_value = "default", conflicts_with = "relaxed")]
    pub profile: String,
    /// Shorthand for `--profile relaxed` (120 nm traces).
    #[arg(long)]
    pub relaxed: bool,
    #[arg(long)]
    pub w_min: Option<f64>,
    #[arg(long)]
    pub p_min: Option<f64>,
    #[arg(long)]
    pub t_min: Option<f64>,
    #[arg(long)]
    pub rho_max: Option<f64>,
    #[arg(long)]
    pub lsq_max: Option<f64>,
    /// Inner-radius range in µm, MIN:MAX.
    #[arg(long, value_parser = parse_pair)]
    pub r_range: Option<[f64; 2]>,
    /// Annotate the suspended-ring impedance.
    #[arg(long)]
    pub suspended: bool,
    #[arg(long)]
    pub k_c: Option<f64>,
    /// Cross-check each candidate with a brute-force grid search.
    #[arg(long)]
    pub verify: bool,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

/// Grid search disagreeing with the analytic optimum by more than this
/// fraction fails verification.
pub const VERIFY_TOLERANCE: f64 = 0.01;

#[derive(Serialize)]
struct Verification {
    sheet_inductance: f64,
    analytic_impedance: f64,
    grid_impedance: Option<f64>,
    relative_difference: Option<f64>,
    agrees: bool,
}

#[derive(Serialize)]
struct OptimizeReport {
    constraints: DesignConstraints,
    k_c: f64,
    #[serde(flatten)]
    result: design_opt::Optimization,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    verification: Vec<Verification>,
}

pub fn constraints_from(args: &OptimizeArgs, config: &Config) -> Result<DesignConstraints> {
    let name = if args.relaxed { "relaxed" } else { args.profile.as_str() };
    let mut c = config.profile(name)?;
    if let Some(b) = args.band {
        c.band = b;
    }
    if let Some(v) = args.w_min {
        c.w_min = v;
    }
    if let Some(v) = args.p_min {
        c.p_min = v;
    }
    if let Some(v) = args.t_min {
        c.t_min = v;
    }
    if let Some(v) = args.rho_max {
        c.resistivity_max = v;
    }
    if args.lsq_max.is_some() {
        c.sheet_inductance_max = args.lsq_max;
    }
    if let Some(r) = args.r_range {
        c.r_in_range = r;
    }
    c.suspended |= args.suspended;
    c.validate()?;
    Ok(c)
}

pub fn optimize(args: OptimizeArgs) -> Result<()> {
    let mut run = Run::new("optimize", &args, args.out_dir.as_deref())?;
    let config = Config::from_env()?;
    let constraints = constraints_from(&args, &config)?;
    let k_c = args.k_c.or(config.k_c).unwrap_or(DEFAULT_K_C);
    let t = args.t.unwrap_or(constraints.t_min);
    let mut materials = Vec::new();
    for &l in &args.lsq {
        materials.push(MaterialSpec::from_sheet_inductance(l, t, args.tc)?);
    }
    for &rho in &args.rho {
        materials.push(MaterialSpec::with_tc(rho, t, args.tc)?);
    }
    let result = design_opt::optimize(&constraints, k_c, &materials)?;
    let mut verification = Vec::new();
    if args.verify {
        for c in &result.candidates {
            let grid = design_opt::grid_search(&constraints, k_c, &c.material, &GridOptions::default())?;
            let z = c.predicted.impedance;
            let gz = grid.map(|g| g.predicted.impedance);
            let diff = gz.map(|g| (g - z).abs() / z);
            verification.push(Verification {
                sheet_inductance: c.sheet_inductance,
                analytic_impedance: z,
                grid_impedance: gz,
                relative_difference: diff,
                agrees: diff.is_some_and(|d| d <= VERIFY_TOLERANCE),
            });
        }
    }
    let table = result.to_table()?;
    let report = OptimizeReport {
        constraints,
        k_c,
        result,
        verification,
    };
    if run.writes_files() {
        run.emit("optimize.json", &to_json(&report)?)?;
        run.emit("optimize.csv", &table.to_csv_string())?;
    } else {
        let text = match args.format {
            Format::Json => to_json(&report)?,
            Format::Csv => table.to_csv_string(),
            Format::Table => {
                let rows: Vec<(String, &RingGeometry, f64, &ring_model::CircuitParams)> = report
                    .result
                    .candidates
                    .iter()
                    .zip(&table.records)
                    .map(|(c, r)| (r.id.clone(), &c.geometry, c.sheet_inductance, &c.predicted))
                    .collect();
                let rows: Vec<_> = rows.iter().map(|(id, g, l, c)| (id.as_str(), *g, *l, *c)).collect();
                let mut out = circuit_table(&rows);
                for inf in &report.result.infeasible {
                    out.push_str(&format!(
                        "infeasible: rho {} µΩ·cm, t {} nm: {}\n",
                        sig6(inf.material.resistivity),
                        sig6(inf.material.thickness),
                        inf.reason
                    ));
                }
                out
            }
        };
        run.primary("optimize.json", &text)?;
    }
    run.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_ranges() {
        assert_eq!(parse_range("3:10:0.1").unwrap().len(), 71);
        assert_eq!(parse_range("1:1:1").unwrap(), vec![1.0]);
        assert!(parse_range("3:1:1").is_err());
        assert!(parse_range("3:4").is_err());
    }
}
