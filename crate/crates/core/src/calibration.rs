//! Device tables, capacitance-law and sheet-inductance calibration, and the
//! impedance scaling checks.

use std::collections::HashSet;
use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ring_model;

pub const APPENDIX_B_CSV: &str = include_str!("../data/appendix_b.csv");
pub const APPENDIX_E_CSV: &str = include_str!("../data/appendix_e.csv");

/// Canonical column order of the device-table CSV.
pub const COLUMNS: [&str; 12] = [
    "id", "r_in_um", "w_nm", "l_um", "p_nm", "t_nm", "f0_GHz", "Lsq_pH", "L_uH", "C_fF", "Z_kOhm", "Qc",
];

/// Relative tolerance of the load-time consistency checks.
pub const CONSISTENCY_TOLERANCE: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceRecord {
    pub id: String,
    #[serde(rename = "r_in_um")]
    pub r_in: f64,
    #[serde(rename = "w_nm")]
    pub w: f64,
    #[serde(rename = "l_um")]
    pub length: f64,
    #[serde(rename = "p_nm")]
    pub p: f64,
    #[serde(rename = "t_nm")]
    pub t: f64,
    #[serde(rename = "f0_GHz")]
    pub f0: f64,
    #[serde(rename = "Lsq_pH")]
    pub sheet_inductance: f64,
    #[serde(rename = "L_uH")]
    pub inductance: f64,
    #[serde(rename = "C_fF")]
    pub capacitance: f64,
    #[serde(rename = "Z_kOhm")]
    pub impedance: f64,
    #[serde(rename = "Qc", default)]
    pub q_c: Option<f64>,
}

impl DeviceRecord {
    fn check_hard_invariants(&self) -> std::result::Result<(), (&'static str, String)> {
        for (col, v) in [
            ("r_in_um", self.r_in),
            ("w_nm", self.w),
            ("l_um", self.length),
            ("p_nm", self.p),
            ("t_nm", self.t),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err((col, format!("must be positive, got {v}")));
            }
        }
        if self.w >= self.p {
            return Err(("w_nm", format!("width {} nm must be below pitch {} nm", self.w, self.p)));
        }
        Ok(())
    }

    pub fn geometry(&self) -> ring_model::RingGeometry {
        ring_model::RingGeometry {
            r_in: self.r_in,
            w: self.w,
            p: self.p,
            t: self.t,
            explicit_length: Some(self.length),
        }
    }

    /// Relative deviation of the Z column from 2π·f0·L.
    pub fn impedance_deviation(&self) -> f64 {
        (self.impedance - ring_model::impedance(self.f0, self.inductance)).abs() / self.impedance
    }

    /// Relative deviation of the L column from (ℓ/w)·L_sq.
    pub fn inductance_deviation(&self) -> f64 {
        let model = ring_model::total_inductance(self.length, self.w, self.sheet_inductance);
        (self.inductance - model).abs() / self.inductance
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConsistencyCheck {
    Impedance,
    Inductance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyFlag {
    pub id: String,
    pub check: ConsistencyCheck,
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceTable {
    pub source: String,
    pub records: Vec<DeviceRecord>,
    #[serde(default)]
    pub flags: Vec<ConsistencyFlag>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Csv,
    Json,
}

impl TableFormat {
    pub fn from_path(path: &Path) -> TableFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => TableFormat::Json,
            _ => TableFormat::Csv,
        }
    }
}

impl DeviceTable {
    /// Validates ids and hard invariants, then computes consistency flags.
    pub fn new(source: impl Into<String>, records: Vec<DeviceRecord>) -> Result<Self> {
        let source = source.into();
        let mut seen = HashSet::new();
        for (i, r) in records.iter().enumerate() {
            if !seen.insert(r.id.clone()) {
                return Err(Error::Table {
                    source_name: source.clone(),
                    row: i + 1,
                    column: "id".into(),
                    message: format!("duplicate id `{}`", r.id),
                });
            }
            r.check_hard_invariants().map_err(|(column, message)| Error::Table {
                source_name: source.clone(),
                row: i + 1,
                column: column.into(),
                message,
            })?;
        }
        let flags = records.iter().flat_map(consistency_flags).collect();
        Ok(DeviceTable { source, records, flags })
    }

    pub fn appendix_b() -> DeviceTable {
        Self::from_csv_str(APPENDIX_B_CSV, "appendix_b.csv").expect("bundled table parses")
    }

    pub fn appendix_e() -> DeviceTable {
        Self::from_csv_str(APPENDIX_E_CSV, "appendix_e.csv").expect("bundled table parses")
    }

    pub fn load(path: &Path, format: TableFormat) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let name = path.display().to_string();
        match format {
            TableFormat::Csv => Self::from_csv_str(&text, &name),
            TableFormat::Json => Self::from_json_str(&text, &name),
        }
    }

    pub fn from_csv_str(text: &str, source: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let headers = rdr
            .headers()
            .map_err(|e| Error::Parse {
                source_name: source.into(),
                message: e.to_string(),
            })?
            .clone();
        if headers.is_empty() || text.trim().is_empty() {
            return Err(Error::Parse {
                source_name: source.into(),
                message: "empty file".into(),
            });
        }
        let mut index = [None; 12];
        for (slot, col) in index.iter_mut().zip(COLUMNS) {
            *slot = headers.iter().position(|h| h == col);
            if slot.is_none() && col != "Qc" {
                return Err(Error::Table {
                    source_name: source.into(),
                    row: 0,
                    column: col.into(),
                    message: "missing column".into(),
                });
            }
        }
        let mut records = Vec::new();
        for (i, row) in rdr.records().enumerate() {
            let row_no = i + 1;
            let row = row.map_err(|e| Error::Table {
                source_name: source.into(),
                row: row_no,
                column: String::new(),
                message: e.to_string(),
            })?;
            let cell = |k: usize| index[k].and_then(|j| row.get(j)).unwrap_or("");
            let num = |k: usize| -> Result<f64> {
                cell(k).parse::<f64>().map_err(|_| Error::Table {
                    source_name: source.into(),
                    row: row_no,
                    column: COLUMNS[k].into(),
                    message: format!("non-numeric cell `{}`", cell(k)),
                })
            };
            let id = cell(0).to_string();
            if id.is_empty() {
                return Err(Error::Table {
                    source_name: source.into(),
                    row: row_no,
                    column: "id".into(),
                    message: "empty id".into(),
                });
            }
            let q_c = if cell(11).is_empty() { None } else { Some(num(11)?) };
            records.push(DeviceRecord {
                id,
                r_in: num(1)?,
                w: num(2)?,
                length: num(3)?,
                p: num(4)?,
                t: num(5)?,
                f0: num(6)?,
                sheet_inductance: num(7)?,
                inductance: num(8)?,
                capacitance: num(9)?,
                impedance: num(10)?,
                q_c,
            });
        }
        if records.is_empty() {
            return Err(Error::Parse {
                source_name: source.into(),
                message: "no data rows".into(),
            });
        }
        Self::new(source, records)
    }

    pub fn from_json_str(text: &str, source: &str) -> Result<Self> {
        let records: Vec<DeviceRecord> = serde_json::from_str(text).map_err(|e| Error::Parse {
            source_name: source.into(),
            message: e.to_string(),
        })?;
        if records.is_empty() {
            return Err(Error::Parse {
                source_name: source.into(),
                message: "no records".into(),
            });
        }
        Self::new(source, records)
    }

    /// Canonical CSV: fixed column order, six significant digits, LF endings.
    pub fn to_csv_string(&self) -> String {
        let mut out = COLUMNS.join(",");
        out.push('\n');
        for r in &self.records {
            let cells = [
                r.id.clone(),
                sig6(r.r_in),
                sig6(r.w),
                sig6(r.length),
                sig6(r.p),
                sig6(r.t),
                sig6(r.f0),
                sig6(r.sheet_inductance),
                sig6(r.inductance),
                sig6(r.capacitance),
                sig6(r.impedance),
                r.q_c.map(sig6).unwrap_or_default(),
            ];
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json_string(&self) -> Result<String> {
        let values: Vec<serde_json::Value> = self
            .records
            .iter()
            .map(|r| {
                let mut v = serde_json::to_value(r)?;
                for key in COLUMNS.iter().skip(1) {
                    if let Some(x) = v.get_mut(*key).and_then(|x| x.as_f64()) {
                        v[*key] = serde_json::json!(round_sig6(x));
                    }
                }
                Ok(v)
            })
            .collect::<std::result::Result<_, serde_json::Error>>()?;
        Ok(serde_json::to_string_pretty(&values)?)
    }

    /// Records grouped by film, i.e. equal (L_sq, t), in first-seen order.
    pub fn films(&self) -> Vec<Vec<&DeviceRecord>> {
        let mut groups: Vec<Vec<&DeviceRecord>> = Vec::new();
        for r in &self.records {
            match groups
                .iter_mut()
                .find(|g| g[0].sheet_inductance == r.sheet_inductance && g[0].t == r.t)
            {
                Some(g) => g.push(r),
                None => groups.push(vec![r]),
            }
        }
        groups
    }
}

fn consistency_flags(r: &DeviceRecord) -> Vec<ConsistencyFlag> {
    let mut flags = Vec::new();
    let dz = r.impedance_deviation();
    if dz > CONSISTENCY_TOLERANCE {
        flags.push(ConsistencyFlag {
            id: r.id.clone(),
            check: ConsistencyCheck::Impedance,
            deviation: dz,
        });
    }
    let dl = r.inductance_deviation();
    if dl > CONSISTENCY_TOLERANCE {
        flags.push(ConsistencyFlag {
            id: r.id.clone(),
            check: ConsistencyCheck::Inductance,
            deviation: dl,
        });
    }
    flags
}

pub fn round_sig6(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.5e}").parse().unwrap_or(x)
}

/// Shortest decimal rendering of `x` rounded to six significant digits.
pub fn sig6(x: f64) -> String {
    format!("{}", round_sig6(x))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowResidual {
    pub id: String,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacitanceFit {
    /// fF/µm
    pub k_c: f64,
    pub std_error: f64,
    /// (C − k_C·r_in)/(k_C·r_in) per row.
    pub residuals: Vec<RowResidual>,
    pub max_abs_residual: f64,
}

/// Least-squares slope of C against r_in through the origin.
pub fn fit_k_c(table: &DeviceTable) -> Result<CapacitanceFit> {
    let rows: Vec<&DeviceRecord> = table
        .records
        .iter()
        .filter(|r| r.capacitance.is_finite() && r.capacitance > 0.0 && r.r_in > 0.0)
        .collect();
    if rows.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "capacitance fit needs at least 2 rows with C and r_in, got {}",
            rows.len()
        )));
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.r_in).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.capacitance).collect();
    let fit = origin_fit(&xs, &ys);
    let residuals: Vec<RowResidual> = rows
        .iter()
        .map(|r| RowResidual {
            id: r.id.clone(),
            residual: (r.capacitance - fit.slope * r.r_in) / (fit.slope * r.r_in),
        })
        .collect();
    let max_abs_residual = residuals.iter().map(|r| r.residual.abs()).fold(0.0, f64::max);
    Ok(CapacitanceFit {
        k_c: fit.slope,
        std_error: fit.slope_std_error,
        residuals,
        max_abs_residual,
    })
}

/// Sheet inductance (pH/sq) minimizing Σ(f0_model − f0_meas)² over records of
/// one film, using their tabulated lengths and C = k_C·r_in.
///
/// f0_model = a_i/sqrt(L_sq), so the problem is linear in 1/sqrt(L_sq).
pub fn fit_sheet_inductance(records: &[&DeviceRecord], k_c: f64) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::InsufficientData("no records for sheet-inductance fit".into()));
    }
    if !(k_c > 0.0) {
        return Err(Error::invalid(format!("k_C must be positive, got {k_c}")));
    }
    let (mut num, mut den) = (0.0, 0.0);
    for r in records {
        if !(r.f0 > 0.0) {
            return Err(Error::invalid(format!("record {} has no measured f0", r.id)));
        }
        let squares = ring_model::squares(r.length, r.w);
        let c = ring_model::capacitance(r.r_in, k_c) * 1e-15;
        // f0 in GHz for L_sq = 1 pH/sq
        let a = 1.0 / (2.0 * PI * (squares * 1e-12 * c / 4.0).sqrt()) * 1e-9;
        num += a * r.f0;
        den += a * a;
    }
    let x = num / den;
    Ok(1.0 / (x * x))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OriginFit {
    pub slope: f64,
    pub slope_std_error: f64,
    /// Uncentered R² = 1 − SS_res/Σy², the conventional figure for a model
    /// without intercept.
    pub r_squared: f64,
    /// R² against the mean of y, reported for comparison.
    pub r_squared_centered: f64,
    /// max |y/(slope·x) − 1|
    pub max_deviation: f64,
    pub n: usize,
}

pub fn origin_fit(xs: &[f64], ys: &[f64]) -> OriginFit {
    let n = xs.len();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let syy: f64 = ys.iter().map(|y| y * y).sum();
    let slope = sxy / sxx;
    let ss_res: f64 = xs.iter().zip(ys).map(|(x, y)| (y - slope * x).powi(2)).sum();
    let mean = ys.iter().sum::<f64>() / n as f64;
    let ss_tot: f64 = ys.iter().map(|y| (y - mean).powi(2)).sum();
    let max_deviation = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y / (slope * x) - 1.0).abs())
        .fold(0.0, f64::max);
    let slope_std_error = if n > 1 {
        (ss_res / (n as f64 - 1.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    OriginFit {
        slope,
        slope_std_error,
        r_squared: 1.0 - ss_res / syy,
        r_squared_centered: if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 },
        max_deviation,
        n,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProductSpread {
    /// Ω·Hz·m
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    /// The constant (max + min)/2 minimizing the worst relative deviation.
    pub center: f64,
    /// Worst relative deviation of any row from `center`.
    pub max_deviation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    /// Z (kΩ) against sqrt(r_in·L_sq/(p·w)).
    pub impedance_fit: OriginFit,
    /// Z·f0 (kΩ·GHz) against 1/r_in (1/µm).
    pub product_fit: OriginFit,
    /// Z·f0·r_in per row.
    pub radius_product: ProductSpread,
}

pub fn validate_scaling(table: &DeviceTable) -> Result<ScalingReport> {
    let rows = &table.records;
    if rows.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "scaling validation needs at least 3 rows, got {}",
            rows.len()
        )));
    }
    let x1: Vec<f64> = rows
        .iter()
        .map(|r| (r.r_in * r.sheet_inductance / (r.p * r.w)).sqrt())
        .collect();
    let y1: Vec<f64> = rows.iter().map(|r| r.impedance).collect();
    let x2: Vec<f64> = rows.iter().map(|r| 1.0 / r.r_in).collect();
    let y2: Vec<f64> = rows.iter().map(|r| r.impedance * r.f0).collect();
    let products: Vec<f64> = rows
        .iter()
        .map(|r| r.impedance * 1e3 * r.f0 * 1e9 * r.r_in * 1e-6)
        .collect();
    let min = products.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = products.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let center = 0.5 * (min + max);
    Ok(ScalingReport {
        impedance_fit: origin_fit(&x1, &y1),
        product_fit: origin_fit(&x2, &y2),
        radius_product: ProductSpread {
            mean: products.iter().sum::<f64>() / products.len() as f64,
            min,
            max,
            center,
            max_deviation: (max - center) / center,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn bundled_tables_load() {
        let b = DeviceTable::appendix_b();
        assert_eq!(b.records.len(), 22);
        let e = DeviceTable::appendix_e();
        assert_eq!(e.records.len(), 10);
        assert!(e.flags.is_empty(), "{:?}", e.flags);
        assert_eq!(b.records[16].q_c, Some(140_000.0));
        assert_eq!(e.records[0].q_c, None);
    }

    #[test]
    fn appendix_b_flags_only_the_misprinted_row() {
        // Row 20 lists Z = 113.09 kΩ while 2π·5.11 GHz·3.60 µH = 115.6 kΩ.
        let b = DeviceTable::appendix_b();
        assert_eq!(b.flags.len(), 1, "{:?}", b.flags);
        assert_eq!(b.flags[0].id, "20");
        assert_eq!(b.flags[0].check, ConsistencyCheck::Impedance);
        assert!(b.flags[0].deviation < 0.025);
    }

    #[test]
    fn empty_file_is_a_parse_error() {
        assert!(matches!(DeviceTable::from_csv_str("", "x.csv"), Err(Error::Parse { .. })));
        let header_only = format!("{}\n", COLUMNS.join(","));
        assert!(matches!(DeviceTable::from_csv_str(&header_only, "x.csv"), Err(Error::Parse { .. })));
    }

    #[test]
    fn load_errors_carry_locations() {
        let missing = "id,r_in_um,w_nm\n1,2,3\n";
        match DeviceTable::from_csv_str(missing, "m.csv") {
            Err(Error::Table { column, row: 0, .. }) => assert_eq!(column, "l_um"),
            other => panic!("{other:?}"),
        }
        let bad = APPENDIX_E_CSV.replacen("3.2,120", "3.2,abc", 1);
        match DeviceTable::from_csv_str(&bad, "b.csv") {
            Err(Error::Table { column, row: 1, message, .. }) => {
                assert_eq!(column, "w_nm");
                assert!(message.contains("abc"));
            }
            other => panic!("{other:?}"),
        }
        let dup = APPENDIX_E_CSV.replacen("\n24,", "\n23,", 1);
        match DeviceTable::from_csv_str(&dup, "d.csv") {
            Err(Error::Table { column, row: 2, .. }) => assert_eq!(column, "id"),
            other => panic!("{other:?}"),
        }
        let wide = APPENDIX_E_CSV.replacen("3.2,120,367,200", "3.2,220,367,200", 1);
        assert!(matches!(DeviceTable::from_csv_str(&wide, "w.csv"), Err(Error::Table { row: 1, .. })));
    }

    #[test]
    fn json_mirror_matches_csv() {
        let b = DeviceTable::appendix_b();
        let json = b.to_json_string().unwrap();
        let back = DeviceTable::from_json_str(&json, "appendix_b.csv").unwrap();
        assert_eq!(back.records, b.records);
    }

    #[test]
    fn k_c_from_reference_tables() {
        let b = fit_k_c(&DeviceTable::appendix_b()).unwrap();
        assert!((b.k_c - 0.160).abs() <= 0.005, "{}", b.k_c);
        let e = fit_k_c(&DeviceTable::appendix_e()).unwrap();
        assert!((e.k_c - 0.161).abs() <= 0.005, "{}", e.k_c);
        assert!(e.max_abs_residual < 0.04);
    }

    #[test]
    fn k_c_exact_line() {
        let mut t = DeviceTable::appendix_e();
        for r in &mut t.records {
            r.capacitance = 0.2 * r.r_in;
        }
        let fit = fit_k_c(&t).unwrap();
        assert!(rel(fit.k_c, 0.2) < 1e-14);
        assert!(fit.max_abs_residual < 1e-12);
    }

    #[test]
    fn k_c_needs_two_rows() {
        let mut t = DeviceTable::appendix_e();
        t.records.truncate(1);
        assert!(matches!(fit_k_c(&t), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn k_c_scale_equivariance() {
        let t = DeviceTable::appendix_b();
        let k = fit_k_c(&t).unwrap().k_c;
        for s in [0.5, 2.0, 8.0] {
            let mut scaled = t.clone();
            scaled.records.iter_mut().for_each(|r| r.capacitance *= s);
            assert_eq!(fit_k_c(&scaled).unwrap().k_c, k * s);
        }
        let mut scaled = t.clone();
        scaled.records.iter_mut().for_each(|r| r.capacitance *= 1.37);
        assert!(rel(fit_k_c(&scaled).unwrap().k_c, k * 1.37) < 1e-14);
    }

    #[test]
    fn sheet_inductance_single_row_closed_form() {
        let b = DeviceTable::appendix_b();
        let row1 = &b.records[0];
        let l = fit_sheet_inductance(&[row1], 0.160).unwrap();
        let omega = 2.0 * PI * 5.95e9;
        let closed = 4.0 * 170e-9 / (1849e-6 * omega * omega * 0.160e-15 / 1e-6 * 9.1e-6) / 1e-12;
        assert!(rel(l, closed) < 1e-12);
        assert!((l - 181.0).abs() < 1.0, "{l}");
    }

    #[test]
    fn sheet_inductance_highest_resistivity_film() {
        let b = DeviceTable::appendix_b();
        let rows: Vec<&DeviceRecord> = b.records[16..22].iter().collect();
        let l = fit_sheet_inductance(&rows, 0.160).unwrap();
        assert!(rel(l, 670.0) < 0.03, "{l}");
    }

    #[test]
    fn sheet_inductance_recovers_synthetic_film() {
        let k = ring_model::CalibrationConstants::default();
        // lengths follow the turn-free layout ℓ = 2π·r_in²/p, for which the
        // scaling laws are exact
        let records: Vec<DeviceRecord> = [(4.0, 200.0), (5.5, 250.0), (7.0, 300.0)]
            .iter()
            .enumerate()
            .map(|(i, &(r, p))| {
                let l = 2.0 * PI * r * r / (p * 1e-3);
                let g = ring_model::RingGeometry::new(r, 150.0, p, 20.0).unwrap().with_length(l);
                let c = ring_model::predict_with_sheet_inductance(&g, 500.0, &k).unwrap();
                DeviceRecord {
                    id: format!("s{i}"),
                    r_in: r,
                    w: 150.0,
                    length: l,
                    p,
                    t: 20.0,
                    f0: c.f0,
                    sheet_inductance: 500.0,
                    inductance: c.inductance,
                    capacitance: c.capacitance,
                    impedance: c.impedance,
                    q_c: None,
                }
            })
            .collect();
        let refs: Vec<&DeviceRecord> = records.iter().collect();
        assert!(rel(fit_sheet_inductance(&refs, 0.160).unwrap(), 500.0) < 1e-3);
        assert!(fit_sheet_inductance(&[], 0.160).is_err());

        let table = DeviceTable::new("synthetic", records).unwrap();
        let report = validate_scaling(&table).unwrap();
        assert!((report.impedance_fit.r_squared - 1.0).abs() < 1e-12);
        assert!((report.product_fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn films_group_by_sheet_inductance_and_thickness() {
        let b = DeviceTable::appendix_b();
        let films = b.films();
        let sizes: Vec<usize> = films.iter().map(|f| f.len()).collect();
        assert_eq!(sizes, vec![2, 6, 4, 4, 6]);
    }

    #[test]
    fn radius_product_is_constant() {
        let report = validate_scaling(&DeviceTable::appendix_b()).unwrap();
        assert!(rel(report.radius_product.mean, 3.97e9) < 0.06, "{}", report.radius_product.mean);
        assert!(report.radius_product.max_deviation <= 0.06);
    }

    #[test]
    fn sig6_formatting() {
        assert_eq!(sig6(1849.0), "1849");
        assert_eq!(sig6(0.518), "0.518");
        assert_eq!(sig6(1.234_567_89), "1.23457");
        assert_eq!(sig6(123_456_789.0), "123457000");
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        fn record() -> impl Strategy<Value = DeviceRecord> {
            (
                (1.0f64..20.0, 50.0f64..200.0, 100.0f64..3000.0, 10.0f64..400.0, 10.0f64..50.0),
                (1.0f64..10.0, 100.0f64..2000.0, 0.5f64..10.0, 0.3f64..2.0, 50.0f64..300.0),
                proptest::option::of(1e3f64..1e6),
            )
                .prop_map(|((r, w, l, dp, t), (f0, lsq, big_l, c, z), q)| DeviceRecord {
                    id: String::new(),
                    r_in: round_sig6(r),
                    w: round_sig6(w),
                    length: round_sig6(l),
                    p: round_sig6(w + dp),
                    t: round_sig6(t),
                    f0: round_sig6(f0),
                    sheet_inductance: round_sig6(lsq),
                    inductance: round_sig6(big_l),
                    capacitance: round_sig6(c),
                    impedance: round_sig6(z),
                    q_c: q.map(round_sig6),
                })
        }

        proptest! {
            #[test]
            fn csv_and_json_round_trip(mut rows in proptest::collection::vec(record(), 1..12)) {
                for (i, r) in rows.iter_mut().enumerate() {
                    r.id = format!("d{i}");
                }
                let t = DeviceTable::new("p", rows).unwrap();
                let csv = t.to_csv_string();
                let back = DeviceTable::from_csv_str(&csv, "p").unwrap();
                prop_assert_eq!(&back.records, &t.records);
                prop_assert_eq!(back.to_csv_string(), csv);
                let json = DeviceTable::from_json_str(&t.to_json_string().unwrap(), "p").unwrap();
                prop_assert_eq!(&json.records, &t.records);
            }
        }
    }
}
