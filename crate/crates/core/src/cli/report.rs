use std::path::{Path, PathBuf};

use clap::Args;
use serde::Serialize;

use super::manifest::{self, RunManifest};
use super::{text_table, to_json, Run};
use crate::calibration::{sig6, DeviceRecord, DeviceTable};
use crate::error::Result;
use crate::io;

#[derive(Debug, Args, Serialize)]
pub struct ReportArgs {
    /// Manifest files, or directories holding `*.manifest.json`.
    #[arg(required = true)]
    pub manifests: Vec<PathBuf>,
    /// Print JSON instead of the device table.
    #[arg(long)]
    pub json: bool,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Serialize)]
struct RunSummary {
    manifest: PathBuf,
    command: String,
    timestamp: String,
    outputs: Vec<PathBuf>,
    /// Top-level numeric fields of the run's JSON result.
    metrics: serde_json::Map<String, serde_json::Value>,
}

#[derive(Serialize)]
struct Report {
    devices: Vec<DeviceRecord>,
    runs: Vec<RunSummary>,
}

fn is_device_table(text: &str) -> bool {
    text.lines().next().is_some_and(|h| h.starts_with("id,r_in_um,w_nm,l_um,"))
}

fn scalar_metrics(text: &str) -> serde_json::Map<String, serde_json::Value> {
    let Ok(serde_json::Value::Object(map)) = serde_json::from_str(text) else {
        return Default::default();
    };
    map.into_iter().filter(|(_, v)| v.is_number() || v.is_boolean()).collect()
}

pub fn report(args: ReportArgs) -> Result<()> {
    let mut run = Run::new("report", &args, args.out_dir.as_deref())?;
    let paths = manifest::collect_manifests(&args.manifests)?;
    let mut devices = Vec::new();
    let mut runs = Vec::new();
    for path in paths {
        let (text, _) = run.read_input(Some(&path))?;
        let m: RunManifest = serde_json::from_str(&text).map_err(|e| crate::Error::Parse {
            source_name: path.display().to_string(),
            message: e.to_string(),
        })?;
        m.verify(&path)?;
        let dir = path.parent().unwrap_or(Path::new("."));
        let mut metrics = serde_json::Map::new();
        for out in &m.outputs {
            let file = dir.join(&out.path);
            let name = out.path.to_string_lossy();
            if name.ends_with(".csv") {
                let text = io::read_text(&file)?;
                if is_device_table(&text) {
                    let t = DeviceTable::from_csv_str(&text, &file.display().to_string())?;
                    devices.extend(t.records.into_iter().map(|r| DeviceRecord {
                        id: format!("{}:{}", m.command, r.id),
                        ..r
                    }));
                }
            } else if name.ends_with(".json") {
                metrics.extend(scalar_metrics(&io::read_text(&file)?));
            }
        }
        runs.push(RunSummary {
            manifest: path,
            command: m.command,
            timestamp: m.timestamp,
            outputs: m.outputs.into_iter().map(|o| o.path).collect(),
            metrics,
        });
    }
    let table = DeviceTable::new("report", devices)?;
    let report = Report {
        devices: table.records.clone(),
        runs,
    };
    let mut summary = table.to_csv_string();
    if run.writes_files() {
        run.emit("report.csv", &summary)?;
        run.emit("report.json", &to_json(&report)?)?;
    } else if args.json {
        run.primary("report.json", &to_json(&report)?)?;
    } else {
        let rows: Vec<Vec<String>> = report
            .runs
            .iter()
            .map(|r| {
                let metrics: Vec<String> = r
                    .metrics
                    .iter()
                    .map(|(k, v)| match v.as_f64() {
                        Some(x) => format!("{k}={}", sig6(x)),
                        None => format!("{k}={v}"),
                    })
                    .collect();
                vec![r.command.clone(), r.timestamp.clone(), metrics.join(" ")]
            })
            .collect();
        summary.push('\n');
        summary.push_str(&text_table(&["command", "timestamp", "metrics"], &rows));
        run.primary("report.csv", &summary)?;
    }
    run.finish()
}
