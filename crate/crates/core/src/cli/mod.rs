//! The `ringforge` command line.
//!
//! Without `--out-dir` a command prints its primary result to stdout. With
//! it, results, plot-data CSVs and optional SVGs are written to the
//! directory together with `<command>.manifest.json`.
//!
//! Exit codes: 0 success, 1 runtime or fit failure, 2 usage or validation.

use std::io::{Read as _, Write as _};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::io;

pub mod config;
mod design;
mod fit;
mod generate;
pub mod manifest;
mod report;
pub mod svg;

use manifest::{FileDigest, RunManifest, MANIFEST_SUFFIX, STDIN};

#[derive(Debug, Parser)]
#[command(name = "ringforge", version, about = "Design and analysis of granular-aluminum ring resonators")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sheet parameters of a film, or the resistivity for a target L_sq.
    Material(design::MaterialArgs),
    /// Forward circuit model of one ring, optionally swept.
    Ring(design::RingArgs),
    /// Capacitance law and scaling checks on a device table.
    Calibrate(design::CalibrateArgs),
    /// Highest-impedance layouts in a frequency band.
    Optimize(design::OptimizeArgs),
    /// Reflection fit of a resonance trace or power sweep.
    #[command(name = "fit-s11")]
    FitS11(fit::FitS11Args),
    /// Frequency-noise spectrum and model selection.
    #[command(name = "fit-noise")]
    FitNoise(fit::FitNoiseArgs),
    /// Self-Kerr coefficient and anomalous-shift test.
    #[command(name = "fit-kerr")]
    FitKerr(fit::FitKerrArgs),
    /// Seeded synthetic data in the fitters' input formats.
    Synth(generate::SynthArgs),
    /// Verify manifests and aggregate their device tables.
    Report(report::ReportArgs),
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            let body = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{body}");
            if e.is_usage() {
                2
            } else {
                1
            }
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Material(a) => design::material(a),
        Command::Ring(a) => design::ring(a),
        Command::Calibrate(a) => design::calibrate(a),
        Command::Optimize(a) => design::optimize(a),
        Command::FitS11(a) => fit::fit_s11(a),
        Command::FitNoise(a) => fit::fit_noise(a),
        Command::FitKerr(a) => fit::fit_kerr(a),
        Command::Synth(a) => generate::synth(a),
        Command::Report(a) => report::report(a),
    }
}

/// One invocation: input digests, emitted files, and the manifest.
pub(crate) struct Run {
    manifest: RunManifest,
    out_dir: Option<PathBuf>,
    manifest_path: Option<PathBuf>,
}

impl Run {
    pub(crate) fn new(command: &str, params: &impl Serialize, out_dir: Option<&Path>) -> Result<Run> {
        if let Some(d) = out_dir {
            std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
        }
        Ok(Run {
            manifest: RunManifest::new(command, serde_json::to_value(params)?),
            out_dir: out_dir.map(Path::to_path_buf),
            manifest_path: out_dir.map(|d| d.join(format!("{command}{MANIFEST_SUFFIX}"))),
        })
    }

    /// Single-file output; the manifest sits beside it.
    pub(crate) fn for_file(command: &str, params: &impl Serialize, out: Option<&Path>) -> Result<Run> {
        let dir = out.map(|p| p.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new(".")));
        let mut run = Run::new(command, params, dir)?;
        if let Some(p) = out {
            let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("out");
            run.manifest_path = dir.map(|d| d.join(format!("{name}{MANIFEST_SUFFIX}")));
        }
        Ok(run)
    }

    pub(crate) fn writes_files(&self) -> bool {
        self.out_dir.is_some()
    }

    /// Reads a path, or stdin for `-`/none, and records its digest.
    pub(crate) fn read_input(&mut self, path: Option<&Path>) -> Result<(String, String)> {
        let (text, recorded, name) = match path {
            Some(p) if p != Path::new(STDIN) => {
                let text = io::read_text(p)?;
                let abs = std::fs::canonicalize(p).map_err(|e| Error::io(p, e))?;
                (text, abs, p.display().to_string())
            }
            _ => {
                let mut text = String::new();
                std::io::stdin()
                    .read_to_string(&mut text)
                    .map_err(|e| Error::io(STDIN, e))?;
                (text, PathBuf::from(STDIN), "<stdin>".to_owned())
            }
        };
        self.manifest.inputs.push(FileDigest {
            path: recorded,
            sha256: manifest::sha256_hex(text.as_bytes()),
        });
        Ok((text, name))
    }

    /// Writes `name` into the output directory; a no-op without one.
    pub(crate) fn emit(&mut self, name: &str, contents: &str) -> Result<()> {
        let Some(dir) = &self.out_dir else {
            return Ok(());
        };
        io::write_atomic(&dir.join(name), contents.as_bytes())?;
        self.manifest.outputs.push(FileDigest {
            path: PathBuf::from(name),
            sha256: manifest::sha256_hex(contents.as_bytes()),
        });
        Ok(())
    }

    /// The command's main result: emitted as `name`, or printed when no
    /// output directory was given.
    pub(crate) fn primary(&mut self, name: &str, contents: &str) -> Result<()> {
        if self.writes_files() {
            self.emit(name, contents)
        } else {
            let mut out = std::io::stdout().lock();
            out.write_all(contents.as_bytes()).map_err(|e| Error::io("<stdout>", e))?;
            if !contents.ends_with('\n') {
                let _ = out.write_all(b"\n");
            }
            Ok(())
        }
    }

    pub(crate) fn finish(self) -> Result<()> {
        match &self.manifest_path {
            Some(p) => self.manifest.write(p),
            None => Ok(()),
        }
    }
}

pub(crate) fn to_json(value: &impl Serialize) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// `a:b` as a pair.
pub(crate) fn parse_pair(s: &str) -> std::result::Result<[f64; 2], String> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [a, b] => Ok([
            a.trim().parse().map_err(|_| format!("`{a}` is not a number"))?,
            b.trim().parse().map_err(|_| format!("`{b}` is not a number"))?,
        ]),
        _ => Err(format!("expected `min:max`, got `{s}`")),
    }
}

/// Aligned text table.
pub(crate) fn text_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:>w$}", w = *w))
            .collect();
        padded.join("  ").trim_end().to_owned() + "\n"
    };
    let mut out = line(header.to_vec());
    for r in rows {
        out.push_str(&line(r.iter().map(String::as_str).collect()));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_parsing() {
        assert_eq!(parse_pair("4:8").unwrap(), [4.0, 8.0]);
        assert!(parse_pair("4").is_err());
        assert!(parse_pair("a:8").is_err());
    }
}
