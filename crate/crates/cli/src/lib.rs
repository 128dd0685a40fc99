//! Batch experiment runner: one TOML config in, a deterministic
//! `report.json` plus data files and plots out.

// `!(x > 0.0)` is used on purpose so NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod plot;
mod run;

use std::path::{Path, PathBuf};
use std::time::Instant;

use geoflow_core::GeoError;
use serde::Serialize;
use serde_json::Value;

pub use config::{ExperimentConfig, ExperimentKind};
pub use plot::{emit_plot_data, Series, Style};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_INCONCLUSIVE: i32 = 4;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(#[from] GeoError),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => EXIT_CONFIG,
            Self::Numerical(_) => EXIT_NUMERICAL,
            Self::Io(_) => EXIT_IO,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Ok,
    /// Every verdict produced was inconclusive.
    Inconclusive,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Self::Ok => EXIT_OK,
            Self::Inconclusive => EXIT_INCONCLUSIVE,
        }
    }
}

/// Reproducible part of a run: identical config and seed give identical bytes.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub seed: u64,
    pub status: Status,
    pub config: Value,
    pub result: Value,
    pub files: Vec<String>,
    pub warnings: Vec<String>,
}

/// Non-reproducible provenance, kept out of `report.json`.
#[derive(Debug, Clone, Serialize)]
pub struct RunMeta {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub seed: u64,
    pub threads: usize,
    pub wall_time_s: f64,
    pub timings: Vec<(String, f64)>,
}

/// Everything an experiment produced, before anything touches the disk.
#[derive(Debug, Default)]
pub(crate) struct Output {
    pub result: Value,
    pub files: Vec<(String, Vec<u8>)>,
    pub series: Vec<Series>,
    pub inconclusive_only: bool,
    pub warnings: Vec<String>,
    pub timings: Vec<(String, f64)>,
}

/// Runs one experiment and writes its outputs into `out_dir`.
///
/// Config errors are detected before any file is written; numerical
/// failures also leave the directory untouched.
pub fn run_experiment(
    kind: ExperimentKind,
    config: &ExperimentConfig,
    out_dir: &Path,
) -> Result<(ExperimentReport, Vec<PathBuf>), CliError> {
    let clock = Instant::now();
    config.validate(kind)?;
    let metric = config
        .metric
        .as_ref()
        .map(|m| m.build().map_err(|e| CliError::Config(format!("metric: {e}"))))
        .transpose()?;
    let out = run::dispatch(kind, config, metric.as_ref())?;

    std::fs::create_dir_all(out_dir).map_err(|e| CliError::Io(format!("{}: {e}", out_dir.display())))?;
    let mut written = Vec::new();
    for (name, bytes) in &out.files {
        let path = out_dir.join(name);
        std::fs::write(&path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        written.push(path);
    }
    let (plots, plot_warnings) = emit_plot_data(&out.series, config.plots.as_deref(), out_dir)?;
    written.extend(plots);
    let mut warnings = out.warnings;
    warnings.extend(plot_warnings);
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let mut files: Vec<String> = written
        .iter()
        .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .collect();
    files.sort();
    let report = ExperimentReport {
        tool: "geoflow",
        version: env!("CARGO_PKG_VERSION"),
        command: kind.name(),
        seed: config.seed,
        status: if out.inconclusive_only {
            Status::Inconclusive
        } else {
            Status::Ok
        },
        config: serde_json::to_value(config).expect("config serializes"),
        result: out.result,
        files,
        warnings,
    };
    let report_path = out_dir.join("report.json");
    write_json(&report_path, &report)?;
    written.push(report_path);
    let meta = RunMeta {
        tool: report.tool,
        version: report.version,
        command: report.command,
        seed: report.seed,
        threads: rayon::current_num_threads(),
        wall_time_s: clock.elapsed().as_secs_f64(),
        timings: out.timings,
    };
    let meta_path = out_dir.join("run_meta.json");
    write_json(&meta_path, &meta)?;
    written.push(meta_path);
    Ok((report, written))
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(v).expect("report serializes");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}
