//! Trace files, run summaries and stored rod shapes. Files use mm and N.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tdcr_core::scenario::{MetricsReport, SimTrace};

use crate::config::RunConfig;
use crate::error::CliError;

pub const TRACE_FILE: &str = "trace.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const SHAPES_FILE: &str = "shapes.json";

/// One CSV row; field order fixes the header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub t_s: f64,
    pub tip_x_mm: f64,
    pub tip_y_mm: f64,
    pub tip_z_mm: f64,
    #[serde(rename = "tension_N")]
    pub tension_n: f64,
    pub displacement_mm: f64,
    pub error_mm: f64,
    pub lyapunov: f64,
    pub shoot_iters: usize,
    pub shoot_residual: f64,
}

pub fn rows(trace: &SimTrace) -> Vec<TraceRow> {
    trace
        .records
        .iter()
        .map(|r| TraceRow {
            iteration: r.iteration,
            t_s: r.t,
            tip_x_mm: r.tip.x * 1e3,
            tip_y_mm: r.tip.y * 1e3,
            tip_z_mm: r.tip.z * 1e3,
            tension_n: r.tension,
            displacement_mm: r.displacement * 1e3,
            error_mm: r.error * 1e3,
            lyapunov: trace.lyapunov_of(r),
            shoot_iters: r.shooting.iterations,
            shoot_residual: r.shooting.residual_norm,
        })
        .collect()
}

pub fn write_trace(path: &Path, rows: &[TraceRow]) -> Result<(), CliError> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for row in rows {
        writer.serialize(row).map_err(|e| csv_error(path, e))?;
    }
    writer
        .flush()
        .map_err(CliError::io(format!("cannot write {}", path.display())))
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceRow>, CliError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let rows = reader
        .deserialize()
        .collect::<Result<Vec<TraceRow>, _>>()
        .map_err(|e| csv_error(path, e))?;
    if rows.is_empty() {
        return Err(CliError::Input(format!(
            "{}: trace has no rows",
            path.display()
        )));
    }
    Ok(rows)
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    let line = e
        .position()
        .map(|p| format!(" at line {}", p.line()))
        .unwrap_or_default();
    match e.kind() {
        csv::ErrorKind::Io(_) => CliError::Input(format!("cannot access {}: {e}", path.display())),
        _ => CliError::Input(format!("{}: malformed trace{line}: {e}", path.display())),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub config: RunConfig,
    pub controller: String,
    pub iterations: usize,
    pub final_tip_mm: [f64; 3],
    pub final_displacement_mm: f64,
    /// Absent when the run is too short for metrics.
    pub metrics: Option<MetricsReport>,
    pub max_shoot_iters: usize,
    pub max_shoot_residual: f64,
}

pub fn summarize(config: &RunConfig, trace: &SimTrace, metrics: Option<MetricsReport>) -> Summary {
    let last = trace.records.last();
    Summary {
        config: config.clone(),
        controller: trace.controller.name().to_string(),
        iterations: trace.records.len(),
        final_tip_mm: last.map_or([0.0; 3], |r| (r.tip * 1e3).into()),
        final_displacement_mm: last.map_or(0.0, |r| r.displacement * 1e3),
        metrics,
        max_shoot_iters: trace
            .records
            .iter()
            .map(|r| r.shooting.iterations)
            .max()
            .unwrap_or(0),
        max_shoot_residual: trace
            .records
            .iter()
            .map(|r| r.shooting.residual_norm)
            .fold(0.0, f64::max),
    }
}

/// Rod centerlines in mm; entry `k` is the shape after iteration `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeFile {
    pub name: String,
    pub shapes: Vec<Vec<[f64; 3]>>,
}

impl ShapeFile {
    pub fn from_trace(name: &str, trace: &SimTrace) -> Option<Self> {
        let shapes = trace.shapes.as_ref()?;
        Some(ShapeFile {
            name: name.to_string(),
            shapes: shapes
                .iter()
                .map(|s| s.iter().map(|p| (p * 1e3).into()).collect())
                .collect(),
        })
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable output");
    text.push('\n');
    fs::write(path, text).map_err(CliError::io(format!("cannot write {}", path.display())))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

pub fn ensure_dir(dir: &Path) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir).map_err(CliError::io(format!("cannot create {}", dir.display())))?;
    Ok(dir.to_path_buf())
}
