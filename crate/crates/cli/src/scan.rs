use std::fs;
use std::path::{Path, PathBuf};

use lgtquench_core::dqpt::{on_total_rate, EventKind};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{set_path, ConfigError, RunConfig};
use crate::run::{run, write_json, RunError};

#[derive(Debug, Error)]
pub enum ScanError {
    #[error("the parameter grid is empty")]
    EmptyGrid,
    #[error("grid axis `{0}` has no values")]
    EmptyAxis(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Run(#[from] RunError),
    #[error("cannot build a pool of {0} workers: {1}")]
    Pool(usize, String),
}

/// Axes of a Cartesian parameter grid; keys are dotted config paths.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParameterGrid {
    pub axes: Vec<(String, Vec<toml::Value>)>,
}

impl ParameterGrid {
    /// Reads a `[grid]` table whose entries are arrays of values. Axes are
    /// ordered by key.
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let doc: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Syntax(e.to_string()))?;
        let grid = doc.get("grid").and_then(toml::Value::as_table).ok_or_else(|| ConfigError::Field {
            path: "grid".into(),
            message: "missing table".into(),
        })?;
        let mut axes = Vec::new();
        for (key, values) in grid {
            let values = values.as_array().ok_or_else(|| ConfigError::Field {
                path: format!("grid.{key}"),
                message: "expected an array of values".into(),
            })?;
            axes.push((key.clone(), values.clone()));
        }
        Ok(Self { axes })
    }

    /// Every combination, the last axis varying fastest.
    pub fn points(&self) -> Result<Vec<Vec<(String, toml::Value)>>, ScanError> {
        if self.axes.is_empty() {
            return Err(ScanError::EmptyGrid);
        }
        let mut points = vec![Vec::new()];
        for (key, values) in &self.axes {
            if values.is_empty() {
                return Err(ScanError::EmptyAxis(key.clone()));
            }
            points = points
                .into_iter()
                .flat_map(|p: Vec<(String, toml::Value)>| {
                    values.iter().map(move |v| {
                        let mut q = p.clone();
                        q.push((key.clone(), v.clone()));
                        q
                    })
                })
                .collect();
        }
        Ok(points)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointStatus {
    Ok,
    /// The backend stopped early; artifacts hold the partial series.
    Partial,
    Failed,
}

/// One row of the scan summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub index: usize,
    pub dir: PathBuf,
    pub values: Vec<(String, String)>,
    pub status: PointStatus,
    pub branch: usize,
    pub manifold: usize,
    pub degeneracy_intervals: usize,
    /// Branch events that show up in the total rate.
    pub branch_total: usize,
    pub message: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanSummary {
    pub workers: usize,
    pub points: Vec<ScanPoint>,
}

impl ScanSummary {
    pub fn failures(&self) -> usize {
        self.points.iter().filter(|p| p.status != PointStatus::Ok).count()
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), RunError> {
        let io = |source| RunError::Io { path: path.to_path_buf(), source };
        let mut w = csv::Writer::from_path(path).map_err(|e| io(e.into()))?;
        let mut header = vec!["point".to_string()];
        if let Some(p) = self.points.first() {
            header.extend(p.values.iter().map(|(k, _)| k.clone()));
        }
        header.extend(["status", "branch", "manifold", "degeneracy_intervals", "branch_total", "dir", "message"].map(String::from));
        w.write_record(&header).map_err(|e| io(e.into()))?;
        for p in &self.points {
            let mut row = vec![p.index.to_string()];
            row.extend(p.values.iter().map(|(_, v)| v.clone()));
            let status = serde_json::to_value(p.status).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
            row.push(status);
            row.extend([p.branch, p.manifold, p.degeneracy_intervals, p.branch_total].map(|x| x.to_string()));
            row.push(p.dir.display().to_string());
            row.push(p.message.clone().unwrap_or_default());
            w.write_record(&row).map_err(|e| io(e.into()))?;
        }
        w.flush().map_err(io)
    }
}

fn display(v: &toml::Value) -> String {
    match v {
        toml::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn run_point(template: &toml::Table, root: &Path, index: usize, point: &[(String, toml::Value)]) -> ScanPoint {
    let dir = root.join(format!("point_{index:04}"));
    let values = point.iter().map(|(k, v)| (k.clone(), display(v))).collect();
    let mut row = ScanPoint {
        index,
        dir: dir.clone(),
        values,
        status: PointStatus::Failed,
        branch: 0,
        manifold: 0,
        degeneracy_intervals: 0,
        branch_total: 0,
        message: None,
    };
    let mut table = template.clone();
    let built = point
        .iter()
        .try_for_each(|(k, v)| set_path(&mut table, k, v.clone()))
        .and_then(|_| set_path(&mut table, "output_dir", toml::Value::String(dir.display().to_string())))
        .and_then(|_| RunConfig::from_table(table));
    let cfg = match built {
        Ok(cfg) => cfg,
        Err(e) => {
            row.message = Some(e.to_string());
            return row;
        }
    };
    let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| run(&cfg)));
    match result {
        Ok(Ok(report)) => {
            let d = &report.output.detection;
            row.branch = d.count(EventKind::Branch);
            row.manifold = d.count(EventKind::Manifold);
            row.degeneracy_intervals = d.intervals.len();
            row.branch_total = d
                .events
                .iter()
                .filter(|e| e.kind == EventKind::Branch && on_total_rate(&report.output.series, e))
                .count();
            row.message = report.output.diagnostics.failure.clone();
            row.status = if report.succeeded() { PointStatus::Ok } else { PointStatus::Partial };
        }
        Ok(Err(e)) => row.message = Some(e.to_string()),
        Err(panic) => {
            let msg = panic.downcast_ref::<String>().cloned().or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()));
            row.message = Some(format!("panicked: {}", msg.unwrap_or_default()));
        }
    }
    row
}

/// Runs one job per grid point with at most `workers` running at once; each
/// job writes to its own `point_NNNN` directory under `root`. A failing point
/// is recorded in the summary and does not stop the others.
pub fn scan(template: &toml::Table, grid: &ParameterGrid, root: &Path, workers: usize) -> Result<ScanSummary, ScanError> {
    let points = grid.points()?;
    let workers = workers.max(1);
    fs::create_dir_all(root).map_err(|source| RunError::Io { path: root.to_path_buf(), source })?;
    let job = |(i, p): (usize, &Vec<(String, toml::Value)>)| run_point(template, root, i, p);
    #[cfg(feature = "parallel")]
    let rows: Vec<ScanPoint> = {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build().map_err(|e| ScanError::Pool(workers, e.to_string()))?;
        pool.install(|| points.par_iter().enumerate().map(job).collect())
    };
    #[cfg(not(feature = "parallel"))]
    let rows: Vec<ScanPoint> = points.iter().enumerate().map(job).collect();
    let summary = ScanSummary { workers, points: rows };
    summary.write_csv(&root.join("summary.csv"))?;
    write_json(&root.join("summary.json"), &summary)?;
    Ok(summary)
}
