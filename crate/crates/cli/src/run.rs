use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use lgtquench_core::dqpt::{detect, Detection, EventsDocument, ReturnRateSeries};
use lgtquench_core::exact::{run_quench_exact, ExactQuench, ObservableSample, ObservableSpec};
use lgtquench_core::freefermion::{nd_analytic, return_rate_analytic_grid};
use lgtquench_core::model::{named_state, resonance_report, GaugeSector, LatticeSpec, ResonanceReport};
use lgtquench_umps::{run_quench_umps, UmpsQuench};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{Backend, ConfigError, RunConfig};
use crate::table::{SeriesTable, TableError};

pub const SERIES_FILE: &str = "series.csv";
pub const EVENTS_FILE: &str = "events.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_SCHEMA: &str = "lgtquench.manifest";
pub const MANIFEST_VERSION: u32 = 1;

/// Energy window for calling two product states degenerate.
const RESONANCE_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("backend failed before producing any output: {0}")]
    Backend(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Table(#[from] TableError),
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
}

/// Run diagnostics; fields a backend does not produce stay `None`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub n_points: usize,
    /// Last valid time when the backend stopped early.
    pub horizon: Option<f64>,
    pub failure: Option<String>,
    pub max_truncation: Option<f64>,
    pub max_bond_dim: Option<usize>,
    pub energy_drift: Option<f64>,
    pub max_norm_error: Option<f64>,
    pub hilbert_dimension: Option<usize>,
    pub max_gauge_violation: Option<f64>,
}

/// Everything a backend produced, before it is written out.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    pub series: ReturnRateSeries,
    pub table: SeriesTable,
    pub detection: Detection,
    pub diagnostics: Diagnostics,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArtifactFiles {
    pub series: String,
    pub events: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema: String,
    pub version: u32,
    pub code_version: String,
    pub config: RunConfig,
    pub resonance: ResonanceReport,
    pub wall_time_s: f64,
    pub diagnostics: Diagnostics,
    pub files: ArtifactFiles,
}

impl RunManifest {
    pub fn read(path: &Path) -> Result<Self, RunError> {
        let text = fs::read_to_string(path).map_err(|source| RunError::Io { path: path.to_path_buf(), source })?;
        serde_json::from_str(&text).map_err(|source| RunError::Json { path: path.to_path_buf(), source })
    }
}

fn observable_columns(table: &mut SeriesTable, samples: &[Option<ObservableSample>]) {
    let pick = |f: fn(&ObservableSample) -> Option<f64>| samples.iter().map(|s| s.as_ref().and_then(f)).collect::<Vec<_>>();
    table.push_column("ex_flux", pick(|s| s.ex));
    table.push_column("ex_flux_stag", pick(|s| s.ex_stag));
    table.push_column("n_diff", pick(|s| s.nd));
}

fn max_of(xs: impl Iterator<Item = f64>) -> Option<f64> {
    xs.fold(None, |m, x| Some(m.map_or(x, |m: f64| m.max(x))))
}

fn run_exact(cfg: &RunConfig) -> Result<(ReturnRateSeries, SeriesTable, Diagnostics), RunError> {
    let c = &cfg.controls.exact;
    let lattice = c.lattice().map_err(ConfigError::Model)?;
    let initial = named_state(cfg.initial, &lattice).map_err(ConfigError::Model)?;
    let partner = cfg.partner_state().map(|p| named_state(p, &lattice)).transpose().map_err(ConfigError::Model)?;
    let sector = if cfg.model.kind.has_links() {
        Some(GaugeSector::containing(&initial, &lattice, cfg.model.kind).map_err(ConfigError::Model)?)
    } else {
        None
    };
    let q = ExactQuench {
        params: cfg.model,
        lattice,
        initial,
        partner,
        times: cfg.times(),
        spec: c.evolution(),
        observables: ObservableSpec::all(cfg.initial.nd_sign(), sector),
        doubling: c.doubling,
        execution: cfg.execution,
    };
    let out = run_quench_exact(&q).map_err(|e| RunError::Backend(e.to_string()))?;
    let series = ReturnRateSeries::new(out.times.clone(), vec![out.rate_plus.clone()], out.rate_minus.clone().into_iter().collect())
        .map_err(|e| RunError::Backend(e.to_string()))?;
    let mut table = SeriesTable::from_series(&series);
    let samples: Vec<_> = out.observables.iter().copied().map(Some).collect();
    observable_columns(&mut table, &samples);
    table.push_column("trunc_err", vec![None; series.len()]);
    table.push_column("gauge_violation", out.observables.iter().map(|s| s.gauge_violation).collect());
    let diagnostics = Diagnostics {
        n_points: series.len(),
        max_norm_error: Some(out.max_norm_error),
        hilbert_dimension: Some(out.dimension),
        max_gauge_violation: max_of(out.observables.iter().filter_map(|s| s.gauge_violation)),
        ..Default::default()
    };
    Ok((series, table, diagnostics))
}

fn run_umps(cfg: &RunConfig) -> Result<(ReturnRateSeries, SeriesTable, Diagnostics), RunError> {
    let lattice = LatticeSpec::infinite();
    let mut controls = cfg.controls.umps;
    controls.eigen.seed = cfg.seed;
    let q = UmpsQuench {
        params: cfg.model,
        initial: named_state(cfg.initial, &lattice).map_err(ConfigError::Model)?,
        partner: cfg.partner_state().map(|p| named_state(p, &lattice)).transpose().map_err(ConfigError::Model)?,
        t_max: cfg.t_max,
        dt_output: cfg.dt_output,
        nd_sign: cfg.initial.nd_sign(),
        controls,
        execution: cfg.execution,
    };
    let run = run_quench_umps(&q).map_err(|e| RunError::Backend(e.to_string()))?;
    let series = run.series;
    let mut table = SeriesTable::from_series(&series);
    // observables exist on the simulated grid, which is twice as fine with
    // doubling but only reaches half the horizon
    let stride = if controls.doubling { 2 } else { 1 };
    let samples: Vec<Option<ObservableSample>> = (0..series.len()).map(|k| run.observables.get(stride * k).copied()).collect();
    observable_columns(&mut table, &samples);
    table.push_column("trunc_err", run.truncation.iter().map(|&x| Some(x)).collect());
    table.push_column("gauge_violation", samples.iter().map(|s| s.and_then(|s| s.gauge_violation)).collect());
    let diagnostics = Diagnostics {
        n_points: series.len(),
        horizon: run.horizon,
        failure: run.failure,
        max_truncation: max_of(run.truncation.iter().copied()),
        max_bond_dim: run.bond_dims.iter().copied().max(),
        energy_drift: Some(run.energy_drift),
        max_gauge_violation: max_of(run.observables.iter().filter_map(|s| s.gauge_violation)),
        ..Default::default()
    };
    Ok((series, table, diagnostics))
}

/// The analytic rate is written in the time of a chain with hopping `1/2`;
/// a lattice with hopping `J` reaches it at `tau = 2 J t`.
fn run_oracle(cfg: &RunConfig) -> Result<(ReturnRateSeries, SeriesTable, Diagnostics), RunError> {
    let times = cfg.times();
    let scale = 2.0 * cfg.model.j;
    let taus: Vec<f64> = times.iter().map(|t| scale * t).collect();
    let results = return_rate_analytic_grid(&taus, &cfg.controls.oracle, cfg.execution);
    let mut rates = Vec::with_capacity(times.len());
    let mut failure = None;
    for (t, r) in times.iter().zip(results) {
        match r {
            Ok(x) => rates.push(x),
            Err(e) => {
                failure = Some(format!("t = {t}: {e}"));
                break;
            }
        }
    }
    if rates.is_empty() {
        return Err(RunError::Backend(failure.unwrap_or_default()));
    }
    let n = rates.len();
    let horizon = failure.as_ref().map(|_| times[n - 1]);
    let series = ReturnRateSeries::new(times[..n].to_vec(), vec![rates], Vec::new()).map_err(|e| RunError::Backend(e.to_string()))?;
    let mut table = SeriesTable::from_series(&series);
    table.push_column("ex_flux", vec![None; n]);
    table.push_column("ex_flux_stag", vec![None; n]);
    table.push_column("n_diff", taus[..n].iter().map(|&tau| Some(nd_analytic(tau))).collect());
    table.push_column("trunc_err", vec![None; n]);
    table.push_column("gauge_violation", vec![None; n]);
    Ok((series, table, Diagnostics { n_points: n, horizon, failure, ..Default::default() }))
}

/// Runs the backend and the detector without touching the file system.
pub fn execute(cfg: &RunConfig) -> Result<RunOutput, RunError> {
    cfg.validate()?;
    let (series, table, diagnostics) = match cfg.backend {
        Backend::Exact => run_exact(cfg)?,
        Backend::Umps => run_umps(cfg)?,
        Backend::FreeFermionOracle => run_oracle(cfg)?,
    };
    let detection = detect(&series, &cfg.detector);
    Ok(RunOutput { series, table, detection, diagnostics })
}

/// Result of [`run`]: the output and where it was written.
#[derive(Clone, Debug)]
pub struct RunReport {
    pub output: RunOutput,
    pub manifest: RunManifest,
    pub dir: PathBuf,
}

impl RunReport {
    pub fn succeeded(&self) -> bool {
        self.output.diagnostics.failure.is_none()
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io { path: path.to_path_buf(), source }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), RunError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|source| RunError::Json { path: path.to_path_buf(), source })?;
    std::io::Write::write_all(&mut w, b"\n").map_err(io_err(path))
}

pub fn write_series(path: &Path, table: &SeriesTable) -> Result<(), RunError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    table.write(BufWriter::new(file))?;
    Ok(())
}

/// Runs `cfg` and writes the series CSV, events JSON and manifest JSON to
/// `cfg.output_dir`.
///
/// A backend that stops early still produces artifacts; the manifest then
/// records the horizon and the failure.
pub fn run(cfg: &RunConfig) -> Result<RunReport, RunError> {
    let started = Instant::now();
    let output = execute(cfg)?;
    let wall_time_s = started.elapsed().as_secs_f64();
    let dir = cfg.output_dir.clone();
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    write_series(&dir.join(SERIES_FILE), &output.table)?;
    write_json(&dir.join(EVENTS_FILE), &EventsDocument::new(&output.detection, cfg.detector))?;
    let manifest = RunManifest {
        schema: MANIFEST_SCHEMA.into(),
        version: MANIFEST_VERSION,
        code_version: env!("CARGO_PKG_VERSION").into(),
        config: cfg.clone(),
        resonance: resonance_report(&cfg.model, RESONANCE_TOL),
        wall_time_s,
        diagnostics: output.diagnostics.clone(),
        files: ArtifactFiles { series: SERIES_FILE.into(), events: EVENTS_FILE.into() },
    };
    write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(RunReport { output, manifest, dir })
}
