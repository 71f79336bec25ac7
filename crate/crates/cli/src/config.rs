use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use lgtquench_core::dqpt::DetectorOptions;
use lgtquench_core::exact::EvolutionSpec;
use lgtquench_core::freefermion::QuadratureSpec;
use lgtquench_core::model::{Boundary, LatticeSpec, ModelKind, ModelParams, NamedState};
use lgtquench_core::par::Execution;
use lgtquench_umps::UmpsControls;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Syntax(String),
    #[error("at `{path}`: {message}")]
    Field { path: String, message: String },
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
    #[error(transparent)]
    Model(#[from] lgtquench_core::model::ModelError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Exact,
    Umps,
    FreeFermionOracle,
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::Exact => "exact",
            Backend::Umps => "umps",
            Backend::FreeFermionOracle => "free_fermion_oracle",
        })
    }
}

/// Second state of the initial manifold: `"auto"` picks the link-reversed
/// partner of `initial`, `"none"` disables the minus manifold.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Partner {
    #[default]
    Auto,
    None,
    State(NamedState),
}

impl TryFrom<String> for Partner {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        match s.as_str() {
            "auto" => Ok(Partner::Auto),
            "none" => Ok(Partner::None),
            other => NamedState::from_str(other).map(Partner::State).map_err(|e| e.to_string()),
        }
    }
}

impl From<Partner> for String {
    fn from(p: Partner) -> String {
        match p {
            Partner::Auto => "auto".into(),
            Partner::None => "none".into(),
            Partner::State(s) => s.to_string(),
        }
    }
}

impl Partner {
    pub fn resolve(self, initial: NamedState) -> Option<NamedState> {
        match self {
            Partner::Auto => initial.partner(),
            Partner::None => None,
            Partner::State(s) => Some(s),
        }
    }
}

/// Finite-chain settings of the exact backend.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExactControls {
    pub n_matter: usize,
    pub boundary: Boundary,
    /// Largest Krylov step, in units of `1/J`.
    pub dt: f64,
    pub krylov_dim: usize,
    pub tol: f64,
    pub doubling: bool,
}

impl Default for ExactControls {
    fn default() -> Self {
        let spec = EvolutionSpec::default();
        Self { n_matter: 12, boundary: Boundary::Open, dt: spec.dt, krylov_dim: spec.krylov_dim, tol: spec.tol, doubling: false }
    }
}

impl ExactControls {
    pub fn lattice(&self) -> Result<LatticeSpec, lgtquench_core::model::ModelError> {
        LatticeSpec::new(self.n_matter, self.boundary)
    }

    pub fn evolution(&self) -> EvolutionSpec {
        EvolutionSpec { dt: self.dt, krylov_dim: self.krylov_dim, tol: self.tol }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Controls {
    pub exact: ExactControls,
    pub umps: UmpsControls,
    pub oracle: QuadratureSpec,
}

/// Everything needed to reproduce one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelParams,
    pub initial: NamedState,
    #[serde(default)]
    pub partner: Partner,
    pub backend: Backend,
    /// Final time, in units of `1/J`.
    pub t_max: f64,
    /// Spacing of the output grid, in units of `1/J`.
    pub dt_output: f64,
    /// Seeds the eigensolver start vectors.
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub execution: Execution,
    #[serde(default)]
    pub controls: Controls,
    #[serde(default)]
    pub detector: DetectorOptions,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("lgtquench-run")
}

/// Sets `value` at a dotted `path` such as `model.mu`, creating tables as
/// needed.
pub fn set_path(table: &mut toml::Table, path: &str, value: toml::Value) -> Result<(), ConfigError> {
    let mut parts: Vec<&str> = path.split('.').collect();
    let last = parts.pop().filter(|s| !s.is_empty()).ok_or_else(|| ConfigError::Syntax(format!("empty key `{path}`")))?;
    let mut cur = table;
    for (depth, p) in parts.iter().enumerate() {
        let entry = cur.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| ConfigError::Field {
            path: parts[..=depth].join("."),
            message: "is not a table".into(),
        })?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// Interprets a command-line string as a TOML scalar: numbers and booleans
/// as such, anything else as a string.
pub fn parse_scalar(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match toml::from_str::<toml::Table>(&doc) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

pub fn read_table(path: &Path) -> Result<toml::Table, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
    text.parse::<toml::Table>().map_err(|e| ConfigError::Syntax(format!("{}: {e}", path.display())))
}

impl RunConfig {
    /// Deserializes and validates a table; errors name the offending field.
    pub fn from_table(table: toml::Table) -> Result<Self, ConfigError> {
        let cfg: RunConfig = serde_path_to_error::deserialize(toml::Value::Table(table)).map_err(|e| ConfigError::Field {
            path: e.path().to_string(),
            message: e.inner().message().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        Self::from_table(text.parse::<toml::Table>().map_err(|e| ConfigError::Syntax(e.to_string()))?)
    }

    pub fn to_table(&self) -> toml::Table {
        toml::Table::try_from(self).expect("config serializes to a table")
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    pub fn partner_state(&self) -> Option<NamedState> {
        self.partner.resolve(self.initial)
    }

    /// Number of output intervals; the grid is `k * dt_output`, `k = 0..=n`.
    pub fn n_intervals(&self) -> usize {
        (self.t_max / self.dt_output + 1e-9).floor() as usize
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_intervals()).map(|k| k as f64 * self.dt_output).collect()
    }

    /// Checks every constraint and reports all violations at once.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut errs = Vec::new();
        let positive = |x: f64| x > 0.0 && x.is_finite();
        if let Err(e) = self.model.validate() {
            errs.push(format!("model: {e}"));
        }
        if !positive(self.t_max) {
            errs.push(format!("t_max: must be positive, got {}", self.t_max));
        }
        if !positive(self.dt_output) {
            errs.push(format!("dt_output: must be positive, got {}", self.dt_output));
        }
        let kind = self.model.kind;
        let native_ok = |s: NamedState| match kind {
            ModelKind::U1Qlm => s.native_kind() == ModelKind::U1Qlm,
            _ => s.native_kind() == ModelKind::Z2Lgt,
        };
        if !native_ok(self.initial) {
            errs.push(format!("initial: state {} is not defined for model kind {kind}", self.initial));
        }
        if let Some(p) = self.partner_state() {
            if !native_ok(p) {
                errs.push(format!("partner: state {p} is not defined for model kind {kind}"));
            }
        }
        match self.backend {
            Backend::Exact => {
                let c = &self.controls.exact;
                if let Err(e) = c.lattice() {
                    errs.push(format!("controls.exact.n_matter: {e}"));
                }
                if c.boundary == Boundary::Infinite {
                    errs.push("controls.exact.boundary: the exact backend needs a finite chain".into());
                }
                if let Err(e) = c.evolution().validate() {
                    errs.push(format!("controls.exact: {e}"));
                }
                if positive(self.dt_output) && c.dt > self.dt_output * (1.0 + 1e-12) {
                    errs.push(format!("controls.exact.dt: integrator step {} exceeds dt_output {}", c.dt, self.dt_output));
                }
            }
            Backend::Umps => {
                let c = &self.controls.umps;
                let interval = if c.doubling { 0.5 * self.dt_output } else { self.dt_output };
                if !positive(c.dt) {
                    errs.push(format!("controls.umps.dt: must be positive, got {}", c.dt));
                } else if positive(self.dt_output) && c.dt > interval * (1.0 + 1e-12) {
                    errs.push(format!("controls.umps.dt: integrator step {} exceeds the simulated output spacing {interval}", c.dt));
                }
                if c.n_eigs < 1 {
                    errs.push("controls.umps.n_eigs: must be at least 1".into());
                }
                if c.truncation.chi_max < 1 {
                    errs.push("controls.umps.truncation.chi_max: must be at least 1".into());
                }
                if c.batch < 1 {
                    errs.push("controls.umps.batch: must be at least 1".into());
                }
            }
            Backend::FreeFermionOracle => {
                let free = kind == ModelKind::FreeFermion || (kind == ModelKind::Z2Lgt && self.model.mu == 0.0 && self.model.h == 0.0);
                if !free {
                    errs.push("backend: free_fermion_oracle needs model kind free_fermion, or z2 with mu = h = 0".into());
                }
                if let Err(e) = self.controls.oracle.validate() {
                    errs.push(format!("controls.oracle: {e}"));
                }
            }
        }
        if !positive(self.detector.eps_deg) {
            errs.push("detector.eps_deg: must be positive".into());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(errs))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        initial = "fp+"
        backend = "umps"
        t_max = 2.0
        dt_output = 0.05
        [model]
        kind = "z2"
        mu = 0.0
        h = 0.5
    "#;

    #[test]
    fn defaults_fill_the_rest() {
        let cfg = RunConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(cfg.partner_state(), Some(NamedState::FpMinus));
        assert_eq!(cfg.controls.umps, UmpsControls::default());
        assert_eq!(cfg.times().len(), 41);
        let back = RunConfig::from_table(cfg.to_table()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn errors_carry_the_field_path() {
        let text = MINIMAL.replace("h = 0.5", "h = 0.5\nhh = 1");
        match RunConfig::from_toml_str(&text) {
            Err(ConfigError::Field { path, .. }) => assert_eq!(path, "model.hh"),
            other => panic!("{other:?}"),
        }
        let mut t: toml::Table = MINIMAL.parse().unwrap();
        set_path(&mut t, "controls.umps.truncation.chi_max", toml::Value::String("big".into())).unwrap();
        match RunConfig::from_table(t) {
            Err(ConfigError::Field { path, .. }) => assert_eq!(path, "controls.umps.truncation.chi_max"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn validation_reports_every_problem() {
        let mut t: toml::Table = MINIMAL.parse().unwrap();
        set_path(&mut t, "t_max", parse_scalar("-1")).unwrap();
        set_path(&mut t, "initial", parse_scalar("CP")).unwrap();
        set_path(&mut t, "controls.umps.dt", parse_scalar("0.5")).unwrap();
        match RunConfig::from_table(t) {
            Err(ConfigError::Invalid(errs)) => assert_eq!(errs.len(), 3, "{errs:?}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn scalars_parse_as_toml() {
        assert_eq!(parse_scalar("0.5"), toml::Value::Float(0.5));
        assert_eq!(parse_scalar("3"), toml::Value::Integer(3));
        assert_eq!(parse_scalar("true"), toml::Value::Boolean(true));
        assert_eq!(parse_scalar("fp+"), toml::Value::String("fp+".into()));
        assert_eq!(parse_scalar("\"sl-\""), toml::Value::String("sl-".into()));
    }
}
