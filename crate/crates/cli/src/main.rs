use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lgtquench_cli::config::{parse_scalar, read_table, set_path};
use lgtquench_cli::run::{write_json, MANIFEST_FILE, SERIES_FILE};
use lgtquench_cli::{
    compare, exit, run, scan, CompareError, ConfigError, ParameterGrid, RunConfig, RunError, RunManifest, ScanError,
    SeriesTable, TableError, WORKERS_ENV,
};
use lgtquench_core::dqpt::{detect, DetectorOptions, EventsDocument};
use lgtquench_core::freefermion::{
    dqpt_times_analytic, nd_analytic, return_rate_analytic_grid, return_rate_mode_sum, QuadratureSpec,
};
use lgtquench_core::par::Execution;

/// Quench dynamics and dynamical phase transitions of 1+1D lattice gauge
/// theories.
///
/// Exit codes: 0 success; 1 backend failure (partial artifacts written);
/// 2 invalid arguments or input; 3 compare exceeded its tolerance; 4 file
/// could not be read or written.
#[derive(Parser)]
#[command(name = "lgtquench", version)]
struct Cli {
    /// Worker threads for data-parallel loops and concurrent scan points.
    #[arg(long, global = true, env = WORKERS_ENV)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one quench and write its series, events and manifest.
    Simulate(SimulateArgs),
    /// Run a template configuration over a Cartesian parameter grid.
    Scan(ScanArgs),
    /// Run the DQPT detector on an existing series.
    Detect(DetectArgs),
    /// Compare one column of two series on their common time grid.
    Compare(CompareArgs),
    /// Evaluate the closed-form free-fermion return rate.
    Oracle(OracleArgs),
}

/// Command-line mirrors of the run configuration; each one overrides the
/// corresponding field of the file.
#[derive(Args)]
struct ConfigFlags {
    /// TOML run configuration.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Re-run the configuration recorded in a manifest.
    #[arg(long, conflicts_with = "config")]
    from_manifest: Option<PathBuf>,
    /// z2, free_fermion or u1_qlm.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    j: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// fp+, fp-, sl+, sl-, CP, vac+ or vac-.
    #[arg(long)]
    initial: Option<String>,
    /// auto, none or a named state.
    #[arg(long)]
    partner: Option<String>,
    /// exact, umps or free_fermion_oracle.
    #[arg(long)]
    backend: Option<String>,
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long)]
    dt_output: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// parallel or sequential.
    #[arg(long)]
    execution: Option<String>,
    /// Any other field as a dotted path, e.g. `controls.umps.truncation.chi_max=64`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    flags: ConfigFlags,
    /// Print the resolved configuration as TOML and exit.
    #[arg(long)]
    dry_run: bool,
}

#[derive(Args)]
struct ScanArgs {
    #[command(flatten)]
    flags: ConfigFlags,
    /// TOML file with a `[grid]` table of arrays keyed by config paths.
    #[arg(long)]
    grid: Option<PathBuf>,
    /// Grid axis as `KEY=V1,V2,...`; appended after the axes of `--grid`.
    #[arg(long = "axis", value_name = "KEY=VALUES")]
    axes: Vec<String>,
}

#[derive(Args)]
struct DetectArgs {
    /// Series CSV or run directory.
    input: PathBuf,
    /// TOML file of detector options; defaults to the run's manifest.
    #[arg(long)]
    options: Option<PathBuf>,
    #[arg(long)]
    eps_deg: Option<f64>,
    #[arg(long)]
    min_duration: Option<f64>,
    /// Write the events document here instead of standard output.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// Series CSV or run directory.
    a: PathBuf,
    /// Series CSV or run directory.
    b: PathBuf,
    /// Column name, e.g. lambda1_plus or n_diff.
    #[arg(long, short)]
    quantity: String,
    #[arg(long)]
    tol: f64,
    /// Compare only times up to this value.
    #[arg(long)]
    t_max: Option<f64>,
    /// Write the JSON report here as well as to standard output.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long, default_value_t = 6.0)]
    t_max: f64,
    #[arg(long, default_value_t = 0.01)]
    dt: f64,
    /// Hopping of the lattice whose time axis is used.
    #[arg(long, default_value_t = 0.5)]
    j: f64,
    /// Add the finite-ring mode sum with this many sites.
    #[arg(long)]
    mode_sum: Option<usize>,
    /// Print the first N cusp times instead of the series.
    #[arg(long)]
    cusps: Option<usize>,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn new(code: i32, message: impl ToString) -> Self {
        Self { code, message: message.to_string() }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        let code = if matches!(e, ConfigError::Read { .. }) { exit::IO } else { exit::USAGE };
        Failure::new(code, e)
    }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Config(c) => c.into(),
            RunError::Backend(_) => Failure::new(exit::RUN_FAILED, e),
            RunError::Table(TableError::Csv(ref c)) if c.is_io_error() => Failure::new(exit::IO, e),
            RunError::Table(_) => Failure::new(exit::USAGE, e),
            RunError::Io { .. } | RunError::Json { .. } => Failure::new(exit::IO, e),
        }
    }
}

impl From<TableError> for Failure {
    fn from(e: TableError) -> Self {
        RunError::Table(e).into()
    }
}

impl From<ScanError> for Failure {
    fn from(e: ScanError) -> Self {
        match e {
            ScanError::Run(r) => r.into(),
            ScanError::Config(c) => c.into(),
            other => Failure::new(exit::USAGE, other),
        }
    }
}

fn config_table(flags: &ConfigFlags) -> Result<toml::Table, Failure> {
    let mut table = match (&flags.config, &flags.from_manifest) {
        (Some(path), _) => read_table(path)?,
        (None, Some(path)) => RunManifest::read(path)?.config.to_table(),
        (None, None) => toml::Table::new(),
    };
    let mut put = |key: &str, value: toml::Value| set_path(&mut table, key, value);
    let s = |x: &String| toml::Value::String(x.clone());
    if let Some(x) = &flags.model {
        put("model.kind", s(x))?;
    }
    for (key, v) in [("model.j", flags.j), ("model.mu", flags.mu), ("model.h", flags.h), ("model.delta", flags.delta)] {
        if let Some(v) = v {
            put(key, toml::Value::Float(v))?;
        }
    }
    for (key, v) in [("initial", &flags.initial), ("partner", &flags.partner), ("backend", &flags.backend), ("execution", &flags.execution)] {
        if let Some(v) = v {
            put(key, s(v))?;
        }
    }
    if let Some(v) = flags.t_max {
        put("t_max", toml::Value::Float(v))?;
    }
    if let Some(v) = flags.dt_output {
        put("dt_output", toml::Value::Float(v))?;
    }
    if let Some(v) = flags.seed {
        let v = i64::try_from(v).map_err(|_| Failure::new(exit::USAGE, "seed must fit in a signed 64-bit integer"))?;
        put("seed", toml::Value::Integer(v))?;
    }
    if let Some(v) = &flags.output_dir {
        put("output_dir", toml::Value::String(v.display().to_string()))?;
    }
    for kv in &flags.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| Failure::new(exit::USAGE, format!("--set expects KEY=VALUE, got `{kv}`")))?;
        put(k.trim(), parse_scalar(v.trim()))?;
    }
    Ok(table)
}

fn simulate(args: SimulateArgs) -> Result<i32, Failure> {
    let cfg = RunConfig::from_table(config_table(&args.flags)?)?;
    if args.dry_run {
        print!("{}", cfg.to_toml_string());
        return Ok(exit::OK);
    }
    let report = run(&cfg)?;
    let d = &report.output.detection;
    println!("{}: {} points, {} events, {} degeneracy intervals", report.dir.display(), report.output.series.len(), d.events.len(), d.intervals.len());
    match &report.output.diagnostics.failure {
        None => Ok(exit::OK),
        Some(f) => {
            eprintln!("error: run stopped early at t = {}: {f}", report.output.diagnostics.horizon.unwrap_or(0.0));
            Ok(exit::RUN_FAILED)
        }
    }
}

fn scan_cmd(args: ScanArgs, workers: usize) -> Result<i32, Failure> {
    let template = config_table(&args.flags)?;
    let root = template
        .get("output_dir")
        .and_then(toml::Value::as_str)
        .map(PathBuf::from)
        .ok_or_else(|| Failure::new(exit::USAGE, "scan needs output_dir (flag or config) as the root directory"))?;
    let mut grid = match &args.grid {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Failure::new(exit::IO, format!("{}: {e}", path.display())))?;
            ParameterGrid::from_toml_str(&text)?
        }
        None => ParameterGrid::default(),
    };
    for axis in &args.axes {
        let (k, vs) = axis.split_once('=').ok_or_else(|| Failure::new(exit::USAGE, format!("--axis expects KEY=V1,V2,..., got `{axis}`")))?;
        grid.axes.push((k.trim().to_string(), vs.split(',').map(|v| parse_scalar(v.trim())).collect()));
    }
    let summary = scan(&template, &grid, &root, workers)?;
    println!("{:>5}  {:<40} {:>8} {:>6} {:>8} {:>9}", "point", "parameters", "status", "branch", "manifold", "intervals");
    for p in &summary.points {
        let params: Vec<String> = p.values.iter().map(|(k, v)| format!("{k}={v}")).collect();
        let status = serde_json::to_value(p.status).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
        println!("{:>5}  {:<40} {:>8} {:>6} {:>8} {:>9}", p.index, params.join(" "), status, p.branch, p.manifold, p.degeneracy_intervals);
        if let Some(m) = &p.message {
            eprintln!("point {}: {m}", p.index);
        }
    }
    Ok(if summary.failures() == 0 { exit::OK } else { exit::RUN_FAILED })
}

fn series_path(input: &Path) -> PathBuf {
    if input.is_dir() {
        input.join(SERIES_FILE)
    } else {
        input.to_path_buf()
    }
}

fn read_series(input: &Path) -> Result<SeriesTable, Failure> {
    let path = series_path(input);
    let file = fs::File::open(&path).map_err(|e| Failure::new(exit::IO, format!("{}: {e}", path.display())))?;
    SeriesTable::read(file).map_err(|e| {
        let f: Failure = e.into();
        Failure::new(f.code, format!("{}: {}", path.display(), f.message))
    })
}

fn write_or_print<T: serde::Serialize>(value: &T, output: Option<&Path>) -> Result<(), Failure> {
    match output {
        Some(path) => write_json(path, value).map_err(Failure::from),
        None => {
            let text = serde_json::to_string_pretty(value).map_err(|e| Failure::new(exit::USAGE, e))?;
            println!("{text}");
            Ok(())
        }
    }
}

fn detect_cmd(args: DetectArgs) -> Result<i32, Failure> {
    let table = read_series(&args.input)?;
    let mut opts = match &args.options {
        Some(path) => {
            let t = read_table(path)?;
            serde_path_to_error::deserialize::<_, DetectorOptions>(toml::Value::Table(t))
                .map_err(|e| Failure::new(exit::USAGE, format!("{}: at `{}`: {}", path.display(), e.path(), e.inner())))?
        }
        None if args.input.is_dir() && args.input.join(MANIFEST_FILE).exists() => RunManifest::read(&args.input.join(MANIFEST_FILE))?.config.detector,
        None => DetectorOptions::default(),
    };
    if let Some(x) = args.eps_deg {
        opts.eps_deg = x;
    }
    if let Some(x) = args.min_duration {
        opts.min_duration = x;
    }
    let series = table.to_series()?;
    let doc = EventsDocument::new(&detect(&series, &opts), opts);
    write_or_print(&doc, args.output.as_deref())?;
    Ok(exit::OK)
}

fn compare_cmd(args: CompareArgs) -> Result<i32, Failure> {
    let (a, b) = (read_series(&args.a)?, read_series(&args.b)?);
    let report = compare(&a, &b, &args.quantity, args.tol, args.t_max).map_err(|e| match e {
        CompareError::Table(t) => Failure::from(t),
        other => Failure::new(exit::USAGE, other),
    })?;
    if let Some(path) = &args.output {
        write_json(path, &report)?;
    }
    write_or_print(&report, None)?;
    Ok(if report.pass { exit::OK } else { exit::OUT_OF_TOLERANCE })
}

fn fmt(x: f64) -> String {
    if x.is_infinite() {
        "inf".into()
    } else {
        format!("{x:?}")
    }
}

fn oracle_cmd(args: OracleArgs, exec: Execution) -> Result<i32, Failure> {
    if !(args.j > 0.0 && args.dt > 0.0 && args.t_max >= 0.0) {
        return Err(Failure::new(exit::USAGE, "j and dt must be positive and t_max non-negative"));
    }
    let scale = 2.0 * args.j;
    let mut out = String::new();
    if let Some(n) = args.cusps {
        out.push_str("n,t [1/J]\n");
        for k in 0..n {
            out.push_str(&format!("{k},{}\n", fmt(dqpt_times_analytic(k) / scale)));
        }
    } else {
        let n = (args.t_max / args.dt + 1e-9).floor() as usize;
        let times: Vec<f64> = (0..=n).map(|k| k as f64 * args.dt).collect();
        let taus: Vec<f64> = times.iter().map(|t| scale * t).collect();
        let rates = return_rate_analytic_grid(&taus, &QuadratureSpec::default(), exec);
        out.push_str("t [1/J],lambda [per site],n_diff [per site pair]");
        if let Some(l) = args.mode_sum {
            out.push_str(&format!(",lambda_mode_sum_{l} [per site]"));
        }
        out.push('\n');
        for ((t, tau), rate) in times.iter().zip(&taus).zip(rates) {
            let rate = rate.map_err(|e| Failure::new(exit::RUN_FAILED, format!("t = {t}: {e}")))?;
            out.push_str(&format!("{},{},{}", fmt(*t), fmt(rate), fmt(nd_analytic(*tau))));
            if let Some(l) = args.mode_sum {
                let m = return_rate_mode_sum(*tau, l).map_err(|e| Failure::new(exit::USAGE, e))?;
                out.push_str(&format!(",{}", fmt(m)));
            }
            out.push('\n');
        }
    }
    match &args.output {
        Some(path) => fs::write(path, out).map_err(|e| Failure::new(exit::IO, format!("{}: {e}", path.display())))?,
        None => std::io::stdout().write_all(out.as_bytes()).map_err(|e| Failure::new(exit::IO, e))?,
    }
    Ok(exit::OK)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let workers = cli.workers.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    #[cfg(feature = "parallel")]
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build_global() {
        eprintln!("error: cannot start {workers} workers: {e}");
        return ExitCode::from(exit::USAGE as u8);
    }
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Scan(a) => scan_cmd(a, workers),
        Command::Detect(a) => detect_cmd(a),
        Command::Compare(a) => compare_cmd(a),
        Command::Oracle(a) => oracle_cmd(a, Execution::Parallel),
    };
    let code = match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    };
    ExitCode::from(code as u8)
}
