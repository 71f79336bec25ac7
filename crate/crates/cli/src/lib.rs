//! Run configuration, backend dispatch and artifact handling behind the
//! `lgtquench` binary.
//!
//! A run reads a [`RunConfig`], evolves the chosen initial state with one of
//! the backends in [`Backend`] and writes its artifacts (see [`run`]) to the
//! output directory.

pub mod compare;
pub mod config;
pub mod run;
pub mod scan;
pub mod table;

pub use compare::{compare, CompareError, CompareReport};
pub use config::{Backend, ConfigError, Controls, ExactControls, Partner, RunConfig};
pub use run::{execute, run, Diagnostics, RunError, RunManifest, RunOutput, RunReport};
pub use scan::{scan, ParameterGrid, PointStatus, ScanError, ScanSummary};
pub use table::{SeriesTable, TableError};

/// Environment variable holding the worker budget.
pub const WORKERS_ENV: &str = "LGTQUENCH_WORKERS";

/// Process exit codes of the binary.
pub mod exit {
    pub const OK: i32 = 0;
    /// A backend failed; partial artifacts may have been written.
    pub const RUN_FAILED: i32 = 1;
    /// Bad arguments or input data.
    pub const USAGE: i32 = 2;
    /// `compare` found a deviation above the tolerance.
    pub const OUT_OF_TOLERANCE: i32 = 3;
    /// A file could not be read or written.
    pub const IO: i32 = 4;
}
