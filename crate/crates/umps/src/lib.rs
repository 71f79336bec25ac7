//! Uniform matrix product states for quenches of the lattice gauge models in
//! `lgtquench-core`.
//!
//! Each matter site is fused with the link on its right into one local site
//! (dimension 4, or 2 for the free-fermion chain) so that every Hamiltonian
//! term couples nearest neighbours. States are evolved with second-order
//! iTEBD; return-rate branches come from the leading eigenvalues of mixed
//! transfer matrices, using the doubling trick to reach twice the simulated
//! time.

mod mpo;
mod quench;
mod snapshot;
mod state;
mod tebd;
mod transfer;

pub use mpo::{Mpo, MPO_BOND};
pub use quench::{run_quench_umps, UmpsControls, UmpsQuench, UmpsRun};
pub use snapshot::{Snapshot, SNAPSHOT_MAGIC, SNAPSHOT_VERSION};
pub use state::{product_to_umps, UniformMps};
pub use tebd::{apply_bond_gate, gate, Propagator, Truncation};
pub use transfer::{
    doubling_overlap, norm_per_cell, rate_from_eigenvalue, transfer_spectrum, Contraction, EigenOptions,
    TransferSpectrum,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum UmpsError {
    #[error("configuration is not unit-cell periodic: {0}")]
    NotPeriodic(String),
    #[error("inconsistent tensor shapes: {0}")]
    Shape(String),
    #[error("linear algebra failure: {0}")]
    Linalg(String),
    #[error("transfer eigensolver did not converge: {requested} eigenvalues, residual {residual:.2e} > {tol:.0e}")]
    EigenNotConverged { requested: usize, residual: f64, tol: f64 },
    #[error("invalid controls: {0}")]
    InvalidControls(String),
    #[error("snapshot: {0}")]
    Snapshot(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Model(#[from] lgtquench_core::model::ModelError),
}
