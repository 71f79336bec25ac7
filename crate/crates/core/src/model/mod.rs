//! Lattices, gauge sectors, product states and operator builders.

mod basis;
mod lattice;
pub mod local;
mod operators;
mod params;
mod resonance;
mod sector;
mod state;

pub use basis::Basis;
pub use lattice::{link_stagger, stagger, Boundary, LatticeSpec, MATTER_PER_CELL, SITES_PER_CELL};
pub use operators::{
    build_hamiltonian, build_hamiltonian_with, gauss_operator_u1, gauss_operator_z2, link_sign_operator,
    number_operator, resonance_energy_operator, site_number_operator,
};
pub use params::{ModelKind, ModelParams};
pub use resonance::{classical_energy, hop, resonance_report, transitional_manifold, ResonanceReport};
pub use sector::{gauss_value_u1, gauss_value_z2, GaugeSector, VIRTUAL_LINK};
pub use state::{named_state, named_state_str, NamedState, ProductStateConfig};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("unknown named state `{0}` (expected one of fp+, fp-, sl+, sl-, CP, vac+, vac-)")]
    UnknownState(String),
    #[error("unknown model kind `{0}` (expected z2, free_fermion or u1_qlm)")]
    UnknownKind(String),
    #[error("the number of matter sites must be even and positive, got {0}")]
    OddLattice(usize),
    #[error("{0} matter sites exceed the 30-site limit of the bit-packed basis")]
    LatticeTooLarge(usize),
    #[error("matter site {site} is outside a chain of {n_matter} sites")]
    SiteOutOfRange { site: usize, n_matter: usize },
    #[error("the gauge sector contains no product state")]
    EmptySector,
    #[error("invalid gauge sector: {0}")]
    InvalidSector(String),
    #[error("basis was built for {basis} but the operator needs {expected}")]
    KindMismatch { basis: ModelKind, expected: ModelKind },
    #[error("basis is not closed under the Hamiltonian (missing image of state {0})")]
    BasisNotClosed(u64),
    #[error("configuration does not fit the lattice: {0}")]
    ConfigMismatch(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}
