//! Quench dynamics of the 1+1D Z2 lattice gauge theory with dynamical matter,
//! its free-fermion limit and the spin-1/2 U(1) quantum link model.
//!
//! The crate is organised around four layers:
//!
//! * [`model`]: lattices, gauge sectors, named product states, Hamiltonian and
//!   Gauss-law operators on enumerated bases, and the classical
//!   (product-state) energy analysis used to reason about resonances.
//! * [`freefermion`]: closed-form dynamics of the `mu = h = 0` limit, used as
//!   an oracle throughout.
//! * [`exact`]: Krylov propagation of finite chains, return rates and local
//!   observables.
//! * [`dqpt`]: return-rate series, crossing detection and classification.
//!
//! Conventions: matter sites carry 1-based labels `j` in documentation and
//! 0-based indices `i = j - 1` in code. Link `k` joins matter sites `k` and
//! `k + 1` (0-based). Link values are stored as signs `sigma = +-1`; for the
//! Z2 theory `sigma` is the `tau^x` eigenvalue, for the quantum link model it
//! is `2 s^z`.

pub mod dqpt;
pub mod exact;
pub mod freefermion;
pub mod model;
pub mod par;
pub mod sparse;

pub use num_complex::Complex64 as C64;
