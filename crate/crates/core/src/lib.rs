//! Discretized light-cone quantization of the 1+1D Yukawa model.
//!
//! Fock bases at fixed harmonic resolution `K` and charge `Q`, the sparse
//! mass matrix `M^2 = K H`, lowest eigenpairs, bare-mass renormalization,
//! parton distributions, and qubit counts for the direct and compact
//! encodings.

pub mod cli;
pub mod encoding;
pub mod error;
pub mod fock_basis;
pub mod hamiltonian;
pub mod io;
pub mod observables;
pub mod sparse;
pub mod spectrum;

pub use error::{Error, Result};
pub use fock_basis::{enumerate_basis, Basis, FockState, Species};
pub use hamiltonian::{build_mass_matrix, ModelParams};
pub use sparse::SparseMatrix;
pub use spectrum::{lowest_eigenpairs, renormalize, EigenResult, RenormTarget};
