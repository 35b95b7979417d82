//! Closed recursion equations for the Majorana correlation tensors of open
//! fermionic chains under Lindblad dynamics.
//!
//! The quadratic class (quadratic Hamiltonian, linear dissipators) is handled
//! by [`quad_dynamics`]; quadratic dissipators satisfying the closure
//! condition by [`quartic_dynamics`]. [`oracle`] provides exact
//! diagonalization on the full 4^L-dimensional Liouville space for checks.

pub mod combinatorics;
pub mod error;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod quad_dynamics;
pub mod quartic_dynamics;
pub mod spectrum;
pub mod structure;

pub use combinatorics::{Combinations, FullTensor, ReducedTensor};
pub use error::{Error, Result};
pub use linalg::{CMat, C64};
pub use model::{FermionChainModel, InitialState, LinearDissipator, ModelSpec, ValidationReport};
pub use oracle::DenseLiouvillian;
pub use quad_dynamics::{GaussianMixture, GaussianState, QuadPropagator, SteadyT2};
pub use quartic_dynamics::{ClosureReport, QuarticCore, SectorGenerator};
pub use spectrum::{MatchReport, Parity, ParityFilter, SpectrumEntry, SpectrumResult};
pub use structure::{RapidSpectrum, StructureMatrices};
