//! Dirichlet problem solver for the Lagrangian phase operator
//! `F(D²u) = Σ arctan λᵢ` with supercritical right-hand side.
//!
//! The crate is organised bottom-up:
//!
//! * [`phase`] – symmetric functions of eigenvalue vectors: the phase sum,
//!   the concave transform `g = −e^{−A f}`, cone predicates and the
//!   concavity matrix.
//! * [`spectral`] – eigen-decomposition of small symmetric / Hermitian
//!   matrices and the matrix-level operator, its linearization and the
//!   matrix inequalities built on top of it.
//! * [`grid`] – box domains, grid fields, finite-difference real and
//!   complex Hessians, and problem data.
//! * [`linalg`] – sparse row storage and a banded LU used by the solvers.
//! * [`solver`] – harmonic barrier, damped Newton on the concave form and
//!   the continuity method.
//! * [`verify`] – executable property suites and post-solve checks.

pub mod grid;
pub mod linalg;
pub mod phase;
pub mod report;
pub mod solver;
pub mod spectral;
pub mod verify;

pub use grid::{BoxDomain, GridError, GridField, ProblemSpec, Setting, SettingKind};
pub use phase::{ConcavityCertificate, ConeVerdict, PhaseBand, PhaseError, Spectrum};
pub use solver::{NewtonConfig, NewtonLog, SolveError, SolveReport};
pub use spectral::{EigenPair, HermMatrix, HermitianMatrix, SpectralError, SymMatrix};
pub use verify::SuiteReport;

/// Largest eigenvalue count handled by the small dense kernels.
pub const MAX_DIM: usize = 4;
