//! Numerical laboratory for stochastic homogenization of divergence-form
//! elliptic operators with correlated random coefficients.
//!
//! The crate generates stationary random media on periodic lattices, computes
//! extended correctors and homogenized coefficients with FFT-preconditioned
//! Krylov solvers, and runs Monte-Carlo campaigns that measure decay, growth
//! and two-scale expansion statistics against their predicted scaling laws.
//!
//! Everything is deterministic given a master seed: sampling streams are
//! split by (seed, sample index, purpose) and campaign reductions are ordered
//! by sample index, so reports are byte-identical regardless of thread count.

pub mod campaign;
pub mod config;
pub mod corrector;
pub mod error;
pub mod lattice;
pub mod media;
pub mod oracle;
pub mod parallel;
pub mod report;
pub mod scaling;
pub mod solver;
pub mod twoscale;

pub use error::Error;
pub use lattice::{ScalarField, TorusGrid, VectorField};
pub use media::CoefficientField;
