//! Periodic lattice geometry, discrete vector calculus and spectral
//! transforms.
//!
//! Layout is staggered (marker-and-cell): scalars sit at cell centers, the
//! j-th component of a vector field sits on the face between `x` and
//! `x + h e_j`. Forward differences realize the gradient and backward
//! differences the divergence, so that `<grad u, F> = -<u, div F>` holds
//! exactly (up to rounding) on the torus.

mod calculus;
mod field;
mod grid;
mod spectral;

pub use calculus::{curl_max, d_minus, d_plus, discrete_divergence, discrete_gradient};
pub use field::{ScalarField, VectorField};
pub use grid::{make_grid, TorusGrid};
pub use spectral::{
    fft_all_axes, fourier_multiplier_apply, solve_poisson, MultiplierTable, PoissonSolution,
    Spectral,
};
