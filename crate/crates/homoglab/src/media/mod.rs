//! Stationary random media: Gaussian fields with prescribed correlation
//! decay, Lipschitz transforms into admissible coefficient fields, and
//! Poisson-inclusion composites.

mod coefficient;
mod gaussian;
mod inclusions;
mod io;
pub mod rng;
mod transform;

pub use coefficient::CoefficientField;
pub use gaussian::{
    covariance_estimate, sample_gaussian_field, spectrum_table, CovariancePoint, SpectrumKind,
    SpectrumSpec,
};
pub use inclusions::{sample_poisson_inclusions, InclusionSpec};
pub use io::{read_scalar_field, write_scalar_field, FieldKind};
pub use transform::{lipschitz_transform, TransformShape, TransformSpec};
