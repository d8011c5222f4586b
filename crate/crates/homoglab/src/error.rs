//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension {0}: must be 1, 2 or 3")]
    InvalidDimension(usize),
    #[error("invalid grid size {0}: {1}")]
    InvalidSize(usize, String),
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("fields live on mismatched grids")]
    MismatchedGrids,
    #[error("multiplier symbol singular or non-finite at frequency {0:?}")]
    SymbolSingular(Vec<usize>),
    #[error("spectral output has non-negligible imaginary part ({0:.3e} relative)")]
    ComplexResidue(f64),
    #[error("solver did not converge: residual {residual:.3e} after {iters} iterations")]
    NoConvergence {
        residual: f64,
        iters: usize,
        best: Box<crate::solver::SolveResult>,
    },
    #[error("operator is not positive definite (non-positive curvature in CG); coefficient field likely violates ellipticity")]
    IllConditioned,
    #[error("scaling law domain error: {0}")]
    DomainError(String),
    #[error("averaging field does not fit the torus: {0}")]
    GeometryError(String),
    #[error("index error: {0}")]
    IndexError(String),
    #[error("degenerate series: {0}")]
    DegenerateSeries(String),
    #[error("averaging scale too small: {0}")]
    ScaleTooSmall(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("homogenized matrix symbol not positive on lattice frequencies")]
    SingularAhom,
    #[error("dense reference solve limited to 4096 cells, got {0}")]
    TooLarge(usize),
    #[error("dense system singular; coefficient field likely violates ellipticity")]
    SingularSystem,
    #[error("config parse error: {0}")]
    ParseError(String),
    #[error("config validation failed:\n{}", .0.join("\n"))]
    ValidationError(Vec<String>),
    #[error("sample {index} failed: {source}")]
    Sample {
        index: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("campaign failed: {failed} of {total} samples failed (> 25%)")]
    TooManyFailures { failed: usize, total: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serialize(String),
}

impl Error {
    pub fn sample(index: usize, source: Error) -> Self {
        Error::Sample {
            index,
            source: Box::new(source),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
