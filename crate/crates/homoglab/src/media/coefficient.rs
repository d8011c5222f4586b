use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::lattice::TorusGrid;
use crate::parallel;

/// Per-cell d x d coefficient matrices with an ellipticity certificate.
///
/// Isotropic media store one scalar per cell (the matrix is that scalar times
/// the identity); general media store the full row-major d x d block.
#[derive(Debug, Clone)]
pub struct CoefficientField {
    grid: TorusGrid,
    data: CoeffData,
    lambda: f64,
    symmetric: bool,
}

#[derive(Debug, Clone)]
enum CoeffData {
    Isotropic(Vec<f64>),
    Full(Vec<f64>),
}

impl CoefficientField {
    /// Isotropic medium `a(x) = alpha(x) Id` with certified `lambda`.
    pub fn isotropic(grid: TorusGrid, alpha: Vec<f64>, lambda: f64) -> Self {
        assert_eq!(alpha.len(), grid.cells());
        CoefficientField {
            grid,
            data: CoeffData::Isotropic(alpha),
            lambda,
            symmetric: true,
        }
    }

    /// Constant scalar medium `c Id`.
    pub fn constant(grid: TorusGrid, c: f64) -> Self {
        Self::isotropic(grid, vec![c; grid.cells()], c)
    }

    /// Full per-cell matrices, row-major `d*d` per cell.
    pub fn full(grid: TorusGrid, entries: Vec<f64>, lambda: f64, symmetric: bool) -> Self {
        assert_eq!(entries.len(), grid.cells() * grid.dim() * grid.dim());
        CoefficientField {
            grid,
            data: CoeffData::Full(entries),
            lambda,
            symmetric,
        }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    /// Certified ellipticity constant (symmetric part >= lambda Id per cell).
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn is_isotropic(&self) -> bool {
        matches!(self.data, CoeffData::Isotropic(_))
    }

    /// Scalar value at a cell for isotropic media.
    #[inline]
    pub fn iso(&self, cell: usize) -> f64 {
        match &self.data {
            CoeffData::Isotropic(v) => v[cell],
            CoeffData::Full(_) => panic!("iso() on a full coefficient field"),
        }
    }

    /// Matrix entry `a_{rc}(x)`.
    #[inline]
    pub fn entry(&self, cell: usize, r: usize, c: usize) -> f64 {
        match &self.data {
            CoeffData::Isotropic(v) => {
                if r == c {
                    v[cell]
                } else {
                    0.0
                }
            }
            CoeffData::Full(e) => {
                let d = self.grid.dim();
                e[cell * d * d + r * d + c]
            }
        }
    }

    /// Mean of `tr(sym a)/d`, the scalar used by the FFT preconditioner.
    pub fn mean_scalar(&self) -> f64 {
        match &self.data {
            CoeffData::Isotropic(v) => parallel::sum(v) / v.len() as f64,
            CoeffData::Full(e) => {
                let d = self.grid.dim();
                let n = self.grid.cells();
                let mut acc = 0.0;
                for cell in 0..n {
                    for j in 0..d {
                        acc += e[cell * d * d + j * d + j];
                    }
                }
                acc / (n * d) as f64
            }
        }
    }

    /// Verify the admissibility bounds on every cell: operator norm <= 1 and
    /// symmetric part >= lambda Id.
    pub fn check_admissible(&self) -> Result<()> {
        let d = self.grid.dim();
        match &self.data {
            CoeffData::Isotropic(v) => {
                for (i, &a) in v.iter().enumerate() {
                    if !(a >= self.lambda && a <= 1.0 + 1e-14) {
                        return Err(Error::InvalidSpec(format!(
                            "cell {i}: isotropic value {a} outside [{}, 1]",
                            self.lambda
                        )));
                    }
                }
                Ok(())
            }
            CoeffData::Full(e) => {
                for cell in 0..self.grid.cells() {
                    let block = &e[cell * d * d..(cell + 1) * d * d];
                    let (op, eig_min) = matrix_bounds(block, d);
                    if op > 1.0 + 1e-12 {
                        return Err(Error::InvalidSpec(format!(
                            "cell {cell}: operator norm {op} > 1"
                        )));
                    }
                    if eig_min < self.lambda - 1e-12 {
                        return Err(Error::InvalidSpec(format!(
                            "cell {cell}: symmetric part eigenvalue {eig_min} < {}",
                            self.lambda
                        )));
                    }
                }
                Ok(())
            }
        }
    }
}

/// `(operator norm, min eigenvalue of the symmetric part)` of a row-major
/// d x d block.
pub fn matrix_bounds(block: &[f64], d: usize) -> (f64, f64) {
    let a = DMatrix::from_row_slice(d, d, block);
    let sym = (&a + a.transpose()) * 0.5;
    let eig_min = sym
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let gram = a.transpose() * &a;
    let op = gram
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .fold(0.0f64, f64::max)
        .max(0.0)
        .sqrt();
    (op, eig_min)
}
