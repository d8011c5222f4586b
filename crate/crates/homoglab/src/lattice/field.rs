use crate::error::{Error, Result};
use crate::parallel;

use super::grid::TorusGrid;

/// Scalar values at cell centers.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: TorusGrid,
    data: Vec<f64>,
}

/// One value per face: component j lives on the face between `x` and
/// `x + h e_j`, indexed by the lower cell `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    grid: TorusGrid,
    comps: Vec<Vec<f64>>,
}

impl ScalarField {
    pub fn zeros(grid: TorusGrid) -> Self {
        ScalarField {
            grid,
            data: vec![0.0; grid.cells()],
        }
    }

    pub fn from_vec(grid: TorusGrid, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), grid.cells());
        ScalarField { grid, data }
    }

    pub fn from_fn(grid: TorusGrid, f: impl FnMut(usize, &[usize; 3]) -> f64) -> Self {
        let mut data = vec![0.0; grid.cells()];
        let mut f = f;
        grid.for_each_cell(|idx, c| data[idx] = f(idx, c));
        ScalarField { grid, data }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn mean(&self) -> f64 {
        parallel::sum(&self.data) / self.data.len() as f64
    }

    /// Subtract the mean in place; the resulting mean is exactly the rounding
    /// of zero.
    pub fn remove_mean(&mut self) -> f64 {
        let m = self.mean();
        parallel::par_apply(&mut self.data, |_, v| v - m);
        m
    }

    /// l2 norm weighted by the cell volume.
    pub fn norm_l2(&self) -> f64 {
        (parallel::norm_sq(&self.data) * self.grid.cell_volume()).sqrt()
    }

    pub fn assert_finite(&self) -> Result<()> {
        if self.data.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidSpec("field contains NaN or Inf".into()))
        }
    }
}

impl VectorField {
    pub fn zeros(grid: TorusGrid) -> Self {
        VectorField {
            comps: (0..grid.dim()).map(|_| vec![0.0; grid.cells()]).collect(),
            grid,
        }
    }

    pub fn from_comps(grid: TorusGrid, comps: Vec<Vec<f64>>) -> Self {
        assert_eq!(comps.len(), grid.dim());
        for c in &comps {
            assert_eq!(c.len(), grid.cells());
        }
        VectorField { grid, comps }
    }

    /// Build from a function of the face-center position (length units).
    pub fn from_face_fn(grid: TorusGrid, mut f: impl FnMut(usize, &[f64]) -> f64) -> Self {
        let d = grid.dim();
        let h = grid.spacing();
        let mut comps = Vec::with_capacity(d);
        for j in 0..d {
            let mut data = vec![0.0; grid.cells()];
            grid.for_each_cell(|idx, c| {
                let mut p = [0.0f64; 3];
                for a in 0..d {
                    p[a] = c[a] as f64 * h;
                }
                p[j] += 0.5 * h;
                data[idx] = f(j, &p[..d]);
            });
            comps.push(data);
        }
        VectorField { grid, comps }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn comp(&self, j: usize) -> &[f64] {
        &self.comps[j]
    }

    pub fn comp_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.comps[j]
    }

    pub fn comps(&self) -> &[Vec<f64>] {
        &self.comps
    }

    /// Per-component mean.
    pub fn means(&self) -> Vec<f64> {
        self.comps
            .iter()
            .map(|c| parallel::sum(c) / c.len() as f64)
            .collect()
    }

    /// l2 norm over all components, weighted by cell volume.
    pub fn norm_l2(&self) -> f64 {
        let s: f64 = self.comps.iter().map(|c| parallel::norm_sq(c)).sum();
        (s * self.grid.cell_volume()).sqrt()
    }

    /// Volume-weighted inner product with another face field.
    pub fn dot(&self, other: &VectorField) -> f64 {
        let s: f64 = self
            .comps
            .iter()
            .zip(&other.comps)
            .map(|(a, b)| parallel::dot(a, b))
            .sum();
        s * self.grid.cell_volume()
    }

    pub fn assert_finite(&self) -> Result<()> {
        if self.comps.iter().all(|c| c.iter().all(|v| v.is_finite())) {
            Ok(())
        } else {
            Err(Error::InvalidSpec("field contains NaN or Inf".into()))
        }
    }
}
