//! Application of the heterogeneous divergence-form operator on the staggered
//! grid.
//!
//! The flux of a face field `F` is assembled in two parts: the diagonal of
//! `a` acts per face with the harmonic mean of the two adjacent cells taken
//! in the flux direction, and off-diagonal entries act at cell centers on the
//! two-point averaged gradient with the adjoint average back to faces. With
//! `a = c Id` the composite operator reduces exactly to `c (-lap_h)`.

use crate::lattice::{ScalarField, TorusGrid, VectorField};
use crate::media::CoefficientField;
use crate::parallel;

/// Shift `idx` by +1 along the axis with this stride/block, wrapping.
#[inline]
pub fn up(idx: usize, stride: usize, block: usize) -> usize {
    if idx % block + stride < block {
        idx + stride
    } else {
        idx + stride - block
    }
}

/// Shift `idx` by -1 along the axis with this stride/block, wrapping.
#[inline]
pub fn down(idx: usize, stride: usize, block: usize) -> usize {
    if idx % block >= stride {
        idx - stride
    } else {
        idx + block - stride
    }
}

pub struct DivFormOperator {
    grid: TorusGrid,
    /// Harmonic mean of `a_jj` across each j-face.
    face_diag: Vec<Vec<f64>>,
    /// Row-major off-diagonal entries per cell, `None` for isotropic media.
    offdiag: Option<Vec<f64>>,
    symmetric: bool,
    /// Mean of `tr(a)/d`, the scalar behind the FFT preconditioner.
    mean_diag: f64,
}

impl DivFormOperator {
    pub fn new(a: &CoefficientField) -> Self {
        let grid = *a.grid();
        let d = grid.dim();
        let n = grid.cells();
        let strides = grid.strides();
        let l = grid.side();
        let mut face_diag = Vec::with_capacity(d);
        for j in 0..d {
            let s = strides[j];
            let block = l * s;
            let mut hm = vec![0.0f64; n];
            parallel::par_apply(&mut hm, |i, _| {
                let a0 = a.entry(i, j, j);
                let a1 = a.entry(up(i, s, block), j, j);
                2.0 * a0 * a1 / (a0 + a1)
            });
            face_diag.push(hm);
        }
        let offdiag = if a.is_isotropic() {
            None
        } else {
            let mut e = vec![0.0f64; n * d * d];
            let mut any = false;
            for cell in 0..n {
                for r in 0..d {
                    for c in 0..d {
                        if r != c {
                            let v = a.entry(cell, r, c);
                            e[cell * d * d + r * d + c] = v;
                            any |= v != 0.0;
                        }
                    }
                }
            }
            if any {
                Some(e)
            } else {
                None
            }
        };
        DivFormOperator {
            grid,
            face_diag,
            offdiag,
            symmetric: a.is_symmetric(),
            mean_diag: a.mean_scalar(),
        }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn mean_diag(&self) -> f64 {
        self.mean_diag
    }

    /// Harmonic face mean of `a_jj` on the j-face of cell `idx`.
    #[inline]
    pub fn face_diag_value(&self, j: usize, idx: usize) -> f64 {
        self.face_diag[j][idx]
    }

    /// Flux of a face field: `flux(a, F)_j` on j-faces.
    pub fn flux(&self, f: &VectorField) -> VectorField {
        let grid = self.grid;
        let d = grid.dim();
        let n = grid.cells();
        let strides = grid.strides();
        let l = grid.side();
        let mut out = VectorField::zeros(grid);
        for j in 0..d {
            let comp = out.comp_mut(j);
            let fd = &self.face_diag[j];
            let fj = f.comp(j);
            parallel::par_apply(comp, |i, _| fd[i] * fj[i]);
        }
        if let Some(e) = &self.offdiag {
            // gradient averaged to cell centers
            let mut gc: Vec<Vec<f64>> = Vec::with_capacity(d);
            for k in 0..d {
                let s = strides[k];
                let block = l * s;
                let fk = f.comp(k);
                let mut cellk = vec![0.0f64; n];
                parallel::par_apply(&mut cellk, |i, _| 0.5 * (fk[i] + fk[down(i, s, block)]));
                gc.push(cellk);
            }
            for j in 0..d {
                let mut s_cell = vec![0.0f64; n];
                parallel::par_apply(&mut s_cell, |i, _| {
                    let mut acc = 0.0;
                    for k in 0..d {
                        if k != j {
                            acc += e[i * d * d + j * d + k] * gc[k][i];
                        }
                    }
                    acc
                });
                let sj = strides[j];
                let block = l * sj;
                let comp = out.comp_mut(j);
                parallel::par_apply(comp, |i, v| {
                    v + 0.5 * (s_cell[i] + s_cell[up(i, sj, block)])
                });
            }
        }
        out
    }

    /// Flux of the constant unit face field `e_i`; the right-hand side of the
    /// corrector equation.
    pub fn flux_of_unit(&self, i: usize) -> VectorField {
        let mut e = VectorField::zeros(self.grid);
        e.comp_mut(i).iter_mut().for_each(|v| *v = 1.0);
        self.flux(&e)
    }

    fn gradient_into(&self, u: &[f64], grad: &mut VectorField) {
        let grid = self.grid;
        let inv_h = 1.0 / grid.spacing();
        let strides = grid.strides();
        let l = grid.side();
        for j in 0..grid.dim() {
            let s = strides[j];
            let block = l * s;
            let comp = grad.comp_mut(j);
            parallel::par_apply(comp, |i, _| (u[up(i, s, block)] - u[i]) * inv_h);
        }
    }

    /// `out = -div(flux(grad u))`.
    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        let grid = self.grid;
        let mut grad = VectorField::zeros(grid);
        self.gradient_into(u, &mut grad);
        let flux = self.flux(&grad);
        let inv_h = 1.0 / grid.spacing();
        let strides = grid.strides();
        let l = grid.side();
        out.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..grid.dim() {
            let s = strides[j];
            let block = l * s;
            let fj = flux.comp(j);
            parallel::par_apply(out, |i, v| v - (fj[i] - fj[down(i, s, block)]) * inv_h);
        }
    }

    /// Weak-form energy `sum grad(u) . flux(a, grad u) h^d`.
    pub fn energy(&self, u: &ScalarField) -> f64 {
        let mut grad = VectorField::zeros(self.grid);
        self.gradient_into(u.values(), &mut grad);
        let flux = self.flux(&grad);
        grad.dot(&flux)
    }
}
