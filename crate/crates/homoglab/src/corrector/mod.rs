//! Extended correctors `(phi_i, q_i, sigma_ijk)` and homogenized
//! coefficients.
//!
//! For each direction i the corrector solves `-div(a(grad phi_i + e_i)) = 0`;
//! the per-sample homogenized column is the torus average of the flux
//! `a(grad phi_i + e_i)`, the flux fluctuation `q_i` is the flux minus that
//! average (mean-zero by construction), and the flux corrector solves
//! `-lap sigma_ijk = D_j q_ik - D_k q_ij` on the (j,k) corner lattice so that
//! `div sigma_i = q_i` holds up to the solver tolerance. Skew-symmetry in the
//! last two indices is enforced by storing only j < k and antisymmetrizing on
//! read.

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::lattice::{d_minus, solve_poisson, ScalarField, TorusGrid, VectorField};
use crate::media::CoefficientField;
use crate::parallel;
use crate::solver::{solve_divform, solve_massive, up_index, DivFormOperator, SolveOptions};

/// Per-equation residual metadata.
#[derive(Debug, Clone, Serialize)]
pub struct CorrectorResiduals {
    /// Relative residual of each direction's divergence-form solve.
    pub phi: Vec<f64>,
    /// Relative residual of `div sigma_i = q_i` per direction.
    pub sigma_div: Vec<f64>,
    pub iters: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct ExtendedCorrector {
    grid: TorusGrid,
    /// Mean-zero correctors, one per direction.
    pub phi: Vec<ScalarField>,
    /// Face gradients of the correctors.
    pub grad_phi: Vec<VectorField>,
    /// Mean-zero flux fluctuations, one face field per direction.
    pub q: Vec<VectorField>,
    /// `sigma_{i j k}` for j < k, indexed by `[i][pair]` with pairs in
    /// lexicographic order; values live on (j,k) corners.
    sigma: Vec<Vec<ScalarField>>,
    pairs: Vec<(usize, usize)>,
    /// Per-sample homogenized matrix, row-major d x d.
    pub ahom_sample: Vec<f64>,
    pub residuals: CorrectorResiduals,
}

impl ExtendedCorrector {
    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    fn pair_index(&self, j: usize, k: usize) -> Option<(usize, f64)> {
        if j == k {
            return None;
        }
        let (lo, hi, sign) = if j < k { (j, k, 1.0) } else { (k, j, -1.0) };
        self.pairs
            .iter()
            .position(|&(a, b)| (a, b) == (lo, hi))
            .map(|p| (p, sign))
    }

    /// Stored field and sign realizing `sigma_{ijk}`; `None` when j = k
    /// (the component is identically zero).
    pub fn sigma_view(&self, i: usize, j: usize, k: usize) -> Option<(&ScalarField, f64)> {
        self.pair_index(j, k)
            .map(|(p, sign)| (&self.sigma[i][p], sign))
    }

    /// Materialized `sigma_{ijk}` (antisymmetrized on read).
    pub fn sigma_component(&self, i: usize, j: usize, k: usize) -> ScalarField {
        match self.sigma_view(i, j, k) {
            None => ScalarField::zeros(self.grid),
            Some((f, sign)) => {
                let mut out = f.clone();
                if sign < 0.0 {
                    parallel::par_apply(out.values_mut(), |_, v| -v);
                }
                out
            }
        }
    }

    /// `(div sigma_i)_j = sum_k D_k^- sigma_{ijk}`, a face field per
    /// direction.
    pub fn sigma_divergence(&self, i: usize) -> VectorField {
        let d = self.grid.dim();
        let mut out = VectorField::zeros(self.grid);
        for j in 0..d {
            for k in 0..d {
                if let Some((field, sign)) = self.sigma_view(i, j, k) {
                    let der = d_minus(field.values(), &self.grid, k);
                    let comp = out.comp_mut(j);
                    parallel::par_apply(comp, |idx, v| v + sign * der[idx]);
                }
            }
        }
        out
    }

    /// Torus-average energy of `grad phi_i`.
    pub fn gradient_energy(&self, i: usize) -> f64 {
        let g = &self.grad_phi[i];
        let n = self.grid.cells() as f64;
        (0..self.grid.dim())
            .map(|j| parallel::norm_sq(g.comp(j)))
            .sum::<f64>()
            / n
    }
}

/// Compute the extended corrector of a coefficient field.
pub fn compute_corrector(a: &CoefficientField, opts: &SolveOptions) -> Result<ExtendedCorrector> {
    let grid = *a.grid();
    let d = grid.dim();
    let op = DivFormOperator::new(a);

    // directions are independent solves
    let solved: Vec<Result<(ScalarField, VectorField, f64, usize)>> =
        parallel::par_map_indexed(d, |i| {
            let g = op.flux_of_unit(i);
            let res = solve_divform(a, &g, opts).map_err(|e| Error::sample(i, e))?;
            let grad = crate::lattice::discrete_gradient(&res.u);
            // total flux a(grad phi + e_i) = flux(grad phi) + flux(e_i)
            let mut flux = op.flux(&grad);
            for j in 0..d {
                let gj = g.comp(j);
                let comp = flux.comp_mut(j);
                parallel::par_apply(comp, |idx, v| v + gj[idx]);
            }
            Ok((res.u, flux, res.residual, res.iters))
        });

    let mut phi = Vec::with_capacity(d);
    let mut grad_phi = Vec::with_capacity(d);
    let mut q = Vec::with_capacity(d);
    let mut ahom = vec![0.0f64; d * d];
    let mut residuals = CorrectorResiduals {
        phi: Vec::new(),
        sigma_div: Vec::new(),
        iters: Vec::new(),
    };
    for (i, item) in solved.into_iter().enumerate() {
        let (u, mut flux, residual, iters) = item?;
        let means = flux.means();
        for j in 0..d {
            ahom[j * d + i] = means[j];
            let m = means[j];
            let comp = flux.comp_mut(j);
            parallel::par_apply(comp, |_, v| v - m);
        }
        grad_phi.push(crate::lattice::discrete_gradient(&u));
        phi.push(u);
        q.push(flux);
        residuals.phi.push(residual);
        residuals.iters.push(iters);
    }

    // flux correctors on (j,k) corners
    let mut pairs = Vec::new();
    for j in 0..d {
        for k in (j + 1)..d {
            pairs.push((j, k));
        }
    }
    let strides = grid.strides();
    let l = grid.side();
    let h = grid.spacing();
    let mut sigma: Vec<Vec<ScalarField>> = Vec::with_capacity(d);
    for qi in q.iter() {
        let fields: Vec<ScalarField> = parallel::par_map_indexed(pairs.len(), |p| {
            let (j, k) = pairs[p];
            // rhs = D_j^+ q_ik - D_k^+ q_ij on the (j,k) corner lattice
            let qik = qi.comp(k);
            let qij = qi.comp(j);
            let (sj, sk) = (strides[j], strides[k]);
            let (bj, bk) = (l * sj, l * sk);
            let mut rhs = vec![0.0f64; grid.cells()];
            parallel::par_apply(&mut rhs, |i, _| {
                let dj = (qik[up_index(i, sj, bj)] - qik[i]) / h;
                let dk = (qij[up_index(i, sk, bk)] - qij[i]) / h;
                dj - dk
            });
            solve_poisson(&ScalarField::from_vec(grid, rhs)).u
        });
        sigma.push(fields);
    }

    let mut corrector = ExtendedCorrector {
        grid,
        phi,
        grad_phi,
        q,
        sigma,
        pairs,
        ahom_sample: ahom,
        residuals,
    };

    // record the div sigma_i = q_i defect per direction
    for i in 0..d {
        let div = corrector.sigma_divergence(i);
        let qi = &corrector.q[i];
        let mut num = 0.0;
        let mut den = 0.0;
        for j in 0..d {
            let dj = div.comp(j);
            let qj = qi.comp(j);
            let mut diff = dj.to_vec();
            parallel::par_apply(&mut diff, |idx, v| v - qj[idx]);
            num += parallel::norm_sq(&diff);
            den += parallel::norm_sq(qj);
        }
        let rel = if den > 0.0 {
            (num / den).sqrt()
        } else {
            num.sqrt()
        };
        corrector.residuals.sigma_div.push(rel);
    }
    Ok(corrector)
}

/// Massive correctors `phi_{T,i}` solving
/// `(1/T) phi_T - div(a(grad phi_T + e_i)) = 0`.
pub fn compute_massive_corrector(
    a: &CoefficientField,
    t: f64,
    opts: &SolveOptions,
) -> Result<Vec<(ScalarField, f64)>> {
    let grid = *a.grid();
    let d = grid.dim();
    let op = DivFormOperator::new(a);
    let solved: Vec<Result<(ScalarField, f64)>> = parallel::par_map_indexed(d, |i| {
        let g = op.flux_of_unit(i);
        let res = solve_massive(a, &g, t, opts).map_err(|e| Error::sample(i, e))?;
        Ok((res.u, res.residual))
    });
    solved.into_iter().collect()
}

/// Ensemble estimate of the homogenized matrix.
#[derive(Debug, Clone, Serialize)]
pub struct AhomEstimate {
    /// Row-major d x d mean over samples.
    pub mean: Vec<f64>,
    /// Per-entry standard error.
    pub stderr: Vec<f64>,
    /// All per-sample matrices, indexed by sample.
    pub samples: Vec<Vec<f64>>,
}

/// Mean and standard error of `ahom_sample` over `n` independent media.
pub fn estimate_ahom(config: &ExperimentConfig) -> Result<AhomEstimate> {
    let grid = config.grid.to_grid()?;
    let n = config.sampling.n;
    if n < 2 {
        return Err(Error::InvalidSpec("ahom estimation needs n >= 2".into()));
    }
    let opts = config.solver;
    let per_sample: Vec<Result<Vec<f64>>> = parallel::par_map_indexed(n, |s| {
        let a = config
            .ensemble
            .sample(&grid, crate::media::rng::sample_seed(config.sampling.master_seed, s as u64))?;
        let corr = compute_corrector(&a, &opts)?;
        Ok(corr.ahom_sample)
    });
    let d = grid.dim();
    let mut samples = Vec::with_capacity(n);
    for (i, r) in per_sample.into_iter().enumerate() {
        samples.push(r.map_err(|e| Error::sample(i, e))?);
    }
    let mut mean = vec![0.0; d * d];
    for s in &samples {
        for (m, v) in mean.iter_mut().zip(s) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut stderr = vec![0.0; d * d];
    if n > 1 {
        for s in &samples {
            for (e, (v, m)) in stderr.iter_mut().zip(s.iter().zip(&mean)) {
                *e += (v - m) * (v - m);
            }
        }
        stderr
            .iter_mut()
            .for_each(|e| *e = (*e / ((n - 1) as f64 * n as f64)).sqrt());
    }
    Ok(AhomEstimate {
        mean,
        stderr,
        samples,
    })
}

/// Quadratic-form checks on a per-sample homogenized matrix: ellipticity
/// `xi . a_sym xi >= lambda |xi|^2` and boundedness
/// `|a xi| <= (1/lambda + 1)|xi|` over the axis and diagonal test vectors.
pub fn ahom_bounds_hold(ahom: &[f64], d: usize, lambda: f64) -> bool {
    let mut test_vectors: Vec<Vec<f64>> = Vec::new();
    for i in 0..d {
        let mut e = vec![0.0; d];
        e[i] = 1.0;
        test_vectors.push(e);
    }
    let s = 1.0 / (2.0f64).sqrt();
    for i in 0..d {
        for j in (i + 1)..d {
            for sign in [1.0, -1.0] {
                let mut e = vec![0.0; d];
                e[i] = s;
                e[j] = sign * s;
                test_vectors.push(e);
            }
        }
    }
    for xi in &test_vectors {
        let mut axi = vec![0.0; d];
        for r in 0..d {
            for c in 0..d {
                axi[r] += ahom[r * d + c] * xi[c];
            }
        }
        let quad: f64 = xi.iter().zip(&axi).map(|(x, y)| x * y).sum();
        let norm_axi = axi.iter().map(|v| v * v).sum::<f64>().sqrt();
        if quad < lambda - 1e-10 || norm_axi > (1.0 / lambda + 1.0) + 1e-10 {
            return false;
        }
    }
    true
}

/// Classical Voigt-Reuss sandwich for scalar isotropic media: every
/// eigenvalue of the symmetric part lies between the harmonic and arithmetic
/// means of `alpha`.
pub fn voigt_reuss_bounds(a: &CoefficientField) -> Option<(f64, f64)> {
    if !a.is_isotropic() {
        return None;
    }
    let n = a.grid().cells();
    let mut arith = 0.0;
    let mut harm = 0.0;
    for cell in 0..n {
        let v = a.iso(cell);
        arith += v;
        harm += 1.0 / v;
    }
    Some((n as f64 / harm, arith / n as f64))
}

pub use tests_support::laminate_coefficient;

mod tests_support {
    use super::*;

    /// 2-d laminate `a(x) = alpha(x_0) Id` with equal bands of the two
    /// values; the classical homogenization oracle.
    pub fn laminate_coefficient(grid: TorusGrid, lo: f64, hi: f64) -> CoefficientField {
        let l = grid.side();
        let mut alpha = vec![0.0f64; grid.cells()];
        grid.for_each_cell(|idx, c| {
            alpha[idx] = if c[0] < l / 2 { lo } else { hi };
        });
        CoefficientField::isotropic(grid, alpha, lo.min(hi))
    }
}
