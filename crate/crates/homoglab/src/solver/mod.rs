//! Heterogeneous elliptic solves on the torus: `-div(a grad u) = div g`, the
//! massive variant `(1/T) u - div(a grad u) = div g`, and constant-coefficient
//! Poisson solves.
//!
//! Krylov iterations are preconditioned by the constant-coefficient inverse
//! `(a_bar (-lap_h))^{-1}` applied via FFT, with `a_bar` the mean of the
//! symmetric part of `a`; iteration counts then depend on the contrast, not
//! on the grid size. Symmetric media use CG, non-symmetric media BiCGStab.

mod krylov;
mod operator;

pub use krylov::{bicgstab, pcg, KrylovOutcome};
pub use operator::{down as down_index, up as up_index, DivFormOperator};

// Constant-coefficient Poisson solve lives with the spectral machinery.
pub use crate::lattice::{solve_poisson, PoissonSolution};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{discrete_divergence, MultiplierTable, ScalarField, VectorField};
use crate::media::CoefficientField;
use crate::parallel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Relative residual tolerance.
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Iteration cap; `None` defaults to `10 * L * d`.
    #[serde(default)]
    pub max_iter: Option<usize>,
    /// Apply the FFT constant-coefficient preconditioner.
    #[serde(default = "default_precondition")]
    pub precondition: bool,
}

fn default_tol() -> f64 {
    1e-9
}

fn default_precondition() -> bool {
    true
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-9,
            max_iter: None,
            precondition: true,
        }
    }
}

impl SolveOptions {
    pub fn with_tol(tol: f64) -> Self {
        SolveOptions {
            tol,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol <= 1e-3) {
            return Err(Error::InvalidSpec(format!(
                "tol {} must lie in (0, 1e-3]",
                self.tol
            )));
        }
        if self.max_iter == Some(0) {
            return Err(Error::InvalidSpec("max_iter must be >= 1".into()));
        }
        Ok(())
    }

    fn cap(&self, grid: &crate::lattice::TorusGrid) -> usize {
        self.max_iter.unwrap_or(10 * grid.side() * grid.dim())
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub u: ScalarField,
    /// Achieved relative residual `|div(a grad u + g)| / |div g|`.
    pub residual: f64,
    pub iters: usize,
    /// Residual norms across iterations.
    pub history: Vec<f64>,
}

fn precond_closure(
    grid: &crate::lattice::TorusGrid,
    a_bar: f64,
    mass: f64,
    enabled: bool,
) -> Box<dyn FnMut(&[f64], &mut [f64])> {
    let grid = *grid;
    if !enabled {
        return Box::new(move |r: &[f64], z: &mut [f64]| z.copy_from_slice(r));
    }
    let table = MultiplierTable::from_real_fn(
        grid,
        move |k| 1.0 / (mass + a_bar * grid.laplace_symbol(k)),
        if mass > 0.0 { 1.0 / mass } else { 0.0 },
    )
    .expect("preconditioner symbol is positive");
    Box::new(move |r: &[f64], z: &mut [f64]| {
        let field = ScalarField::from_vec(grid, r.to_vec());
        let out = table.apply(&field).expect("real preconditioner symbol");
        z.copy_from_slice(out.values());
    })
}

fn run_krylov(
    op: &DivFormOperator,
    b: &[f64],
    mass: f64,
    opts: &SolveOptions,
) -> Result<KrylovOutcome> {
    let grid = *op.grid();
    let a_bar = op.mean_diag();
    let mut pre = precond_closure(&grid, a_bar, mass, opts.precondition);
    let mut apply_op = |u: &[f64], out: &mut [f64]| {
        op.apply(u, out);
        if mass > 0.0 {
            parallel::par_apply(out, |i, v| v + mass * u[i]);
        }
    };
    let bnorm = parallel::norm_sq(b).sqrt();
    let tol_abs = opts.tol * bnorm;
    let cap = opts.cap(&grid);
    if op.is_symmetric() {
        pcg(&mut apply_op, &mut pre, b, tol_abs, cap)
    } else {
        bicgstab(&mut apply_op, &mut pre, b, tol_abs, cap)
    }
}

fn finish(
    op: &DivFormOperator,
    outcome: KrylovOutcome,
    b: &[f64],
    bnorm: f64,
    mass: f64,
    mean_zero_gauge: bool,
) -> Result<SolveResult> {
    let grid = *op.grid();
    let mut u = ScalarField::from_vec(grid, outcome.x);
    if mean_zero_gauge {
        u.remove_mean();
    }
    // true residual, recomputed
    let mut au = vec![0.0; b.len()];
    op.apply(u.values(), &mut au);
    if mass > 0.0 {
        let uv = u.values();
        parallel::par_apply(&mut au, |i, v| v + mass * uv[i]);
    }
    let mut r = au;
    parallel::par_apply(&mut r, |i, v| b[i] - v);
    let residual = parallel::norm_sq(&r).sqrt() / bnorm;
    let result = SolveResult {
        u,
        residual,
        iters: outcome.iters,
        history: outcome.history,
    };
    log::debug!(
        target: "homoglab::solver",
        "solve finished: iters={} residual={:.3e} converged={}",
        result.iters,
        result.residual,
        outcome.converged
    );
    if outcome.converged {
        Ok(result)
    } else {
        Err(Error::NoConvergence {
            residual,
            iters: result.iters,
            best: Box::new(result),
        })
    }
}

/// Solve `-div(a grad u) = div g` with mean-zero `u`.
///
/// `g` enters as a face field; the relative residual is measured as
/// `|div(a grad u + g)| / |div g|`, with the convention that a divergence-free
/// `g` returns `u = 0` immediately.
pub fn solve_divform(
    a: &CoefficientField,
    g: &VectorField,
    opts: &SolveOptions,
) -> Result<SolveResult> {
    opts.validate()?;
    if a.grid() != g.grid() {
        return Err(Error::MismatchedGrids);
    }
    let grid = *a.grid();
    let mut b = discrete_divergence(g);
    let bnorm = parallel::norm_sq(b.values()).sqrt();
    if bnorm == 0.0 {
        return Ok(SolveResult {
            u: ScalarField::zeros(grid),
            residual: 0.0,
            iters: 0,
            history: vec![0.0],
        });
    }
    b.remove_mean();
    let op = DivFormOperator::new(a);
    let outcome = run_krylov(&op, b.values(), 0.0, opts)?;
    finish(&op, outcome, b.values(), bnorm, 0.0, true)
}

/// Solve `(1/T) u - div(a grad u) = div g`; the massive term fixes the
/// constant so no gauge is applied.
pub fn solve_massive(
    a: &CoefficientField,
    g: &VectorField,
    t: f64,
    opts: &SolveOptions,
) -> Result<SolveResult> {
    opts.validate()?;
    if !(t > 0.0) {
        return Err(Error::InvalidSpec(format!("massive scale T {t} must be > 0")));
    }
    if a.grid() != g.grid() {
        return Err(Error::MismatchedGrids);
    }
    let grid = *a.grid();
    let b = discrete_divergence(g);
    let bnorm = parallel::norm_sq(b.values()).sqrt();
    if bnorm == 0.0 {
        return Ok(SolveResult {
            u: ScalarField::zeros(grid),
            residual: 0.0,
            iters: 0,
            history: vec![0.0],
        });
    }
    let op = DivFormOperator::new(a);
    let outcome = run_krylov(&op, b.values(), 1.0 / t, opts)?;
    finish(&op, outcome, b.values(), bnorm, 1.0 / t, false)
}
