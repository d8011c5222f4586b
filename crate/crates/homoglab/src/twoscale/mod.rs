//! Quantitative two-scale expansion experiments.
//!
//! The macroscopic problem lives on the same fine torus as the medium: with
//! `eps = macro_cells / fine_cells`, the corrector computed on the fine grid
//! in macroscopic units coincides with `eps phi(./eps)` of the unit-scale
//! corrector, so no rescaling is applied anywhere. The expansion error
//! `z = u_eps - u_hom_eps - sum_i phi_i W_i` (with `W_i` the forward
//! difference of the Steklov-averaged homogenized solution) satisfies a
//! discrete error equation whose right-hand side is assembled with the exact
//! Leibniz bracketing, so solving it back reproduces `grad z` to solver
//! precision for diagonal media.

use num_complex::Complex64;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::corrector::{compute_corrector, ExtendedCorrector};
use crate::error::{Error, Result};
use crate::lattice::{discrete_gradient, MultiplierTable, ScalarField, TorusGrid, VectorField};
use crate::media::rng::sample_seed;
use crate::parallel;
use crate::report::{PredictedPoint, SampleFailure, ScalingReport, SeriesPoint};
use crate::scaling::{fit_power_law, mu_star};
use crate::solver::{down_index, solve_divform, up_index, DivFormOperator, SolveOptions};
use crate::CoefficientField;

/// Ball-average (Steklov) smoothing at scale `eps` (relative to the period):
/// spectral convolution with the normalized indicator of the radius
/// `eps * period` ball; exact on constants and an L2 contraction.
pub fn steklov_average(u: &ScalarField, eps: f64) -> Result<ScalarField> {
    let grid = *u.grid();
    let radius = eps * grid.period();
    if radius < grid.spacing() {
        return Err(Error::ScaleTooSmall(format!(
            "ball radius {radius} does not resolve the spacing {}",
            grid.spacing()
        )));
    }
    let table = steklov_table(&grid, eps)?;
    table.apply(u)
}

/// Multiplier table of the Steklov ball average.
pub fn steklov_table(grid: &TorusGrid, eps: f64) -> Result<MultiplierTable> {
    let radius = eps * grid.period();
    let origin = vec![0.0f64; grid.dim()];
    let (ind, count) = crate::scaling::ball_indicator(grid, &origin, radius);
    if count == 0 {
        return Err(Error::ScaleTooSmall(format!(
            "ball radius {radius} captures no cells"
        )));
    }
    let mut buf: Vec<Complex64> = ind
        .values()
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .collect();
    crate::lattice::fft_all_axes(grid, &mut buf, false);
    let inv = 1.0 / count as f64;
    // symmetric indicator: the symbol is real with modulus <= 1
    MultiplierTable::from_real_fn(*grid, |k| buf[grid.index(&k[..grid.dim()])].re * inv, 1.0)
}

/// Mean-zero solution of `-div(ahom grad u) = div g` for a constant matrix.
///
/// The operator uses the staggered corner scheme
/// `sum_{i,j} ahom_{ji} D_j^- D_i^+`, whose symbol is
/// `conj(d_j) ahom_{ji} d_i`; this is the unique constant-coefficient
/// operator compatible with the discrete two-scale error algebra.
pub fn solve_homogenized(ahom: &[f64], g: &VectorField) -> Result<ScalarField> {
    let grid = *g.grid();
    let d = grid.dim();
    assert_eq!(ahom.len(), d * d);
    // verify positivity of the real part off k = 0
    let mut singular = false;
    grid.for_each_cell(|idx, k| {
        if idx == 0 || singular {
            return;
        }
        if symbol(ahom, &grid, k).re <= 0.0 {
            singular = true;
        }
    });
    if singular {
        return Err(Error::SingularAhom);
    }
    let rhs = crate::lattice::discrete_divergence(g);
    let table = MultiplierTable::from_complex_fn(
        grid,
        |k| Complex64::new(1.0, 0.0) / symbol(ahom, &grid, k),
        Complex64::default(),
    )?;
    let mut u = table.apply(&rhs)?;
    u.remove_mean();
    Ok(u)
}

fn symbol(ahom: &[f64], grid: &TorusGrid, k: &[usize; 3]) -> Complex64 {
    let d = grid.dim();
    let mut acc = Complex64::default();
    for j in 0..d {
        let dj = grid.forward_symbol(k, j);
        for i in 0..d {
            let di = grid.forward_symbol(k, i);
            acc += ahom[j * d + i] * dj.conj() * di;
        }
    }
    acc
}

#[derive(Debug, Clone, Serialize)]
pub struct TwoScaleResult {
    pub eps: f64,
    /// `|grad z|_{L2}` normalized by the mu_star-weighted norm of `grad g`.
    pub err_h1: f64,
    pub err_h1_raw: f64,
    /// Norms of the two error-equation contributions:
    /// `(|g - g_eps|, |(a phi - sigma) grad W|)`.
    pub components: (f64, f64),
    /// Predicted rate `eps * mu_star(1/eps)`.
    pub predicted: f64,
    /// Relative gap between the directly assembled `grad z` and the solution
    /// of the error equation.
    pub consistency: f64,
    /// `|grad(u_eps - u_hom)| / |grad u_hom|`; the constant-media control.
    pub control_gap: f64,
}

/// Band-limited macroscopic load: four low modes per component with frozen
/// phases and amplitudes.
pub fn band_limited_load(grid: &TorusGrid) -> VectorField {
    let d = grid.dim();
    let period = grid.period();
    let modes: Vec<(Vec<f64>, f64, f64)> = match d {
        1 => vec![
            (vec![1.0], 1.0, 0.3),
            (vec![2.0], 0.5, 1.1),
        ],
        2 => vec![
            (vec![1.0, 0.0], 1.0, 0.3),
            (vec![0.0, 1.0], 0.8, 1.7),
            (vec![1.0, 1.0], 0.5, 0.9),
            (vec![2.0, 1.0], 0.3, 2.1),
        ],
        _ => vec![
            (vec![1.0, 0.0, 0.0], 1.0, 0.3),
            (vec![0.0, 1.0, 0.0], 0.8, 1.7),
            (vec![0.0, 0.0, 1.0], 0.6, 0.9),
            (vec![1.0, 1.0, 0.0], 0.4, 2.1),
        ],
    };
    VectorField::from_face_fn(*grid, |j, p| {
        let mut acc = 0.0;
        for (m, amp, phase) in &modes {
            let mut arg = *phase + j as f64;
            for (a, &mm) in m.iter().enumerate() {
                arg += 2.0 * std::f64::consts::PI * mm * p[a] / period;
            }
            acc += amp * arg.cos();
        }
        acc
    })
}

/// Run the full two-scale experiment for one medium sample.
///
/// `a_fine` and the corrector live on the fine grid; `g` is the band-limited
/// macroscopic load on the same grid; `eps` is the scale ratio 2^-m; `beta`
/// is the medium's correlation-decay exponent driving the predicted rate.
pub fn two_scale_error(
    a_fine: &CoefficientField,
    corrector: &ExtendedCorrector,
    g: &VectorField,
    eps: f64,
    beta: f64,
    opts: &SolveOptions,
) -> Result<TwoScaleResult> {
    let grid = *a_fine.grid();
    if corrector.grid() != &grid || g.grid() != &grid {
        return Err(Error::GridMismatch(
            "medium, corrector and load must share the fine grid".into(),
        ));
    }
    let m = 1.0 / eps;
    if !(eps > 0.0 && eps <= 1.0 && m.fract() == 0.0 && (m as usize).is_power_of_two()) {
        return Err(Error::InvalidSpec(format!("eps {eps} is not of the form 2^-m")));
    }
    let d = grid.dim();
    let h = grid.spacing();
    let strides = grid.strides();
    let l = grid.side();

    // heterogeneous and homogenized solves
    let u_eps = solve_divform(a_fine, g, opts)?;
    let ahom = &corrector.ahom_sample;
    let u_hom = solve_homogenized(ahom, g)?;
    let table = steklov_table(&grid, eps)?;
    let u_hom_eps = table.apply(&u_hom)?;
    let mut g_eps = VectorField::zeros(grid);
    for j in 0..d {
        let comp = table.apply(&ScalarField::from_vec(grid, g.comp(j).to_vec()))?;
        g_eps.comp_mut(j).copy_from_slice(comp.values());
    }

    // W_i = D_i^+ u_hom_eps, cell-labeled
    let w: Vec<Vec<f64>> = (0..d)
        .map(|i| {
            let s = strides[i];
            let block = l * s;
            let uh = u_hom_eps.values();
            let mut out = vec![0.0f64; grid.cells()];
            parallel::par_apply(&mut out, |idx, _| (uh[up_index(idx, s, block)] - uh[idx]) / h);
            out
        })
        .collect();

    // z = u_eps - u_hom_eps - sum_i phi_i W_i
    let mut z = u_eps.u.values().to_vec();
    {
        let uh = u_hom_eps.values();
        parallel::par_apply(&mut z, |idx, v| {
            let mut corr_term = 0.0;
            for i in 0..d {
                corr_term += corrector.phi[i].values()[idx] * w[i][idx];
            }
            v - uh[idx] - corr_term
        });
    }
    let z = ScalarField::from_vec(grid, z);
    let grad_z = discrete_gradient(&z);
    let err_raw = grad_z.norm_l2();

    // error-equation right-hand side with the exact bracketing:
    //   T_j = sum_i hm_j(a) phi_i(x + h e_j) D_j^+ W_i            (a phi term)
    //   T_k += sum_{i, j != k} sigma_ijk(x - h e_j) D_j^- W_i     (sigma term)
    let op = DivFormOperator::new(a_fine);
    let mut t = VectorField::zeros(grid);
    for j in 0..d {
        let sj = strides[j];
        let bj = l * sj;
        let comp = t.comp_mut(j);
        parallel::par_apply(comp, |idx, _| {
            let upj = up_index(idx, sj, bj);
            let mut acc = 0.0;
            for i in 0..d {
                let dw = (w[i][upj] - w[i][idx]) / h;
                acc += op.face_diag_value(j, idx) * corrector.phi[i].values()[upj] * dw;
            }
            acc
        });
    }
    for k in 0..d {
        let sk = strides[k];
        let bk = l * sk;
        let mut add = vec![0.0f64; grid.cells()];
        parallel::par_apply(&mut add, |idx, _| {
            let mut acc = 0.0;
            for i in 0..d {
                for j in 0..d {
                    if j == k {
                        continue;
                    }
                    if let Some((field, sign)) = corrector.sigma_view(i, j, k) {
                        let sj = strides[j];
                        let bj = l * sj;
                        let shifted = down_index(idx, sj, bj);
                        let dw = (w[i][idx] - w[i][down_index(idx, sj, bj)]) / h;
                        acc += sign * field.values()[shifted] * dw;
                    }
                }
            }
            acc
        });
        let comp = t.comp_mut(k);
        parallel::par_apply(comp, |idx, v| v + add[idx]);
        let _ = (sk, bk);
    }

    // combined right-hand side (g - g_eps) + T
    let mut rhs = VectorField::zeros(grid);
    let mut comp_gdiff = 0.0;
    let mut comp_t = 0.0;
    for j in 0..d {
        let gj = g.comp(j);
        let gej = g_eps.comp(j);
        let tj = t.comp(j);
        let comp = rhs.comp_mut(j);
        parallel::par_apply(comp, |idx, _| gj[idx] - gej[idx] + tj[idx]);
        comp_gdiff += g
            .comp(j)
            .iter()
            .zip(gej)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>();
        comp_t += parallel::norm_sq(tj);
    }
    let cell_vol = grid.cell_volume();
    let comp_gdiff = (comp_gdiff * cell_vol).sqrt();
    let comp_t = (comp_t * cell_vol).sqrt();

    // solve the error equation and compare gradients
    let z_hat = solve_divform(a_fine, &rhs, opts)?;
    let grad_z_hat = discrete_gradient(&z_hat.u);
    let mut gap = 0.0;
    for j in 0..d {
        let a_c = grad_z.comp(j);
        let b_c = grad_z_hat.comp(j);
        let mut diff = a_c.to_vec();
        parallel::par_apply(&mut diff, |idx, v| v - b_c[idx]);
        gap += parallel::norm_sq(&diff);
    }
    let gap = (gap * cell_vol).sqrt();
    let consistency = if err_raw > 0.0 { gap / err_raw } else { gap };

    let denom = weighted_load_norm(g, eps, beta);
    let err_h1 = err_raw / denom.max(1e-300);

    // control: heterogeneous vs homogenized gradients
    let grad_ueps = discrete_gradient(&u_eps.u);
    let grad_uhom = discrete_gradient(&u_hom);
    let mut num = 0.0;
    let mut den = 0.0;
    for j in 0..d {
        let a_c = grad_ueps.comp(j);
        let b_c = grad_uhom.comp(j);
        let mut diff = a_c.to_vec();
        parallel::par_apply(&mut diff, |idx, v| v - b_c[idx]);
        num += parallel::norm_sq(&diff);
        den += parallel::norm_sq(b_c);
    }
    let control_gap = (num / den.max(1e-300)).sqrt();

    Ok(TwoScaleResult {
        eps,
        err_h1,
        err_h1_raw: err_raw,
        components: (comp_gdiff, comp_t),
        predicted: eps * mu_star(1.0 / eps, beta, d),
        consistency,
        control_gap,
    })
}

/// Weighted norm `(sum mu_star(|x|/(eps P))^2 |grad g|^2 h^d)^{1/2}` used to
/// normalize the error like the theorem's right-hand side.
pub fn weighted_load_norm(g: &VectorField, eps: f64, beta: f64) -> f64 {
    let grid = *g.grid();
    let d = grid.dim();
    let h = grid.spacing();
    let eps_len = eps * grid.period();
    let strides = grid.strides();
    let l = grid.side();
    let mut acc = 0.0;
    for j in 0..d {
        let comp = g.comp(j);
        // face gradient of the load component
        for axis in 0..d {
            let s = strides[axis];
            let block = l * s;
            let mut contrib = vec![0.0f64; grid.cells()];
            parallel::par_apply(&mut contrib, |idx, _| {
                let dg = (comp[up_index(idx, s, block)] - comp[idx]) / h;
                dg * dg
            });
            let mut weighted = 0.0;
            grid.for_each_cell(|idx, c| {
                let mut r2 = 0.0;
                for a in 0..d {
                    let x = grid.min_image(c[a]);
                    r2 += x * x;
                }
                let mu = mu_star(r2.sqrt() / eps_len, beta, d);
                weighted += mu * mu * contrib[idx];
            });
            acc += weighted;
        }
    }
    (acc * grid.cell_volume()).sqrt()
}

/// Config-driven two-scale campaign: for each eps, average the normalized
/// error over samples; report the fitted slope against `eps mu_star(1/eps)`.
pub fn two_scale_campaign(config: &ExperimentConfig) -> Result<ScalingReport> {
    let hash = config.hash()?;
    let macro_cells = config.campaign.macro_cells;
    let d = config.grid.d;
    let h = config.grid.h;
    let beta = config.ensemble.effective_beta(d);
    let n = config.sampling.n;
    let seed = config.sampling.master_seed;
    let opts = config.solver;

    let mut eps_list = config.campaign.eps.clone();
    eps_list.sort_by(|a, b| b.partial_cmp(a).unwrap());

    let mut report = ScalingReport::new("two-scale", &hash);
    let mut failures: Vec<SampleFailure> = Vec::new();
    for (ei, &eps) in eps_list.iter().enumerate() {
        let fine = (macro_cells as f64 / eps) as usize;
        let grid = TorusGrid::new(d, fine, h)?;
        let g = band_limited_load(&grid);
        let results: Vec<Result<f64>> = parallel::par_map_indexed(n, |s| {
            let a = config
                .ensemble
                .sample(&grid, sample_seed(seed, (ei * n + s) as u64))?;
            let corr = compute_corrector(&a, &opts)?;
            let out = two_scale_error(&a, &corr, &g, eps, beta, &opts)?;
            Ok(out.err_h1)
        });
        let mut vals = Vec::new();
        for (s, r) in results.into_iter().enumerate() {
            match r {
                Ok(v) => vals.push(v),
                Err(e) => failures.push(SampleFailure {
                    index: ei * n + s,
                    message: e.to_string(),
                }),
            }
        }
        if vals.is_empty() {
            continue;
        }
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = if vals.len() > 1 {
            vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (vals.len() - 1) as f64
        } else {
            0.0
        };
        report.series.push(SeriesPoint {
            scale: eps,
            value: mean,
            stderr: (var / vals.len() as f64).sqrt(),
            n: vals.len(),
        });
        report.predicted.push(PredictedPoint {
            scale: eps,
            value: eps * mu_star(1.0 / eps, beta, d),
        });
    }
    if failures.len() * 4 > n * eps_list.len() {
        return Err(Error::TooManyFailures {
            failed: failures.len(),
            total: n * eps_list.len(),
        });
    }
    report.failures = failures;
    if report.series.len() >= 3 {
        let pts: Vec<(f64, f64, f64)> = report
            .series
            .iter()
            .map(|p| (p.scale, p.value, p.stderr))
            .collect();
        report.fit = fit_power_law(&pts).ok();
        // effective slope of the predicted law over the same eps range
        let lo = eps_list.last().copied().unwrap();
        let hi = eps_list.first().copied().unwrap();
        let pred_slope = ((hi * mu_star(1.0 / hi, beta, d)).ln()
            - (lo * mu_star(1.0 / lo, beta, d)).ln())
            / (hi.ln() - lo.ln());
        report.predicted_exponent = Some(pred_slope);
    }
    Ok(report)
}
