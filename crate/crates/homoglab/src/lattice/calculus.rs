//! Forward/backward difference calculus on the staggered torus.

use super::field::{ScalarField, VectorField};
use super::grid::TorusGrid;

/// Forward difference along `axis`: `(u(x + h e_j) - u(x)) / h`, living on
/// the j-face of cell `x`.
pub fn d_plus(u: &ScalarField, axis: usize) -> Vec<f64> {
    let grid = *u.grid();
    let inv_h = 1.0 / grid.spacing();
    let v = u.values();
    let mut out = vec![0.0; grid.cells()];
    grid.for_each_cell(|idx, c| {
        let up = grid.shift_up(idx, c[axis], axis);
        out[idx] = (v[up] - v[idx]) * inv_h;
    });
    out
}

/// Backward difference along `axis`: `(u(x) - u(x - h e_j)) / h`.
pub fn d_minus(u: &[f64], grid: &TorusGrid, axis: usize) -> Vec<f64> {
    let inv_h = 1.0 / grid.spacing();
    let mut out = vec![0.0; grid.cells()];
    grid.for_each_cell(|idx, c| {
        let dn = grid.shift_down(idx, c[axis], axis);
        out[idx] = (u[idx] - u[dn]) * inv_h;
    });
    out
}

/// Forward-difference gradient; component j lands on j-faces. Each component
/// has exactly zero mean by periodic telescoping.
pub fn discrete_gradient(u: &ScalarField) -> VectorField {
    let grid = *u.grid();
    let comps = (0..grid.dim()).map(|j| d_plus(u, j)).collect();
    VectorField::from_comps(grid, comps)
}

/// Backward-difference divergence, the negative adjoint of
/// [`discrete_gradient`].
pub fn discrete_divergence(f: &VectorField) -> ScalarField {
    let grid = *f.grid();
    let inv_h = 1.0 / grid.spacing();
    let mut out = vec![0.0; grid.cells()];
    for j in 0..grid.dim() {
        let comp = f.comp(j);
        grid.for_each_cell(|idx, c| {
            let dn = grid.shift_down(idx, c[j], j);
            out[idx] += (comp[idx] - comp[dn]) * inv_h;
        });
    }
    ScalarField::from_vec(grid, out)
}

/// Largest discrete circulation of a face field over all plaquettes and axis
/// pairs; zero (to rounding) exactly when the field is a discrete gradient.
pub fn curl_max(f: &VectorField) -> f64 {
    let grid = *f.grid();
    let inv_h = 1.0 / grid.spacing();
    let mut worst: f64 = 0.0;
    for j in 0..grid.dim() {
        for k in (j + 1)..grid.dim() {
            let fj = f.comp(j);
            let fk = f.comp(k);
            grid.for_each_cell(|idx, c| {
                let up_j = grid.shift_up(idx, c[j], j);
                let up_k = grid.shift_up(idx, c[k], k);
                let circ = (fk[up_j] - fk[idx]) * inv_h - (fj[up_k] - fj[idx]) * inv_h;
                worst = worst.max(circ.abs());
            });
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::make_grid;
    use crate::parallel;

    fn toy_field(l: usize, d: usize, seed: u64) -> ScalarField {
        let grid = make_grid(d, l, 1.0).unwrap();
        let mut state = seed;
        ScalarField::from_fn(grid, |_, _| {
            // splitmix64 step
            state = state.wrapping_add(0x9E3779B97F4A7C15);
            let mut z = state;
            z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
            (z ^ (z >> 31)) as f64 / u64::MAX as f64 - 0.5
        })
    }

    #[test]
    fn gradient_of_constant_is_zero() {
        let grid = make_grid(2, 8, 1.0).unwrap();
        let u = ScalarField::from_fn(grid, |_, _| 3.25);
        let g = discrete_gradient(&u);
        for j in 0..2 {
            assert!(g.comp(j).iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn gradient_of_cosine_mode_matches_closed_form() {
        let grid = make_grid(2, 32, 0.5).unwrap();
        let period = grid.period();
        let h = grid.spacing();
        let u = ScalarField::from_fn(grid, |_, c| {
            (2.0 * std::f64::consts::PI * c[0] as f64 * h / period).cos()
        });
        let g = discrete_gradient(&u);
        grid.for_each_cell(|idx, c| {
            let x = c[0] as f64 * h;
            let expect = ((2.0 * std::f64::consts::PI * (x + h) / period).cos()
                - (2.0 * std::f64::consts::PI * x / period).cos())
                / h;
            assert!((g.comp(0)[idx] - expect).abs() < 1e-14);
            assert!(g.comp(1)[idx].abs() < 1e-15);
        });
    }

    #[test]
    fn gradient_matches_dense_difference_matrix_on_4x4() {
        // Independent oracle: assemble the 16x16 forward-difference matrix
        // per axis explicitly and compare the application.
        let grid = make_grid(2, 4, 1.0).unwrap();
        let u = toy_field(4, 2, 99);
        let n = grid.cells();
        for axis in 0..2 {
            let mut dense = vec![vec![0.0f64; n]; n];
            for row in 0..n {
                let c = grid.coords(row);
                let mut cu = c;
                cu[axis] = (c[axis] + 1) % 4;
                dense[row][row] -= 1.0;
                dense[row][grid.index(&cu[..2])] += 1.0;
            }
            let expect: Vec<f64> = dense
                .iter()
                .map(|r| r.iter().zip(u.values()).map(|(a, b)| a * b).sum())
                .collect();
            let g = discrete_gradient(&u);
            for i in 0..n {
                assert!((g.comp(axis)[i] - expect[i]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn gradient_components_have_zero_mean() {
        let u = toy_field(8, 3, 7);
        let g = discrete_gradient(&u);
        for j in 0..3 {
            let m: f64 = parallel::sum(g.comp(j)) / g.comp(j).len() as f64;
            assert!(m.abs() < 1e-14);
        }
    }

    #[test]
    fn divergence_of_constant_is_zero() {
        let grid = make_grid(3, 8, 1.0).unwrap();
        let mut f = VectorField::zeros(grid);
        for j in 0..3 {
            f.comp_mut(j).iter_mut().for_each(|v| *v = 1.5 + j as f64);
        }
        let div = discrete_divergence(&f);
        assert!(div.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn divergence_of_gradient_applies_laplace_symbol_to_mode() {
        let grid = make_grid(2, 64, 1.0).unwrap();
        let period = grid.period();
        let h = grid.spacing();
        let u = ScalarField::from_fn(grid, |_, c| {
            (2.0 * std::f64::consts::PI * c[0] as f64 * h / period).cos()
        });
        let lap = discrete_divergence(&discrete_gradient(&u));
        // symbol of the 1-d second difference applied to the mode
        let symbol = -(2.0 / (h * h)) * (1.0 - (2.0 * std::f64::consts::PI * h / period).cos());
        grid.for_each_cell(|idx, _| {
            assert!((lap.values()[idx] - symbol * u.values()[idx]).abs() < 1e-12);
        });
    }

    #[test]
    fn adjointness_holds_on_random_pairs() {
        for d in [2usize, 3] {
            let u = toy_field(8, d, 1234 + d as u64);
            let grid = *u.grid();
            let mut f = VectorField::zeros(grid);
            for j in 0..d {
                let w = toy_field(8, d, 500 + j as u64);
                f.comp_mut(j).copy_from_slice(w.values());
            }
            let g = discrete_gradient(&u);
            let lhs = g.dot(&f);
            let div = discrete_divergence(&f);
            let rhs: f64 = parallel::dot(u.values(), div.values()) * grid.cell_volume();
            let scale = g.norm_l2() * f.norm_l2();
            assert!((lhs + rhs).abs() <= 1e-12 * scale.max(1e-30));
        }
    }

    #[test]
    fn gradient_field_has_zero_curl() {
        let u = toy_field(8, 3, 42);
        let g = discrete_gradient(&u);
        assert!(curl_max(&g) < 1e-12);
    }
}
