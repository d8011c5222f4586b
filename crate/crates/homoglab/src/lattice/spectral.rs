//! FFT transforms and Fourier multipliers on the torus.
//!
//! Transforms run axis by axis: the target axis is permuted to the contiguous
//! position, all lines are transformed (in parallel), and the permutation is
//! undone. Multipliers are precomputed tables over the full frequency lattice;
//! the k=0 value is always supplied explicitly by the caller.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::parallel;

use super::field::ScalarField;
use super::grid::TorusGrid;

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    static PLANS: OnceLock<Mutex<HashMap<(usize, bool), Arc<dyn Fft<f64>>>>> = OnceLock::new();
    let cache = PLANS.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap();
    guard
        .entry((len, inverse))
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            if inverse {
                planner.plan_fft_inverse(len)
            } else {
                planner.plan_fft_forward(len)
            }
        })
        .clone()
}

fn permute(src: &[Complex64], dst: &mut [Complex64], l: usize, stride: usize, gather: bool) {
    let block = l * stride;
    let chunk = 1 << 13;
    let f = |p: usize| {
        let line = p / l;
        let i = p % l;
        let outer = line / stride;
        let inner = line % stride;
        outer * block + inner + i * stride
    };
    // dst and src are distinct buffers, so the permutation is a pure map.
    let apply = |start: usize, out: &mut [Complex64]| {
        for (off, v) in out.iter_mut().enumerate() {
            let p = start + off;
            *v = if gather { src[f(p)] } else { src[p] };
        }
    };
    if gather {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            dst.par_chunks_mut(chunk)
                .enumerate()
                .for_each(|(c, out)| apply(c * chunk, out));
        }
        #[cfg(not(feature = "parallel"))]
        {
            for (c, out) in dst.chunks_mut(chunk).enumerate() {
                apply(c * chunk, out);
            }
        }
    } else {
        // scatter: dst[f(p)] = src[p]; invert by iterating destination indices
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            dst.par_chunks_mut(chunk).enumerate().for_each(|(c, out)| {
                let base = c * chunk;
                for (off, v) in out.iter_mut().enumerate() {
                    let q = base + off;
                    // q = outer*block + inner + i*stride; recover p = line*l + i
                    let outer = q / block;
                    let rem = q % block;
                    let i = rem / stride;
                    let inner = rem % stride;
                    *v = src[(outer * stride + inner) * l + i];
                }
            });
        }
        #[cfg(not(feature = "parallel"))]
        {
            for (c, out) in dst.chunks_mut(chunk).enumerate() {
                let base = c * chunk;
                for (off, v) in out.iter_mut().enumerate() {
                    let q = base + off;
                    let outer = q / block;
                    let rem = q % block;
                    let i = rem / stride;
                    let inner = rem % stride;
                    *v = src[(outer * stride + inner) * l + i];
                }
            }
        }
    }
}

fn fft_lines(buf: &mut [Complex64], l: usize, inverse: bool) {
    let fft = plan(l, inverse);
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        buf.par_chunks_mut(l).for_each_init(
            || vec![Complex64::default(); fft.get_inplace_scratch_len()],
            |scratch, line| fft.process_with_scratch(line, scratch),
        );
    }
    #[cfg(not(feature = "parallel"))]
    {
        let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        for line in buf.chunks_mut(l) {
            fft.process_with_scratch(line, &mut scratch);
        }
    }
}

/// In-place d-dimensional transform (unnormalized forward, inverse carries no
/// 1/N either; callers normalize).
pub fn fft_all_axes(grid: &TorusGrid, buf: &mut [Complex64], inverse: bool) {
    let l = grid.side();
    let strides = grid.strides();
    let mut scratch = vec![Complex64::default(); buf.len()];
    for axis in 0..grid.dim() {
        let stride = strides[axis];
        if stride == 1 {
            fft_lines(buf, l, inverse);
        } else {
            permute(buf, &mut scratch, l, stride, true);
            fft_lines(&mut scratch, l, inverse);
            permute(&scratch, buf, l, stride, false);
        }
    }
}

/// Precomputed multiplier over the full frequency lattice.
#[derive(Debug, Clone)]
pub struct MultiplierTable {
    grid: TorusGrid,
    values: Vec<Complex64>,
}

impl MultiplierTable {
    /// Build from a real symbol; `m` is evaluated at every k != 0 and the
    /// k = 0 entry is `zero_mode`.
    pub fn from_real_fn(
        grid: TorusGrid,
        m: impl Fn(&[usize; 3]) -> f64,
        zero_mode: f64,
    ) -> Result<Self> {
        let mut values = vec![Complex64::default(); grid.cells()];
        let mut bad: Option<Vec<usize>> = None;
        grid.for_each_cell(|idx, k| {
            let v = if idx == 0 { zero_mode } else { m(k) };
            if !v.is_finite() && bad.is_none() {
                bad = Some(k[..grid.dim()].to_vec());
            }
            values[idx] = Complex64::new(v, 0.0);
        });
        if let Some(k) = bad {
            return Err(Error::SymbolSingular(k));
        }
        Ok(MultiplierTable { grid, values })
    }

    /// Build from a complex symbol (used by the staggered constant-coefficient
    /// solves); Hermitian compatibility is the caller's responsibility and is
    /// verified a posteriori by the residue check.
    pub fn from_complex_fn(
        grid: TorusGrid,
        m: impl Fn(&[usize; 3]) -> Complex64,
        zero_mode: Complex64,
    ) -> Result<Self> {
        let mut values = vec![Complex64::default(); grid.cells()];
        let mut bad: Option<Vec<usize>> = None;
        grid.for_each_cell(|idx, k| {
            let v = if idx == 0 { zero_mode } else { m(k) };
            if !(v.re.is_finite() && v.im.is_finite()) && bad.is_none() {
                bad = Some(k[..grid.dim()].to_vec());
            }
            values[idx] = v;
        });
        if let Some(k) = bad {
            return Err(Error::SymbolSingular(k));
        }
        Ok(MultiplierTable { grid, values })
    }

    /// Inverse discrete Laplacian with mean-zero gauge.
    pub fn inverse_laplacian(grid: TorusGrid) -> Self {
        Self::from_real_fn(grid, |k| 1.0 / grid.laplace_symbol(k), 0.0)
            .expect("laplace symbol is positive off k=0")
    }

    /// Inverse of `1/T + |k|_h^2` (no gauge needed; the symbol is positive
    /// everywhere).
    pub fn massive_inverse(grid: TorusGrid, t: f64) -> Self {
        Self::from_real_fn(grid, |k| 1.0 / (1.0 / t + grid.laplace_symbol(k)), t)
            .expect("massive symbol is positive")
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Apply to a real field; fails if the output has a non-negligible
    /// imaginary residue (non-Hermitian-compatible symbol).
    pub fn apply(&self, u: &ScalarField) -> Result<ScalarField> {
        if u.grid() != &self.grid {
            return Err(Error::MismatchedGrids);
        }
        let mut buf: Vec<Complex64> = u
            .values()
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .collect();
        fft_all_axes(&self.grid, &mut buf, false);
        let vals = &self.values;
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            buf.par_iter_mut()
                .zip(vals.par_iter())
                .for_each(|(b, m)| *b *= m);
        }
        #[cfg(not(feature = "parallel"))]
        {
            buf.iter_mut().zip(vals.iter()).for_each(|(b, m)| *b *= m);
        }
        fft_all_axes(&self.grid, &mut buf, true);
        let scale = 1.0 / self.grid.cells() as f64;
        let mut out = vec![0.0; buf.len()];
        let mut im_sq = vec![0.0; buf.len()];
        parallel::par_apply(&mut out, |i, _| buf[i].re * scale);
        parallel::par_apply(&mut im_sq, |i, _| {
            let im = buf[i].im * scale;
            im * im
        });
        let re_norm = parallel::norm_sq(&out).sqrt();
        let im_norm = parallel::sum(&im_sq).sqrt();
        if im_norm > 1e-12 * re_norm.max(1e-300) && re_norm > 0.0 {
            return Err(Error::ComplexResidue(im_norm / re_norm));
        }
        Ok(ScalarField::from_vec(self.grid, out))
    }
}

/// Apply a caller-supplied real symbol `m(k)` to `u`; `zero_mode` is the
/// explicit k = 0 multiplier.
pub fn fourier_multiplier_apply(
    u: &ScalarField,
    m: impl Fn(&[usize; 3]) -> f64,
    zero_mode: f64,
) -> Result<ScalarField> {
    MultiplierTable::from_real_fn(*u.grid(), m, zero_mode)?.apply(u)
}

/// Result of a constant-coefficient Poisson solve.
#[derive(Debug, Clone)]
pub struct PoissonSolution {
    pub u: ScalarField,
    /// Mean of the right-hand side that was projected out before inversion.
    pub removed_mean: f64,
}

/// Solve `-lap_h u = rhs - mean(rhs)` with mean-zero `u`, exact up to FFT
/// rounding.
pub fn solve_poisson(rhs: &ScalarField) -> PoissonSolution {
    let grid = *rhs.grid();
    let removed_mean = rhs.mean();
    let table = MultiplierTable::inverse_laplacian(grid);
    let mut u = table.apply(rhs).expect("real symbol yields real output");
    // k=0 is annihilated by the table, which implements both the projection
    // and the mean-zero gauge; enforce the gauge exactly against rounding.
    u.remove_mean();
    PoissonSolution { u, removed_mean }
}

/// Convenience handle bundling a grid with its transforms.
#[derive(Debug, Clone, Copy)]
pub struct Spectral {
    grid: TorusGrid,
}

impl Spectral {
    pub fn new(grid: TorusGrid) -> Self {
        Spectral { grid }
    }

    pub fn forward(&self, u: &ScalarField) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = u
            .values()
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .collect();
        fft_all_axes(&self.grid, &mut buf, false);
        buf
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::make_grid;

    fn random_field(grid: TorusGrid, seed: u64) -> ScalarField {
        let mut state = seed;
        ScalarField::from_fn(grid, |_, _| {
            state = state.wrapping_add(0x9E3779B97F4A7C15);
            let mut z = state;
            z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
            (z ^ (z >> 31)) as f64 / u64::MAX as f64 - 0.5
        })
    }

    #[test]
    fn identity_multiplier_is_identity() {
        for d in [1usize, 2, 3] {
            let grid = make_grid(d, 16, 1.0).unwrap();
            let u = random_field(grid, 3 + d as u64);
            let v = fourier_multiplier_apply(&u, |_| 1.0, 1.0).unwrap();
            let err: f64 = u
                .values()
                .iter()
                .zip(v.values())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            assert!(err <= 1e-13 * u.norm_l2().max(1e-30));
        }
    }

    #[test]
    fn laplace_symbol_eigenrelation_on_single_mode() {
        let grid = make_grid(2, 32, 0.5).unwrap();
        let (k0, k1) = (3usize, 7usize);
        let u = ScalarField::from_fn(grid, |_, c| {
            (2.0 * std::f64::consts::PI * (k0 * c[0] + k1 * c[1]) as f64 / 32.0).cos()
        });
        let v = fourier_multiplier_apply(&u, |k| grid.laplace_symbol(k), 0.0).unwrap();
        let lam = grid.laplace_symbol(&[k0, k1, 0]);
        grid.for_each_cell(|idx, _| {
            assert!(
                (v.values()[idx] - lam * u.values()[idx]).abs() < 1e-12 * lam.max(1.0),
                "eigenrelation violated"
            );
        });
    }

    #[test]
    fn zero_mean_multiplier_annihilates_constants() {
        let grid = make_grid(2, 8, 1.0).unwrap();
        let u = ScalarField::from_fn(grid, |_, _| 1.0);
        let v = fourier_multiplier_apply(&u, |_| 1.0, 0.0).unwrap();
        assert!(v.values().iter().all(|x| x.abs() < 1e-14));
    }

    #[test]
    fn poisson_inverts_discrete_laplacian() {
        let grid = make_grid(2, 16, 1.0).unwrap();
        let mut rhs = random_field(grid, 11);
        rhs.remove_mean();
        let sol = solve_poisson(&rhs);
        // apply -lap_h back via differences
        let lap = crate::lattice::discrete_divergence(&crate::lattice::discrete_gradient(&sol.u));
        let err: f64 = lap
            .values()
            .iter()
            .zip(rhs.values())
            .map(|(a, b)| (-a - b) * (-a - b))
            .sum::<f64>()
            .sqrt();
        assert!(err <= 1e-12 * rhs.norm_l2());
        assert!(sol.u.mean().abs() < 1e-15);
    }

    #[test]
    fn poisson_on_single_mode_matches_symbol() {
        let grid = make_grid(3, 8, 1.0).unwrap();
        let k = [1usize, 3, 2];
        let u = ScalarField::from_fn(grid, |_, c| {
            (2.0 * std::f64::consts::PI * (k[0] * c[0] + k[1] * c[1] + k[2] * c[2]) as f64 / 8.0)
                .sin()
        });
        let sol = solve_poisson(&u);
        let lam = grid.laplace_symbol(&k);
        grid.for_each_cell(|idx, _| {
            assert!((sol.u.values()[idx] - u.values()[idx] / lam).abs() < 1e-12);
        });
    }

    #[test]
    fn roundtrip_error_is_tiny() {
        let grid = make_grid(2, 64, 1.0).unwrap();
        let u = random_field(grid, 5);
        let mut buf = Spectral::new(grid).forward(&u);
        fft_all_axes(&grid, &mut buf, true);
        let scale = 1.0 / grid.cells() as f64;
        let err: f64 = buf
            .iter()
            .zip(u.values())
            .map(|(c, v)| (c.re * scale - v).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(err <= 1e-13 * u.norm_l2());
    }

    #[test]
    fn singular_symbol_is_reported() {
        let grid = make_grid(2, 8, 1.0).unwrap();
        let u = random_field(grid, 1);
        let res = fourier_multiplier_apply(&u, |k| 1.0 / (k[0] as f64 - 1.0), 0.0);
        assert!(matches!(res, Err(Error::SymbolSingular(_))));
    }
}
