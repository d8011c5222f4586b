//! Boolean-model media: Poisson points dilated to balls of fixed radius.

use rand::Rng;
use rand_distr::Poisson;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::TorusGrid;

use super::coefficient::{matrix_bounds, CoefficientField};
use super::rng::{stream, Purpose};

/// Poisson inclusions: points with the given intensity (per unit volume),
/// each dilated to a ball of `radius`; cells covered by any ball take `a_in`,
/// the rest `a_out`. The matrices are row-major d x d and may be
/// non-symmetric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InclusionSpec {
    pub intensity: f64,
    pub radius: f64,
    pub a_in: Vec<f64>,
    pub a_out: Vec<f64>,
}

impl InclusionSpec {
    pub fn validate(&self, grid: &TorusGrid) -> Result<f64> {
        let d = grid.dim();
        if self.a_in.len() != d * d || self.a_out.len() != d * d {
            return Err(Error::InvalidSpec(format!(
                "inclusion matrices must be {d}x{d} row-major"
            )));
        }
        if !(self.intensity >= 0.0) || !self.intensity.is_finite() {
            return Err(Error::InvalidSpec("intensity must be finite and >= 0".into()));
        }
        if !(self.radius >= grid.spacing()) {
            return Err(Error::InvalidSpec(format!(
                "radius {} must be at least one lattice spacing {}",
                self.radius,
                grid.spacing()
            )));
        }
        let mut lambda = f64::INFINITY;
        for (name, m) in [("a_in", &self.a_in), ("a_out", &self.a_out)] {
            let (op, eig_min) = matrix_bounds(m, d);
            if op > 1.0 + 1e-12 {
                return Err(Error::InvalidSpec(format!(
                    "{name}: operator norm {op} exceeds 1"
                )));
            }
            if eig_min <= 0.0 {
                return Err(Error::InvalidSpec(format!(
                    "{name}: symmetric part not positive definite (min eig {eig_min})"
                )));
            }
            lambda = lambda.min(eig_min);
        }
        Ok(lambda)
    }
}

/// Sample the Boolean model; deterministic given `(spec, grid, seed)`.
pub fn sample_poisson_inclusions(
    spec: &InclusionSpec,
    grid: &TorusGrid,
    seed: u64,
) -> Result<CoefficientField> {
    let lambda = spec.validate(grid)?;
    let d = grid.dim();
    let volume = grid.period().powi(d as i32);
    let mut rng = stream(seed, 0, Purpose::Inclusions);
    let expected = spec.intensity * volume;
    let count = if expected > 0.0 {
        rng.sample(Poisson::new(expected).map_err(|e| Error::InvalidSpec(e.to_string()))?) as usize
    } else {
        0
    };
    let mut points = Vec::with_capacity(count);
    for _ in 0..count {
        let mut p = [0.0f64; 3];
        for q in p.iter_mut().take(d) {
            *q = rng.random::<f64>() * grid.period();
        }
        points.push(p);
    }

    let n = grid.cells();
    let mut covered = vec![false; n];
    // stamp each ball over the cells of its bounding box
    let h = grid.spacing();
    let l = grid.side() as i64;
    let reach = (spec.radius / h).ceil() as i64;
    for p in &points {
        let base: Vec<i64> = (0..d).map(|j| (p[j] / h).round() as i64).collect();
        let mut offs = vec![-reach; d];
        loop {
            let mut coords = [0usize; 3];
            for j in 0..d {
                coords[j] = (base[j] + offs[j]).rem_euclid(l) as usize;
            }
            if grid.torus_distance(&coords, &p[..d]) <= spec.radius {
                covered[grid.index(&coords[..d])] = true;
            }
            // advance the offset counter
            let mut j = 0;
            loop {
                if j == d {
                    break;
                }
                offs[j] += 1;
                if offs[j] <= reach {
                    break;
                }
                offs[j] = -reach;
                j += 1;
            }
            if j == d {
                break;
            }
        }
    }

    let mut entries = vec![0.0f64; n * d * d];
    for cell in 0..n {
        let src = if covered[cell] { &spec.a_in } else { &spec.a_out };
        entries[cell * d * d..(cell + 1) * d * d].copy_from_slice(src);
    }
    let symmetric = spec
        .a_in
        .iter()
        .zip(transpose(&spec.a_in, d))
        .all(|(a, b)| (a - b).abs() < 1e-15)
        && spec
            .a_out
            .iter()
            .zip(transpose(&spec.a_out, d))
            .all(|(a, b)| (a - b).abs() < 1e-15);
    Ok(CoefficientField::full(*grid, entries, lambda, symmetric))
}

fn transpose(m: &[f64], d: usize) -> Vec<f64> {
    let mut t = vec![0.0; d * d];
    for r in 0..d {
        for c in 0..d {
            t[c * d + r] = m[r * d + c];
        }
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::make_grid;

    fn spec_2d(intensity: f64, radius: f64) -> InclusionSpec {
        InclusionSpec {
            intensity,
            radius,
            a_in: vec![0.9, 0.05, -0.05, 0.9],
            a_out: vec![0.3, 0.0, 0.0, 0.3],
        }
    }

    #[test]
    fn zero_intensity_gives_matrix_everywhere() {
        let grid = make_grid(2, 16, 1.0).unwrap();
        let a = sample_poisson_inclusions(&spec_2d(0.0, 2.0), &grid, 5).unwrap();
        for cell in 0..grid.cells() {
            assert_eq!(a.entry(cell, 0, 0), 0.3);
            assert_eq!(a.entry(cell, 0, 1), 0.0);
        }
    }

    #[test]
    fn huge_radius_covers_everything() {
        let grid = make_grid(2, 16, 1.0).unwrap();
        // radius beyond the torus diameter: any point covers all cells
        let a = sample_poisson_inclusions(&spec_2d(1.0, 32.0), &grid, 5).unwrap();
        let mut any_in = false;
        for cell in 0..grid.cells() {
            if a.entry(cell, 0, 0) == 0.9 {
                any_in = true;
                assert_eq!(a.entry(cell, 0, 1), 0.05);
            }
        }
        // with intensity 1 on a 16x16 torus a point is essentially certain
        assert!(any_in);
        assert_eq!(a.entry(0, 0, 0), 0.9);
    }

    #[test]
    fn volume_fraction_matches_boolean_model() {
        // coverage probability of the Boolean model: 1 - exp(-rho pi R^2)
        let grid = make_grid(2, 64, 1.0).unwrap();
        let rho = 0.002;
        let radius = 4.0;
        let spec = spec_2d(rho, radius);
        let n_samples = 200;
        let fractions: Vec<f64> = (0..n_samples)
            .map(|s| {
                let a = sample_poisson_inclusions(&spec, &grid, 40 + s).unwrap();
                let covered = (0..grid.cells())
                    .filter(|&c| a.entry(c, 0, 0) == 0.9)
                    .count();
                covered as f64 / grid.cells() as f64
            })
            .collect();
        let mean = fractions.iter().sum::<f64>() / n_samples as f64;
        let var = fractions
            .iter()
            .map(|f| (f - mean) * (f - mean))
            .sum::<f64>()
            / (n_samples as f64 - 1.0);
        let stderr = (var / n_samples as f64).sqrt();
        let predicted = 1.0 - (-rho * std::f64::consts::PI * radius * radius).exp();
        assert!(
            (mean - predicted).abs() <= 3.0 * stderr.max(1e-4),
            "coverage {mean} vs predicted {predicted} (stderr {stderr})"
        );
    }

    #[test]
    fn determinism_and_validation() {
        let grid = make_grid(2, 16, 1.0).unwrap();
        let a = sample_poisson_inclusions(&spec_2d(0.05, 2.0), &grid, 9).unwrap();
        let b = sample_poisson_inclusions(&spec_2d(0.05, 2.0), &grid, 9).unwrap();
        for cell in 0..grid.cells() {
            assert_eq!(a.entry(cell, 0, 0), b.entry(cell, 0, 0));
        }
        let bad = InclusionSpec {
            intensity: 0.1,
            radius: 2.0,
            a_in: vec![1.5, 0.0, 0.0, 1.5],
            a_out: vec![0.3, 0.0, 0.0, 0.3],
        };
        assert!(sample_poisson_inclusions(&bad, &grid, 1).is_err());
    }
}
