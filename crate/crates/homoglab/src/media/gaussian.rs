//! Spectral synthesis of stationary Gaussian fields and empirical covariance
//! estimation.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{fft_all_axes, ScalarField, TorusGrid};
use crate::parallel;

use super::rng::{stream, Purpose};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumKind {
    /// `c_hat(k) = a |k|_h^{beta - d}` for `0 < beta < d`.
    PowerLaw,
    /// Spectrum of the covariance `c(x) = (1 + |x|^2)^{-1}` periodized on the
    /// torus (negative ripple truncated at zero); the `beta = 2` case.
    LorentzianCovariance,
    /// Flat spectrum (integrable correlations, `beta > d` surrogate).
    WhiteNoise,
}

/// Spectrum of the Gaussian input field. `amplitude` is the target variance
/// of the synthesized field (the normalization constant is chosen so the
/// lattice variance equals it).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSpec {
    pub kind: SpectrumKind,
    #[serde(default)]
    pub beta: f64,
    #[serde(default = "one")]
    pub amplitude: f64,
}

fn one() -> f64 {
    1.0
}

impl SpectrumSpec {
    pub fn power_law(beta: f64) -> Self {
        SpectrumSpec {
            kind: SpectrumKind::PowerLaw,
            beta,
            amplitude: 1.0,
        }
    }

    pub fn lorentzian() -> Self {
        SpectrumSpec {
            kind: SpectrumKind::LorentzianCovariance,
            beta: 2.0,
            amplitude: 1.0,
        }
    }

    pub fn white_noise() -> Self {
        SpectrumSpec {
            kind: SpectrumKind::WhiteNoise,
            beta: 0.0,
            amplitude: 1.0,
        }
    }

    /// Correlation decay exponent used by the scaling-law predictions: beta
    /// for the power law, 2 for the Lorentzian, and d+1 (any value > d gives
    /// the same branch) for white noise.
    pub fn effective_beta(&self, d: usize) -> f64 {
        match self.kind {
            SpectrumKind::PowerLaw => self.beta,
            SpectrumKind::LorentzianCovariance => 2.0,
            SpectrumKind::WhiteNoise => d as f64 + 1.0,
        }
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if !(self.amplitude >= 0.0) || !self.amplitude.is_finite() {
            return Err(Error::InvalidSpec(format!(
                "amplitude {} must be finite and >= 0",
                self.amplitude
            )));
        }
        if self.kind == SpectrumKind::PowerLaw && !(self.beta > 0.0 && self.beta < d as f64) {
            return Err(Error::InvalidSpec(format!(
                "power-law beta {} must lie in (0, d) = (0, {d})",
                self.beta
            )));
        }
        Ok(())
    }
}

/// Discrete spectrum table `c_hat(k)` over the full frequency lattice,
/// normalized so that `(1/L^d) sum c_hat = amplitude`; the k = 0 entry is
/// zero (mean-free fields).
pub fn spectrum_table(spec: &SpectrumSpec, grid: &TorusGrid) -> Result<Vec<f64>> {
    spec.validate(grid.dim())?;
    let d = grid.dim();
    let n = grid.cells();
    let mut table = vec![0.0f64; n];
    match spec.kind {
        SpectrumKind::PowerLaw => {
            let expo = (spec.beta - d as f64) / 2.0;
            grid.for_each_cell(|idx, k| {
                if idx != 0 {
                    table[idx] = grid.laplace_symbol(k).powf(expo);
                }
            });
        }
        SpectrumKind::WhiteNoise => {
            for v in table.iter_mut().skip(1) {
                *v = 1.0;
            }
        }
        SpectrumKind::LorentzianCovariance => {
            // FFT of the min-image sampled covariance; periodization can
            // produce slightly negative ripple which is truncated at zero.
            let mut buf = vec![Complex64::default(); n];
            grid.for_each_cell(|idx, c| {
                let mut r2 = 0.0;
                for j in 0..d {
                    let x = grid.min_image(c[j]);
                    r2 += x * x;
                }
                buf[idx] = Complex64::new(1.0 / (1.0 + r2), 0.0);
            });
            fft_all_axes(grid, &mut buf, false);
            let mut clipped = 0.0;
            let mut total = 0.0;
            for (idx, v) in buf.iter().enumerate() {
                total += v.re.abs();
                if idx == 0 {
                    continue;
                }
                if v.re < 0.0 {
                    clipped += -v.re;
                } else {
                    table[idx] = v.re;
                }
            }
            log::debug!(
                target: "homoglab::media",
                "lorentzian spectrum: clipped {:.3e} of {:.3e} total spectral mass",
                clipped,
                total
            );
        }
    }
    let sum = parallel::sum(&table);
    if sum <= 0.0 {
        return Err(Error::InvalidSpec("spectrum has no positive mass".into()));
    }
    let scale = spec.amplitude * n as f64 / sum;
    parallel::par_apply(&mut table, |_, v| v * scale);
    Ok(table)
}

/// Draw one realization: `omega = ifft(sqrt(c_hat) . fft(xi))` with `xi` a
/// real white-noise lattice field (its transform is Hermitian-symmetrized
/// complex white noise). Deterministic given `(spec, grid, seed)`.
pub fn sample_gaussian_field(
    spec: &SpectrumSpec,
    grid: &TorusGrid,
    seed: u64,
) -> Result<ScalarField> {
    let table = spectrum_table(spec, grid)?;
    let mut rng = stream(seed, 0, Purpose::GaussianField);
    let n = grid.cells();
    let mut buf: Vec<Complex64> = (0..n)
        .map(|_| Complex64::new(rng.sample::<f64, _>(StandardNormal), 0.0))
        .collect();
    fft_all_axes(grid, &mut buf, false);
    for (v, c) in buf.iter_mut().zip(&table) {
        *v *= c.sqrt();
    }
    fft_all_axes(grid, &mut buf, true);
    let scale = 1.0 / n as f64;
    let mut out = vec![0.0f64; n];
    parallel::par_apply(&mut out, |i, _| buf[i].re * scale);
    let mut field = ScalarField::from_vec(*grid, out);
    field.remove_mean();
    field.assert_finite()?;
    Ok(field)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovariancePoint {
    pub lag: Vec<i64>,
    pub estimate: f64,
    pub stderr: f64,
}

/// Unbiased empirical covariance with spatial and ensemble averaging; the
/// stderr is the sample standard error across realizations.
pub fn covariance_estimate(
    samples: &[ScalarField],
    lags: &[Vec<i64>],
) -> Result<Vec<CovariancePoint>> {
    if samples.len() < 2 {
        return Err(Error::InvalidSpec(
            "covariance estimation needs at least 2 samples".into(),
        ));
    }
    let grid = *samples[0].grid();
    if samples.iter().any(|s| s.grid() != &grid) {
        return Err(Error::MismatchedGrids);
    }
    let n = grid.cells();
    let l = grid.side() as i64;
    let mut out = Vec::with_capacity(lags.len());
    for lag in lags {
        if lag.len() != grid.dim() {
            return Err(Error::InvalidSpec(format!(
                "lag {lag:?} has wrong dimension"
            )));
        }
        // flat offset of the (wrapped) lag applied per cell
        let per_sample: Vec<f64> = samples
            .iter()
            .map(|s| {
                let v = s.values();
                let mut acc = 0.0;
                grid.for_each_cell(|idx, c| {
                    let mut shifted = [0usize; 3];
                    for j in 0..grid.dim() {
                        let x = (c[j] as i64 + lag[j]).rem_euclid(l) as usize;
                        shifted[j] = x;
                    }
                    acc += v[idx] * v[grid.index(&shifted[..grid.dim()])];
                });
                acc / n as f64
            })
            .collect();
        let mean = per_sample.iter().sum::<f64>() / per_sample.len() as f64;
        let var = per_sample
            .iter()
            .map(|x| (x - mean) * (x - mean))
            .sum::<f64>()
            / (per_sample.len() - 1) as f64;
        out.push(CovariancePoint {
            lag: lag.clone(),
            estimate: mean,
            stderr: (var / per_sample.len() as f64).sqrt(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::make_grid;

    #[test]
    fn sampling_is_bitwise_deterministic() {
        let grid = make_grid(2, 32, 1.0).unwrap();
        let spec = SpectrumSpec::power_law(1.0);
        let a = sample_gaussian_field(&spec, &grid, 42).unwrap();
        let b = sample_gaussian_field(&spec, &grid, 42).unwrap();
        assert_eq!(a.values(), b.values());
        let c = sample_gaussian_field(&spec, &grid, 43).unwrap();
        assert_ne!(a.values(), c.values());
    }

    #[test]
    fn power_law_requires_beta_in_range() {
        let grid = make_grid(2, 16, 1.0).unwrap();
        assert!(sample_gaussian_field(&SpectrumSpec::power_law(2.5), &grid, 1).is_err());
        assert!(sample_gaussian_field(&SpectrumSpec::power_law(-1.0), &grid, 1).is_err());
    }

    #[test]
    fn fields_have_zero_mean() {
        let grid = make_grid(2, 32, 1.0).unwrap();
        for kind in [
            SpectrumSpec::power_law(1.0),
            SpectrumSpec::white_noise(),
            SpectrumSpec::lorentzian(),
        ] {
            let f = sample_gaussian_field(&kind, &grid, 7).unwrap();
            assert!(f.mean().abs() < 1e-14);
        }
    }

    #[test]
    fn white_noise_is_uncorrelated_beyond_two_cells() {
        let grid = make_grid(2, 16, 1.0).unwrap();
        let spec = SpectrumSpec::white_noise();
        let n = 1000;
        let samples: Vec<ScalarField> = (0..n)
            .map(|s| sample_gaussian_field(&spec, &grid, 90_000 + s).unwrap())
            .collect();
        let pts =
            covariance_estimate(&samples, &[vec![0, 0], vec![2, 0], vec![0, 3], vec![2, 2]])
                .unwrap();
        // unit variance at lag zero
        assert!((pts[0].estimate - 1.0).abs() < 4.0 / (n as f64).sqrt());
        for p in &pts[1..] {
            assert!(
                p.estimate.abs() < 4.0 / (n as f64).sqrt(),
                "lag {:?}: {} too correlated",
                p.lag,
                p.estimate
            );
        }
    }

    #[test]
    fn zero_fields_give_exactly_zero_covariance() {
        let grid = make_grid(2, 8, 1.0).unwrap();
        let z = ScalarField::zeros(grid);
        let pts = covariance_estimate(&[z.clone(), z], &[vec![0, 0], vec![1, 0]]).unwrap();
        for p in pts {
            assert_eq!(p.estimate, 0.0);
            assert_eq!(p.stderr, 0.0);
        }
    }

    /// Monte-Carlo covariance of the beta = 1 power-law field against the
    /// target decay: dyadic ratio, radial symmetry and log-log slope.
    #[test]
    fn power_law_covariance_decay_matches_target() {
        let grid = make_grid(2, 256, 1.0).unwrap();
        let spec = SpectrumSpec::power_law(1.0);
        let n = 500u64;
        let samples: Vec<ScalarField> = crate::parallel::par_map_indexed(n as usize, |s| {
            sample_gaussian_field(&spec, &grid, 1_000 + s as u64).unwrap()
        });
        let lags: Vec<Vec<i64>> = vec![
            vec![4, 0],
            vec![8, 0],
            vec![16, 0],
            vec![32, 0],
            vec![0, 4],
            vec![0, 8],
            vec![0, 16],
            vec![0, 32],
        ];
        let pts = covariance_estimate(&samples, &lags).unwrap();
        // dyadic ratio c(x)/c(2x) ~ 2^beta = 2 within +-15%
        for (near, far) in [(0usize, 1usize), (1, 2), (2, 3)] {
            let ratio = pts[near].estimate / pts[far].estimate;
            assert!(
                (ratio - 2.0).abs() < 0.3,
                "dyadic covariance ratio {ratio} at |x|={}",
                lags[near][0]
            );
        }
        // radial symmetry: e1 vs e2 lags within 3 combined stderr
        for i in 0..4 {
            let (a, b) = (&pts[i], &pts[i + 4]);
            let tol = 3.0 * (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
            assert!(
                (a.estimate - b.estimate).abs() <= tol.max(1e-3),
                "anisotropy at |x|={}",
                lags[i][0]
            );
        }
        // log-log slope over |x| in [4, 32] equals -1 +- 0.2
        let series: Vec<(f64, f64, f64)> = (0..4)
            .map(|i| (lags[i][0] as f64, pts[i].estimate, pts[i].stderr))
            .collect();
        let fit = crate::scaling::fit_power_law(&series).unwrap();
        assert!(
            (fit.exponent + 1.0).abs() < 0.2,
            "covariance slope {} not -1",
            fit.exponent
        );
    }
}
