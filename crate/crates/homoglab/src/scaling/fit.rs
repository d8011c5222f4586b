//! Weighted least-squares power-law fits on log-log axes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub intercept: f64,
    pub exponent_stderr: f64,
}

/// Fit `value ~ C * scale^p` by weighted least squares on
/// `(log scale, log value)`; weights come from the stderr via the delta
/// method (`sigma_log = stderr / value`). Points with zero stderr get unit
/// weight and the slope error falls back to the residual estimate.
pub fn fit_power_law(series: &[(f64, f64, f64)]) -> Result<PowerLawFit> {
    if series.len() < 3 {
        return Err(Error::DegenerateSeries(format!(
            "need at least 3 points, got {}",
            series.len()
        )));
    }
    for &(s, v, _) in series {
        if !(v > 0.0) || !(s > 0.0) {
            return Err(Error::DegenerateSeries(format!(
                "non-positive point (scale {s}, value {v})"
            )));
        }
    }
    let known_variances = series.iter().all(|&(_, _, e)| e > 0.0);
    let pts: Vec<(f64, f64, f64)> = series
        .iter()
        .map(|&(s, v, e)| {
            let w = if known_variances {
                let sigma_log = e / v;
                1.0 / (sigma_log * sigma_log)
            } else {
                1.0
            };
            (s.ln(), v.ln(), w)
        })
        .collect();
    let wsum: f64 = pts.iter().map(|p| p.2).sum();
    let xbar: f64 = pts.iter().map(|p| p.0 * p.2).sum::<f64>() / wsum;
    let ybar: f64 = pts.iter().map(|p| p.1 * p.2).sum::<f64>() / wsum;
    let sxx: f64 = pts.iter().map(|p| p.2 * (p.0 - xbar).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::DegenerateSeries("all scales coincide".into()));
    }
    let sxy: f64 = pts
        .iter()
        .map(|p| p.2 * (p.0 - xbar) * (p.1 - ybar))
        .sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let exponent_stderr = if known_variances {
        (1.0 / sxx).sqrt()
    } else {
        // residual-based estimate
        let n = pts.len() as f64;
        let ss_res: f64 = pts
            .iter()
            .map(|p| {
                let r = p.1 - (intercept + slope * p.0);
                r * r
            })
            .sum();
        if n > 2.0 {
            (ss_res / (n - 2.0) / sxx).sqrt()
        } else {
            0.0
        }
    };
    Ok(PowerLawFit {
        exponent: slope,
        intercept,
        exponent_stderr,
    })
}
