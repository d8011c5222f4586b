//! Piecewise scaling laws for average decay and corrector growth.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Decay factor for spatial averages of the corrector gradient:
/// `r^beta` below `beta = d`, `r^d / log r` at criticality, `r^d` above.
pub fn pi_star(r: f64, beta: f64, d: usize) -> Result<f64> {
    let d_f = d as f64;
    if beta == d_f {
        if r < 2.0 {
            return Err(Error::DomainError(format!(
                "pi_star critical branch needs r >= 2, got {r}"
            )));
        }
        Ok(r.powf(d_f) / r.ln())
    } else if beta < d_f {
        Ok(r.powf(beta))
    } else {
        Ok(r.powf(d_f))
    }
}

/// Corrector growth law with its two criticalities (`beta = 2` from the
/// randomness, `d = 2` from the Helmholtz projection).
pub fn mu_star(r: f64, beta: f64, d: usize) -> f64 {
    mu_alpha_d(r, beta, d)
}

/// Explicit growth law in the decay exponent `alpha`; coincides with
/// [`mu_star`] at `alpha = beta`.
pub fn mu_alpha_d(r: f64, alpha: f64, d: usize) -> f64 {
    let two = 2.0f64;
    if alpha < two {
        (r + 1.0).powf(1.0 - alpha / 2.0)
    } else if alpha == two && d == 2 {
        (r + 2.0).ln()
    } else if (alpha == two && d > 2) || (alpha > two && d == 2) {
        (r + 2.0).ln().sqrt()
    } else {
        1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ScalingLaw {
    PiStar { beta: f64, d: usize },
    MuStar { beta: f64, d: usize },
    MuAlphaD { alpha: f64, d: usize },
}

impl ScalingLaw {
    pub fn evaluate(&self, r: f64) -> Result<f64> {
        match *self {
            ScalingLaw::PiStar { beta, d } => pi_star(r, beta, d),
            ScalingLaw::MuStar { beta, d } => Ok(mu_star(r, beta, d)),
            ScalingLaw::MuAlphaD { alpha, d } => Ok(mu_alpha_d(r, alpha, d)),
        }
    }
}
