//! Pointwise Lipschitz transforms of Gaussian fields into admissible
//! isotropic coefficient fields.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::ScalarField;
use crate::parallel;

use super::coefficient::CoefficientField;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformShape {
    /// Clamp the input to [-1, 1].
    Clamp,
    /// tanh saturation.
    Tanh,
}

/// `a(x) = ((1+lambda)/2 + ((1-lambda)/2) s(contrast * omega(x))) Id` with a
/// saturating `s`, so every cell lies in `[lambda, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformSpec {
    pub lambda: f64,
    pub contrast: f64,
    pub shape: TransformShape,
}

impl TransformSpec {
    pub fn new(lambda: f64, contrast: f64, shape: TransformShape) -> Self {
        TransformSpec {
            lambda,
            contrast,
            shape,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(Error::InvalidSpec(format!(
                "lambda {} must lie in (0, 1]",
                self.lambda
            )));
        }
        if !(self.contrast >= 0.0) || !self.contrast.is_finite() {
            return Err(Error::InvalidSpec(format!(
                "contrast {} must be finite and >= 0",
                self.contrast
            )));
        }
        Ok(())
    }
}

pub fn lipschitz_transform(omega: &ScalarField, spec: &TransformSpec) -> Result<CoefficientField> {
    spec.validate()?;
    let mid = (1.0 + spec.lambda) / 2.0;
    let amp = (1.0 - spec.lambda) / 2.0;
    let contrast = spec.contrast;
    let shape = spec.shape;
    let mut alpha = omega.values().to_vec();
    parallel::par_apply(&mut alpha, |_, w| {
        let s = match shape {
            TransformShape::Clamp => (contrast * w).clamp(-1.0, 1.0),
            TransformShape::Tanh => (contrast * w).tanh(),
        };
        mid + amp * s
    });
    Ok(CoefficientField::isotropic(
        *omega.grid(),
        alpha,
        spec.lambda,
    ))
}
