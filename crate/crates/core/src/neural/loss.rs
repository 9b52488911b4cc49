// SPDX-License-Identifier: Apache-2.0

use crate::error::{Error, Result};

/// Prediction clamp for the log terms.
pub const PREDICTION_EPS: f64 = 1e-7;

/// Binary cross-entropy summed over examples, with `dL/dŷ`.
///
/// Predictions are clamped into `[ε, 1-ε]`; the gradient is that of the
/// clamped function (zero where the clamp is active).
pub fn bce_loss(predictions: &[f64], labels: &[f64]) -> Result<(f64, Vec<f64>)> {
    if predictions.len() != labels.len() {
        return Err(Error::DimMismatch {
            expected: predictions.len(),
            got: labels.len(),
        });
    }
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(predictions.len());
    for (&p, &y) in predictions.iter().zip(labels) {
        if y != 0.0 && y != 1.0 {
            return Err(Error::InvalidArgument(format!("label {y} is not 0 or 1")));
        }
        let clamped = p.clamp(PREDICTION_EPS, 1.0 - PREDICTION_EPS);
        loss -= y * clamped.ln() + (1.0 - y) * (1.0 - clamped).ln();
        grad.push(if clamped != p {
            0.0
        } else {
            -y / p + (1.0 - y) / (1.0 - p)
        });
    }
    Ok((loss, grad))
}

/// `dL/dz` for `ŷ = σ(z)` under unclamped cross-entropy: `ŷ - y`.
pub fn bce_logit_grad(prediction: f64, label: f64) -> f64 {
    prediction - label
}
