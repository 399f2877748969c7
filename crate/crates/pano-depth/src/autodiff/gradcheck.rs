//! Central-difference gradient verification.
//!
//! Every backward implementation in this crate is validated against this
//! checker. The relative error per coordinate is
//! `|analytic − numeric| / max(1e-8, |analytic| + |numeric|)`; the checker
//! reports the maximum over all coordinates of all inputs.
//!
//! Check inputs are drawn away from the kinks of relu/maxpool/bilinear
//! sampling: at a kink the two-sided difference measures the average of
//! the one-sided slopes, which no subgradient convention can match.

use super::{AutodiffError, Tensor};

/// A scalar-valued differentiable function of several tensors.
pub trait ScalarFn {
    fn value(&self, inputs: &[Tensor]) -> Result<f64, AutodiffError>;
    /// Analytic gradient w.r.t. every input, same order and shapes.
    fn grad(&self, inputs: &[Tensor]) -> Result<Vec<Tensor>, AutodiffError>;
}

/// Max relative error between analytic gradients and central differences.
pub fn grad_check(
    f: &dyn ScalarFn,
    inputs: &[Tensor],
    eps: f64,
) -> Result<f64, AutodiffError> {
    let analytic = f.grad(inputs)?;
    if analytic.len() != inputs.len() {
        return Err(AutodiffError::BadArgument(format!(
            "grad returned {} tensors for {} inputs",
            analytic.len(),
            inputs.len()
        )));
    }
    let mut worst = 0.0f64;
    let mut work: Vec<Tensor> = inputs.to_vec();
    for (ti, input) in inputs.iter().enumerate() {
        if analytic[ti].shape() != input.shape() {
            return Err(AutodiffError::BadArgument(format!(
                "gradient {ti} has shape {:?}, input has {:?}",
                analytic[ti].shape(),
                input.shape()
            )));
        }
        for i in 0..input.numel() {
            let original = input.data()[i];
            work[ti].data_mut()[i] = original + eps as f32;
            let plus = f.value(&work)?;
            work[ti].data_mut()[i] = original - eps as f32;
            let minus = f.value(&work)?;
            work[ti].data_mut()[i] = original;
            // Use the actually-applied f32 perturbation, not the requested
            // eps, so rounding of x ± eps does not masquerade as backward
            // error.
            let applied = (original + eps as f32) as f64 - (original - eps as f32) as f64;
            let numeric = (plus - minus) / applied;
            let a = analytic[ti].data()[i] as f64;
            let err = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-8);
            if err > worst {
                worst = err;
            }
        }
    }
    Ok(worst)
}
