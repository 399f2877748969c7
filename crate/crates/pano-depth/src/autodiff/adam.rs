//! Adam with bias correction, applied to a fixed-order parameter list.

use super::{AutodiffError, Tensor};

#[derive(Clone, Debug)]
pub struct AdamState {
    m: Vec<Vec<f32>>,
    v: Vec<Vec<f32>>,
    /// Completed steps.
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    /// Moment buffers shaped like `params`, defaults β1=0.9, β2=0.999, ε=1e-8.
    pub fn new(params: &[&Tensor]) -> AdamState {
        AdamState {
            m: params.iter().map(|p| vec![0.0; p.numel()]).collect(),
            v: params.iter().map(|p| vec![0.0; p.numel()]).collect(),
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// One Adam step over `params`, reading each tensor's gradient buffer.
/// Gradients must be present and finite; parameters are updated in place.
pub fn adam_step(
    params: &mut [&mut Tensor],
    state: &mut AdamState,
    lr: f64,
) -> Result<(), AutodiffError> {
    if params.len() != state.m.len() {
        return Err(AutodiffError::BadArgument(format!(
            "adam state tracks {} parameters, got {}",
            state.m.len(),
            params.len()
        )));
    }
    if !(lr > 0.0) && lr != 0.0 {
        return Err(AutodiffError::BadArgument(format!("bad learning rate {lr}")));
    }
    state.t += 1;
    let bc1 = 1.0 - state.beta1.powi(state.t as i32);
    let bc2 = 1.0 - state.beta2.powi(state.t as i32);
    let (b1, b2) = (state.beta1 as f32, state.beta2 as f32);
    let eps = state.epsilon as f32;
    let step = lr as f32;
    let (inv_bc1, inv_bc2) = ((1.0 / bc1) as f32, (1.0 / bc2) as f32);

    for (idx, param) in params.iter_mut().enumerate() {
        let grad = param.grad().ok_or_else(|| {
            AutodiffError::BadArgument(format!("parameter {idx} has no gradient"))
        })?;
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(AutodiffError::NotFinite(format!("gradient of parameter {idx}")));
        }
        if grad.len() != state.m[idx].len() {
            return Err(AutodiffError::BadArgument(format!(
                "parameter {idx} changed size under the optimizer"
            )));
        }
        let grad: Vec<f32> = grad.to_vec();
        let m = &mut state.m[idx];
        let v = &mut state.v[idx];
        for (i, value) in param.data_mut().iter_mut().enumerate() {
            let g = grad[i];
            m[i] = b1 * m[i] + (1.0 - b1) * g;
            v[i] = b2 * v[i] + (1.0 - b2) * g * g;
            let m_hat = m[i] * inv_bc1;
            let v_hat = v[i] * inv_bc2;
            *value -= step * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let mut p = Tensor::from_vec(&[2], vec![1.0, -2.0]).unwrap().with_grad();
        let mut state = AdamState::new(&[&p]);
        adam_step(&mut [&mut p], &mut state, 1e-3).unwrap();
        assert_eq!(p.data(), &[1.0, -2.0]);
        assert_eq!(state.t, 1);
    }

    #[test]
    fn first_step_magnitude_is_learning_rate() {
        // With a constant gradient g, the bias-corrected first step is
        // lr · g / (sqrt(g²) + ε) ≈ lr · sign(g).
        let mut p = Tensor::from_vec(&[1], vec![0.5]).unwrap().with_grad();
        p.accumulate_grad(&[3.0]).unwrap();
        let mut state = AdamState::new(&[&p]);
        adam_step(&mut [&mut p], &mut state, 1e-2).unwrap();
        let expected = 0.5 - 1e-2 * 3.0 / (3.0f32 + 1e-8);
        assert_relative_eq!(p.data()[0], expected, max_relative = 1e-5);
    }

    #[test]
    fn trajectories_are_bitwise_deterministic() {
        let run = || {
            let mut p = Tensor::from_vec(&[3], vec![0.3, -0.7, 1.1]).unwrap().with_grad();
            let mut state = AdamState::new(&[&p]);
            for step in 0..50 {
                p.zero_grad();
                let g: Vec<f32> = p.data().iter().map(|x| 2.0 * x + step as f32 * 0.01).collect();
                p.accumulate_grad(&g).unwrap();
                adam_step(&mut [&mut p], &mut state, 1e-2).unwrap();
            }
            p.data().to_vec()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn nan_gradient_is_rejected() {
        let mut p = Tensor::from_vec(&[1], vec![0.0]).unwrap().with_grad();
        p.accumulate_grad(&[f32::NAN]).unwrap();
        let mut state = AdamState::new(&[&p]);
        assert!(matches!(
            adam_step(&mut [&mut p], &mut state, 1e-3),
            Err(AutodiffError::NotFinite(_))
        ));
    }

    #[test]
    fn missing_gradient_is_rejected() {
        let mut p = Tensor::from_vec(&[1], vec![0.0]).unwrap();
        let mut state = AdamState::new(&[&p]);
        assert!(adam_step(&mut [&mut p], &mut state, 1e-3).is_err());
    }

    #[test]
    fn adam_minimizes_a_quadratic() {
        let mut p = Tensor::from_vec(&[2], vec![4.0, -3.0]).unwrap().with_grad();
        let mut state = AdamState::new(&[&p]);
        for _ in 0..2000 {
            p.zero_grad();
            let g: Vec<f32> = p.data().iter().map(|x| 2.0 * x).collect();
            p.accumulate_grad(&g).unwrap();
            adam_step(&mut [&mut p], &mut state, 5e-2).unwrap();
        }
        assert!(p.data().iter().all(|x| x.abs() < 1e-2), "{:?}", p.data());
    }
}
