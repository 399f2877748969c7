//! Dense f32 tensor with an optional gradient buffer.

use super::AutodiffError;

/// N-dimensional float array, rank ≤ 4, NCHW layout for rank 4. Parameters
/// carry a same-shape gradient buffer; activations usually do not.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f32>,
    grad: Option<Vec<f32>>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Tensor {
        let n: usize = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; n],
            grad: None,
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f32>) -> Result<Tensor, AutodiffError> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(AutodiffError::BadArgument(format!(
                "shape {shape:?} implies {n} elements, data has {}",
                data.len()
            )));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
            grad: None,
        })
    }

    pub fn full(shape: &[usize], value: f32) -> Tensor {
        let n: usize = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; n],
            grad: None,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    /// (N, C, H, W) view of a rank-4 tensor.
    pub fn dims4(&self) -> Result<(usize, usize, usize, usize), AutodiffError> {
        match self.shape.as_slice() {
            &[n, c, h, w] => Ok((n, c, h, w)),
            other => Err(AutodiffError::BadArgument(format!(
                "expected rank-4 tensor, got shape {other:?}"
            ))),
        }
    }

    pub fn dims2(&self) -> Result<(usize, usize), AutodiffError> {
        match self.shape.as_slice() {
            &[a, b] => Ok((a, b)),
            other => Err(AutodiffError::BadArgument(format!(
                "expected rank-2 tensor, got shape {other:?}"
            ))),
        }
    }

    /// Whether this tensor accumulates gradients.
    pub fn requires_grad(&self) -> bool {
        self.grad.is_some()
    }

    /// Allocate (zeroed) gradient storage.
    pub fn with_grad(mut self) -> Tensor {
        if self.grad.is_none() {
            self.grad = Some(vec![0.0; self.data.len()]);
        }
        self
    }

    pub fn grad(&self) -> Option<&[f32]> {
        self.grad.as_deref()
    }

    pub fn zero_grad(&mut self) {
        if let Some(g) = &mut self.grad {
            g.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    /// Add `delta` into the gradient buffer (allocating it if absent).
    pub fn accumulate_grad(&mut self, delta: &[f32]) -> Result<(), AutodiffError> {
        if delta.len() != self.data.len() {
            return Err(AutodiffError::BadArgument(format!(
                "gradient length {} does not match tensor of {} elements",
                delta.len(),
                self.data.len()
            )));
        }
        let grad = self.grad.get_or_insert_with(|| vec![0.0; delta.len()]);
        for (g, d) in grad.iter_mut().zip(delta) {
            *g += *d;
        }
        Ok(())
    }

    /// NaN/Inf poisoning check for forward outputs.
    pub fn assert_finite(&self, what: &str) -> Result<(), AutodiffError> {
        if self.data.iter().any(|v| !v.is_finite()) {
            return Err(AutodiffError::NotFinite(what.to_string()));
        }
        Ok(())
    }
}
