//! Reverse-mode differentiable kernels — exactly the set the disparity
//! network needs, nothing more.
//!
//! There is no graph engine. Each operation is a forward function plus a
//! hand-written backward function; the network chains them explicitly and
//! the finite-difference checker in [`gradcheck`] is the safety net for
//! every backward. Forward activations are f32; scalar reductions
//! accumulate in f64 so the checker sees clean derivatives.
//!
//! Horizontal image boundaries wrap (panoramas are longitude-cyclic);
//! vertical boundaries zero-pad (poles are not adjacent). Every kernel is
//! deterministic: parallel parts write disjoint slices in a fixed order, so
//! results do not depend on the thread count.

pub mod adam;
pub mod gradcheck;
pub mod ops;
mod tensor;

pub use adam::{adam_step, AdamState};
pub use gradcheck::{grad_check, ScalarFn};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AutodiffError {
    #[error("shape mismatch in {what}: expected {expected:?}, got {got:?}")]
    ShapeMismatch {
        what: String,
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error("{0}")]
    BadArgument(String),
    #[error("non-finite value detected in {0}")]
    NotFinite(String),
}

pub(crate) fn shape_error(
    what: impl Into<String>,
    expected: &[usize],
    got: &[usize],
) -> AutodiffError {
    AutodiffError::ShapeMismatch {
        what: what.into(),
        expected: expected.to_vec(),
        got: got.to_vec(),
    }
}
