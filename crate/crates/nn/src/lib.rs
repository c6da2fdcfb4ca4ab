//! Small dense and recurrent networks with hand-written backward passes.
//!
//! Gradients are stored in a value of the same type as the parameters
//! (`Mlp::zeros_like`, `Lstm::zeros_like`), so optimizers and the gradient
//! checker work on anything implementing [`Params`].

pub mod adam;
pub mod checkpoint;
pub mod gradcheck;
pub mod lstm;
pub mod mlp;
pub mod policy;
pub mod tensor;

use thiserror::Error;

pub use adam::{clip_global_norm, Adam, AdamConfig};
pub use checkpoint::Checkpoint;
pub use gradcheck::{grad_check, GradCheckReport};
pub use lstm::{Lstm, LstmState, LstmStepCache};
pub use mlp::{Mlp, MlpCache};
pub use tensor::Tensor;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch for {what}: expected {expected:?}, got {got:?}")]
    ShapeMismatch { what: String, expected: Vec<usize>, got: Vec<usize> },
    #[error("non-finite gradient in {0}")]
    NonFiniteGradient(String),
    #[error("bad checkpoint: {0}")]
    BadCheckpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// A collection of named parameter tensors with a fixed visiting order.
pub trait Params {
    fn tensors(&self) -> Vec<(String, &Tensor)>;
    fn tensors_mut(&mut self) -> Vec<&mut Tensor>;

    fn num_params(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    fn zero(&mut self) {
        for t in self.tensors_mut() {
            t.fill(0.0);
        }
    }

    fn flat(&self) -> Vec<f64> {
        self.tensors().iter().flat_map(|(_, t)| t.data().iter().copied()).collect()
    }

    fn set_flat(&mut self, values: &[f64]) {
        let mut k = 0;
        for t in self.tensors_mut() {
            let n = t.len();
            t.data_mut().copy_from_slice(&values[k..k + n]);
            k += n;
        }
        assert_eq!(k, values.len(), "flat parameter length");
    }

    /// `self += scale * other`, tensor by tensor.
    fn add_scaled(&mut self, other: &Self, scale: f64)
    where
        Self: Sized,
    {
        let src = other.tensors();
        for (dst, (_, s)) in self.tensors_mut().into_iter().zip(src) {
            for (d, v) in dst.data_mut().iter_mut().zip(s.data()) {
                *d += scale * v;
            }
        }
    }

    fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.data().iter().all(|v| v.is_finite()))
    }
}

/// Prefixes the tensor names of a sub-module.
pub fn prefixed<'a>(prefix: &str, inner: Vec<(String, &'a Tensor)>) -> Vec<(String, &'a Tensor)> {
    inner.into_iter().map(|(n, t)| (format!("{prefix}.{n}"), t)).collect()
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}
