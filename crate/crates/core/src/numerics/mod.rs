//! Dense tensors, a reverse-mode tape, seeded randomness and the momentum
//! optimizer.

mod gradcheck;
mod optim;
pub mod rng;
mod tape;
mod tensor;

pub use gradcheck::{grad_check, GradCheckReport};
pub use optim::sgd_momentum_step;
pub use tape::{softmax, Gradients, ParamId, Tape, Var};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),
    #[error("loss must be a scalar, got shape {0:?}")]
    NotScalar(Vec<usize>),
    #[error("tape already consumed by a backward pass")]
    TapeConsumed,
    #[error("keep probability must lie in (0, 1], got {0}")]
    KeepProbability(f64),
}

/// Inverted dropout on a plain tensor. See [`Tape::dropout`].
pub fn dropout<R: rand::Rng>(
    x: &Tensor,
    keep_p: f64,
    rng: &mut R,
    training: bool,
) -> Result<Tensor, NumericsError> {
    tape::check_keep_p(keep_p)?;
    if !training || keep_p == 1.0 {
        return Ok(x.clone());
    }
    let mask = tape::dropout_mask(x.shape(), keep_p, rng);
    let data = x.data().iter().zip(mask.data()).map(|(a, m)| a * m).collect();
    Tensor::new(x.shape().to_vec(), data)
}
