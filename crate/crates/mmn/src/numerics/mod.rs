//! Deterministic tensor math with reverse-mode autodiff.
//!
//! Exactly the operations the summarizer needs: dilated 1-D convolutions
//! (centered and causal), layer/weight normalization, the gated tanh
//! activation pieces, attention primitives, max-over-time pooling,
//! label-smoothed cross-entropy, Adam and global-norm clipping. Training
//! runs in `f32`; gradient checking switches the whole stack to `f64`.

pub mod gradcheck;
pub mod kernels;
pub mod optim;
pub mod scalar;
pub mod tape;
pub mod tensor;

pub use gradcheck::{grad_check, random_data};
pub use kernels::Padding;
pub use optim::{clip_gradients, AdamState};
pub use scalar::Scalar;
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;

/// Softmax over a score vector. `-inf` entries are mask sentinels and map to
/// probability zero; errors if every position is masked.
pub fn softmax<T: Scalar>(scores: &[T]) -> Result<Vec<T>, SoftmaxError> {
    if !scores.iter().any(|x| x.is_finite()) {
        return Err(SoftmaxError::AllMasked);
    }
    let mut out = scores.to_vec();
    kernels::softmax_in_place(&mut out);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SoftmaxError {
    AllMasked,
}

impl std::fmt::Display for SoftmaxError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SoftmaxError::AllMasked => write!(f, "softmax: every position is masked"),
        }
    }
}

impl std::error::Error for SoftmaxError {}
