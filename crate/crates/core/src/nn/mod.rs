//! Minimal reverse-mode neural-network kernels over `ndarray` matrices.
//!
//! Every layer owns its parameters and the activations cached by the most
//! recent `forward`; `backward` must therefore follow its own `forward`
//! before the layer is reused. Gradient accumulation across calls is the
//! caller's contract (grads are summed until `zero_grad`).

mod attention;
mod conv;
mod linear;
mod norm;
mod ops;

pub use attention::MultiHeadAttention;
pub use conv::Conv1d;
pub use linear::Linear;
pub use norm::{BatchNorm1d, InstanceNorm1d, LayerNorm};
pub use ops::{Activation, Dropout, log_softmax, log_softmax_backward, softmax_rows};

use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Dense matrix used everywhere in the network (frames x features).
pub type Mat = Array2<f64>;

/// Forward-pass mode. Train enables dropout and batch statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Whether a tensor is a learnable parameter or a tracked buffer
/// (running statistics). Buffers are checkpointed but never counted
/// as parameters or touched by the optimizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TensorKind {
    Param,
    Buffer,
}

/// A named tensor plus its accumulated gradient.
#[derive(Debug, Clone)]
pub struct Param {
    pub value: Mat,
    pub grad: Option<Mat>,
}

impl Param {
    pub fn new(value: Mat) -> Self {
        Param { value, grad: None }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Param::new(Mat::zeros((rows, cols)))
    }

    /// Accumulate a gradient contribution.
    pub fn acc_grad(&mut self, g: &Mat) {
        match &mut self.grad {
            Some(grad) => *grad += g,
            None => self.grad = Some(g.clone()),
        }
    }

    pub fn zero_grad(&mut self) {
        self.grad = None;
    }

    pub fn numel(&self) -> usize {
        self.value.len()
    }
}

/// Callback-style traversal of a module's tensors. Implementors must visit
/// parameters and buffers in a stable, deterministic order.
pub trait Visit {
    fn visit(&mut self, prefix: &str, f: &mut dyn FnMut(String, TensorKind, &mut Param));
}

/// Deterministic RNG used for all weight initialization and dropout.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Uniform fan-in init, the conventional scheme for linear/conv weights.
pub fn uniform_fan_in(rows: usize, cols: usize, fan_in: usize, rng: &mut ChaCha8Rng) -> Mat {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    Mat::from_shape_fn((rows, cols), |_| rng.random_range(-bound..bound))
}

/// Sum of squared entries over all accumulated gradients.
pub fn grad_sq_norm(params: &mut [(String, &mut Param)]) -> f64 {
    params
        .iter()
        .filter_map(|(_, p)| p.grad.as_ref())
        .map(|g| g.iter().map(|v| v * v).sum::<f64>())
        .sum()
}
