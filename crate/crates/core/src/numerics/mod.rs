//! Tensor container and hand-written forward/backward kernels.

mod conv;
mod dense;
pub(crate) mod gemm;
pub mod gradcheck;
mod pool;
mod sgd;
mod tensor;

pub use conv::{conv2d_backward, conv2d_forward, ConvGrads, Padding};
pub(crate) use conv::{conv2d_backward_cols, conv2d_forward_cols};
pub use dense::{
    dropout, dropout_backward, leaky_relu, leaky_relu_backward, linear, linear_backward, softmax,
    softmax_cross_entropy, DropoutMask, LinearGrads, SoftmaxXent, DEFAULT_LEAKY_SLOPE,
};
pub use pool::{global_maxpool, maxpool2x2, pool_backward, Pooled};
pub use sgd::sgd_step;
pub use tensor::{GradPair, Tensor};
