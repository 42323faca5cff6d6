//! Forward and backward passes for every layer type.

mod activation;
mod conv;
mod gemm;
mod linear;
mod loss;
mod pool;

pub use activation::{relu, relu_backward};
pub use conv::{conv3d_backward, conv3d_forward, conv3d_param_grads, conv3d_transpose, ConvGrads, ConvKernelSpec};
pub use linear::{linear_backward, linear_forward, LinearGrads};
pub use loss::{softmax, softmax_xent, SoftmaxXent};
pub use pool::{maxpool3d_backward, maxpool3d_forward, PoolSpec, PoolSwitches};
