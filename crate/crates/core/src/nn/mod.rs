//! Minimal CNN engine with hand-written backward passes.
//!
//! Activations are `NCHW` [`Tensor`]s. Trainable tensors live in a
//! [`ParamStore`]; layers keep [`ParamId`] handles into it, cache whatever
//! their backward pass needs during `forward`, and accumulate parameter
//! gradients into the store during `backward`.

mod activation;
mod adam;
mod blocks;
mod conv;
pub mod gradcheck;
mod init;
mod linear;
mod loss;
mod params;
mod pool;
mod reshape;
mod tensor;

pub use activation::{leaky_relu, LeakyRelu, Sigmoid, LEAKY_SLOPE};
pub use adam::{Adam, AdamConfig};
pub use blocks::{ChannelAttention, DcaBlock, DenseBlock};
pub use conv::{Conv2d, ConvTranspose2d};
pub use init::xavier_init;
pub use linear::Linear;
pub use loss::l1_loss;
pub use params::{ParamId, ParamStore};
pub use pool::{AvgPool2, GlobalAvgPool};
pub use reshape::{concat_channels, pixel_shuffle, pixel_unshuffle, split_channels, PixelShuffle};
pub use tensor::Tensor;

use crate::error::Result;
use crate::scalar::Scalar;

/// A differentiable single-input, single-output operation.
pub trait Layer<T: Scalar> {
    fn forward(&mut self, ps: &ParamStore<T>, x: &Tensor<T>) -> Result<Tensor<T>>;

    /// Gradient with respect to the last forward input, given the gradient
    /// of the output. Parameter gradients are added into `ps`.
    fn backward(&mut self, ps: &mut ParamStore<T>, dy: &Tensor<T>) -> Result<Tensor<T>>;
}

pub(crate) fn cached<'a, T>(cache: &'a Option<T>, layer: &str) -> Result<&'a T> {
    cache.as_ref().ok_or_else(|| crate::Error::InvalidParameter(alloc::format!("{layer}: backward called before forward")))
}
