use alloc::format;
use alloc::vec;

use crate::error::{bail, Result};
use crate::rng::Rng;
use crate::scalar::Scalar;

use super::init::xavier_uniform;
use super::params::{ParamId, ParamStore};
use super::tensor::Tensor;
use super::{cached, Layer};

/// Fully connected layer `y = W x + b` over the flattened per-sample input.
/// Output shape is `(N, out, 1, 1)`.
#[derive(Debug, Clone)]
pub struct Linear<T> {
    pub weight: ParamId,
    pub bias: ParamId,
    inputs: usize,
    outputs: usize,
    input: Option<Tensor<T>>,
}

impl<T: Scalar> Linear<T> {
    pub fn new(ps: &mut ParamStore<T>, name: &str, inputs: usize, outputs: usize, rng: &mut Rng) -> Self {
        let weight = ps.add(&format!("{name}.weight"), xavier_uniform(&[outputs, inputs], rng));
        let bias = ps.add(&format!("{name}.bias"), Tensor::zeros(&[outputs]));
        Self { weight, bias, inputs, outputs, input: None }
    }

    fn batch(&self, x: &Tensor<T>) -> Result<usize> {
        let n = *x.shape().first().unwrap_or(&0);
        if n == 0 || x.len() != n * self.inputs {
            bail!(ShapeMismatch, "fully connected layer expects {} features per sample, got shape {:?}", self.inputs, x.shape());
        }
        Ok(n)
    }
}

impl<T: Scalar> Layer<T> for Linear<T> {
    fn forward(&mut self, ps: &ParamStore<T>, x: &Tensor<T>) -> Result<Tensor<T>> {
        let n = self.batch(x)?;
        let mut out = vec![T::zero(); n * self.outputs];
        for chunk in out.chunks_exact_mut(self.outputs) {
            chunk.copy_from_slice(ps.value(self.bias));
        }
        // y (n x out) = x (n x in) W^T + b
        T::gemm(n, self.inputs, self.outputs, x.data(), false, ps.value(self.weight), true, T::one(), &mut out);
        self.input = Some(x.clone());
        Tensor::new(&[n, self.outputs, 1, 1], out)
    }

    fn backward(&mut self, ps: &mut ParamStore<T>, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let x = cached(&self.input, "fully_connected")?;
        let n = self.batch(x)?;
        if dy.len() != n * self.outputs {
            bail!(ShapeMismatch, "fully connected backward expects {} values, got {}", n * self.outputs, dy.len());
        }
        // dW (out x in) += dy^T x ; db += sum over batch ; dx = dy W
        T::gemm(self.outputs, n, self.inputs, dy.data(), true, x.data(), false, T::one(), ps.grad_mut(self.weight));
        let db = ps.grad_mut(self.bias);
        for row in dy.data().chunks_exact(self.outputs) {
            for (g, &v) in db.iter_mut().zip(row) {
                *g += v;
            }
        }
        let mut dx = vec![T::zero(); x.len()];
        T::gemm(n, self.outputs, self.inputs, dy.data(), false, ps.value(self.weight), false, T::zero(), &mut dx);
        Tensor::new(x.shape(), dx)
    }
}
