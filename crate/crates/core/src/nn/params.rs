use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::scalar::Scalar;

use super::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Named trainable tensors, in creation order.
#[derive(Debug, Clone, Default)]
pub struct ParamStore<T> {
    names: Vec<String>,
    tensors: Vec<Tensor<T>>,
}

impl<T: Scalar> ParamStore<T> {
    pub fn new() -> Self {
        Self { names: Vec::new(), tensors: Vec::new() }
    }

    /// Registers a tensor (a zeroed gradient is attached).
    pub fn add(&mut self, name: &str, value: Tensor<T>) -> ParamId {
        assert!(!self.names.iter().any(|n| n == name), "duplicate parameter name `{name}`");
        self.names.push(name.to_string());
        self.tensors.push(value.with_grad());
        ParamId(self.tensors.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    #[inline]
    pub fn get(&self, id: ParamId) -> &Tensor<T> {
        &self.tensors[id.0]
    }

    #[inline]
    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor<T> {
        &mut self.tensors[id.0]
    }

    #[inline]
    pub fn value(&self, id: ParamId) -> &[T] {
        self.tensors[id.0].data()
    }

    /// Gradient buffer of a registered parameter.
    #[inline]
    pub fn grad_mut(&mut self, id: ParamId) -> &mut [T] {
        self.tensors[id.0].grad_mut().expect("registered parameters carry gradients")
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.tensors.len()).map(ParamId)
    }

    /// Ids of parameters whose name starts with `prefix`.
    pub fn ids_with_prefix<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = ParamId> + 'a {
        self.ids().filter(move |&id| self.names[id.0].starts_with(prefix))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    pub fn zero_grad(&mut self) {
        self.tensors.iter_mut().for_each(Tensor::zero_grad);
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// Replaces the values of `name` (shape must match).
    pub fn assign(&mut self, name: &str, data: &[T]) -> Result<()> {
        let Some(id) = self.find(name) else {
            bail!(InvalidParameter, "unknown parameter `{name}`");
        };
        let t = &mut self.tensors[id.0];
        if t.len() != data.len() {
            bail!(ShapeMismatch, "parameter `{name}` has {} values, got {}", t.len(), data.len());
        }
        t.data_mut().copy_from_slice(data);
        Ok(())
    }
}
