use alloc::vec::Vec;

use crate::error::Result;
use crate::scalar::Scalar;

use super::params::ParamStore;
use super::tensor::Tensor;
use super::{cached, Layer};

pub const LEAKY_SLOPE: f64 = 0.2;

#[inline]
pub fn leaky_relu<T: Scalar>(x: T, slope: T) -> T {
    if x >= T::zero() {
        x
    } else {
        slope * x
    }
}

/// `x` for `x >= 0`, `slope * x` otherwise. The derivative at exactly zero
/// is taken to be `slope`.
#[derive(Debug, Clone)]
pub struct LeakyRelu<T> {
    slope: T,
    input: Option<Tensor<T>>,
}

impl<T: Scalar> LeakyRelu<T> {
    pub fn new(slope: f64) -> Self {
        Self { slope: T::of(slope), input: None }
    }
}

impl<T: Scalar> Default for LeakyRelu<T> {
    fn default() -> Self {
        Self::new(LEAKY_SLOPE)
    }
}

impl<T: Scalar> Layer<T> for LeakyRelu<T> {
    fn forward(&mut self, _: &ParamStore<T>, x: &Tensor<T>) -> Result<Tensor<T>> {
        let y = Tensor::new(x.shape(), x.data().iter().map(|&v| leaky_relu(v, self.slope)).collect())?;
        self.input = Some(x.clone());
        Ok(y)
    }

    fn backward(&mut self, _: &mut ParamStore<T>, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let x = cached(&self.input, "leaky_relu")?;
        x.same_shape(dy)?;
        let dx: Vec<T> = x.data().iter().zip(dy.data()).map(|(&v, &g)| if v > T::zero() { g } else { self.slope * g }).collect();
        Tensor::new(x.shape(), dx)
    }
}

#[inline]
pub(crate) fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Sigmoid<T> {
    output: Option<Tensor<T>>,
}

impl<T: Scalar> Sigmoid<T> {
    pub fn new() -> Self {
        Self { output: None }
    }
}

impl<T: Scalar> Layer<T> for Sigmoid<T> {
    fn forward(&mut self, _: &ParamStore<T>, x: &Tensor<T>) -> Result<Tensor<T>> {
        let y = Tensor::new(x.shape(), x.data().iter().map(|&v| sigmoid(v)).collect())?;
        self.output = Some(y.clone());
        Ok(y)
    }

    fn backward(&mut self, _: &mut ParamStore<T>, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let y = cached(&self.output, "sigmoid")?;
        y.same_shape(dy)?;
        Tensor::new(y.shape(), y.data().iter().zip(dy.data()).map(|(&s, &g)| g * s * (T::one() - s)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn leaky_values_and_slopes() {
        let ps = ParamStore::<f64>::new();
        let mut ps_mut = ParamStore::<f64>::new();
        let mut l = LeakyRelu::default();
        let x = Tensor::new(&[4], alloc::vec![1.0, -1.0, 2.0, -2.0]).unwrap();
        assert_eq!(l.forward(&ps, &x).unwrap().data(), &[1.0, -0.2, 2.0, -0.4]);
        let g = l.backward(&mut ps_mut, &Tensor::full(&[4], 1.0)).unwrap();
        assert_eq!(g.data(), &[1.0, 0.2, 1.0, 0.2]);
        // exactly zero takes the negative branch's slope
        l.forward(&ps, &Tensor::zeros(&[1])).unwrap();
        assert_eq!(l.backward(&mut ps_mut, &Tensor::full(&[1], 1.0)).unwrap().data(), &[0.2]);
    }

    #[test]
    fn sigmoid_center_and_saturation() {
        assert_eq!(sigmoid(0.0f64), 0.5);
        for &x in &[-500.0f64, -50.0, 50.0, 500.0] {
            let s = sigmoid(x);
            assert!(s.is_finite() && (0.0..=1.0).contains(&s));
        }
        assert_eq!(sigmoid(500.0f32), 1.0);
    }
}
