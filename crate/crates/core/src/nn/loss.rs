use crate::error::Result;
use crate::scalar::Scalar;

use super::tensor::Tensor;

/// Mean absolute error and its subgradient `sign(pred - target) / count`
/// (zero at ties).
pub fn l1_loss<T: Scalar>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<(T, Tensor<T>)> {
    pred.same_shape(target)?;
    let inv = T::one() / T::of(pred.len() as f64);
    let mut sum = T::zero();
    let grad = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(&p, &t)| {
            let d = p - t;
            sum += d.abs();
            if d > T::zero() {
                inv
            } else if d < T::zero() {
                -inv
            } else {
                T::zero()
            }
        })
        .collect();
    Ok((sum * inv, Tensor::new(pred.shape(), grad)?))
}
