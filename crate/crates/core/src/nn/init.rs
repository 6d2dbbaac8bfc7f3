use crate::rng::{self, Rng};
use crate::scalar::Scalar;

use super::tensor::Tensor;

/// `(fan_in, fan_out)` of a weight shape: `(out, in)` for dense layers,
/// `(out, in, k, k)` for convolutions.
fn fans(shape: &[usize]) -> (usize, usize) {
    match shape {
        [n] => (*n, *n),
        [out, inp] => (*inp, *out),
        [out, inp, rest @ ..] => {
            let field: usize = rest.iter().product();
            (inp * field, out * field)
        }
        [] => (1, 1),
    }
}

pub(crate) fn xavier_uniform<T: Scalar>(shape: &[usize], rng: &mut Rng) -> Tensor<T> {
    let (fan_in, fan_out) = fans(shape);
    let bound = libm::sqrt(6.0 / (fan_in + fan_out) as f64);
    Tensor::from_fn(shape, |_| T::of(rng::uniform_in(rng, -bound, bound)))
}

/// Glorot/Xavier uniform tensor in `+-sqrt(6 / (fan_in + fan_out))`.
pub fn xavier_init<T: Scalar>(shape: &[usize], seed: u64) -> Tensor<T> {
    xavier_uniform(shape, &mut rng::stream(seed, rng::Stage::Init as u64))
}
