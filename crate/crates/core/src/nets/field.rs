//! Per-pixel affine color transform driven by a 12-channel head tensor.
//!
//! Channels `0..9` hold the row-major 3x3 matrix, `9..12` the bias.

use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::guided::TransformField;
use crate::nn::Tensor;
use crate::scalar::Scalar;

pub const HEAD_CHANNELS: usize = 12;

fn check(x: &Tensor<impl Scalar>, head: &Tensor<impl Scalar>) -> Result<(usize, usize)> {
    let (n, c, h, w) = x.dims4()?;
    let (hn, hc, hh, hw) = head.dims4()?;
    if c != 3 || hc != HEAD_CHANNELS || (n, h, w) != (hn, hh, hw) {
        bail!(ShapeMismatch, "transform head {:?} does not fit image {:?}", head.shape(), x.shape());
    }
    Ok((n, h * w))
}

/// `y[c] = sum_j A[c][j] x[j] + B[c]` at every pixel.
pub fn apply_field<T: Scalar>(x: &Tensor<T>, head: &Tensor<T>) -> Result<Tensor<T>> {
    let (n, plane) = check(x, head)?;
    let mut y = Tensor::zeros(x.shape());
    let (xd, hd) = (x.data(), head.data());
    let yd = y.data_mut();
    for b in 0..n {
        let xs = &xd[b * 3 * plane..][..3 * plane];
        let hs = &hd[b * HEAD_CHANNELS * plane..][..HEAD_CHANNELS * plane];
        let ys = &mut yd[b * 3 * plane..][..3 * plane];
        for p in 0..plane {
            for c in 0..3 {
                let mut acc = hs[3 * c * plane + p] * xs[p];
                acc += hs[(3 * c + 1) * plane + p] * xs[plane + p];
                acc += hs[(3 * c + 2) * plane + p] * xs[2 * plane + p];
                ys[c * plane + p] = acc + hs[(9 + c) * plane + p];
            }
        }
    }
    Ok(y)
}

/// Gradients of [`apply_field`] with respect to the image and the head.
pub fn apply_field_backward<T: Scalar>(x: &Tensor<T>, head: &Tensor<T>, dy: &Tensor<T>) -> Result<(Tensor<T>, Tensor<T>)> {
    let (n, plane) = check(x, head)?;
    x.same_shape(dy)?;
    let mut dx = Tensor::zeros(x.shape());
    let mut dh = Tensor::zeros(head.shape());
    for b in 0..n {
        let xs = &x.data()[b * 3 * plane..][..3 * plane];
        let hs = &head.data()[b * HEAD_CHANNELS * plane..][..HEAD_CHANNELS * plane];
        let gs = &dy.data()[b * 3 * plane..][..3 * plane];
        let dxs = &mut dx.data_mut()[b * 3 * plane..][..3 * plane];
        for p in 0..plane {
            for c in 0..3 {
                let g = gs[c * plane + p];
                for j in 0..3 {
                    dxs[j * plane + p] += hs[(3 * c + j) * plane + p] * g;
                }
            }
        }
        let dhs = &mut dh.data_mut()[b * HEAD_CHANNELS * plane..][..HEAD_CHANNELS * plane];
        for p in 0..plane {
            for c in 0..3 {
                let g = gs[c * plane + p];
                for j in 0..3 {
                    dhs[(3 * c + j) * plane + p] = g * xs[j * plane + p];
                }
                dhs[(9 + c) * plane + p] = g;
            }
        }
    }
    Ok((dx, dh))
}

/// The head of batch item `index` as a [`TransformField`].
pub fn head_to_field<T: Scalar>(head: &Tensor<T>, index: usize) -> Result<TransformField> {
    let (n, c, h, w) = head.dims4()?;
    if c != HEAD_CHANNELS || index >= n {
        bail!(ShapeMismatch, "no transform field {index} in head {:?}", head.shape());
    }
    let plane = h * w;
    let hs = &head.data()[index * HEAD_CHANNELS * plane..][..HEAD_CHANNELS * plane];
    let mut a = Vec::with_capacity(9 * plane);
    let mut b = Vec::with_capacity(3 * plane);
    for p in 0..plane {
        a.extend((0..9).map(|k| hs[k * plane + p].as_f64() as f32));
        b.extend((9..12).map(|k| hs[k * plane + p].as_f64() as f32));
    }
    TransformField::new(h, w, a, b)
}
