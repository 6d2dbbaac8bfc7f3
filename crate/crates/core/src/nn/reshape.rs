//! Value-preserving rearrangements: sub-pixel shuffle and channel concat.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::scalar::Scalar;

use super::params::ParamStore;
use super::tensor::Tensor;
use super::Layer;

/// `(N, C r^2, H, W) -> (N, C, H r, W r)` with
/// `out[n, c, h r + i, w r + j] = in[n, c r^2 + i r + j, h, w]`.
pub fn pixel_shuffle<T: Scalar>(x: &Tensor<T>, r: usize) -> Result<Tensor<T>> {
    let (n, c, h, w) = x.dims4()?;
    if r == 0 || c % (r * r) != 0 {
        bail!(InvalidDimensions, "pixel shuffle by {r} needs channels divisible by {}, got {c}", r * r);
    }
    let oc = c / (r * r);
    let (oh, ow) = (h * r, w * r);
    let src = x.data();
    let mut out = vec![T::zero(); x.len()];
    for b in 0..n {
        for co in 0..oc {
            for i in 0..r {
                for j in 0..r {
                    let ci = co * r * r + i * r + j;
                    let plane = &src[(b * c + ci) * h * w..][..h * w];
                    for y in 0..h {
                        let row = &mut out[((b * oc + co) * oh + y * r + i) * ow..][..ow];
                        for xx in 0..w {
                            row[xx * r + j] = plane[y * w + xx];
                        }
                    }
                }
            }
        }
    }
    Tensor::new(&[n, oc, oh, ow], out)
}

/// Inverse of [`pixel_shuffle`].
pub fn pixel_unshuffle<T: Scalar>(x: &Tensor<T>, r: usize) -> Result<Tensor<T>> {
    let (n, c, h, w) = x.dims4()?;
    if r == 0 || h % r != 0 || w % r != 0 {
        bail!(InvalidDimensions, "pixel unshuffle by {r} needs sides divisible by {r}, got {h}x{w}");
    }
    let (ih, iw) = (h / r, w / r);
    let ic = c * r * r;
    let src = x.data();
    let mut out = vec![T::zero(); x.len()];
    for b in 0..n {
        for co in 0..c {
            for i in 0..r {
                for j in 0..r {
                    let ci = co * r * r + i * r + j;
                    let plane = &mut out[(b * ic + ci) * ih * iw..][..ih * iw];
                    for y in 0..ih {
                        let row = &src[((b * c + co) * h + y * r + i) * w..][..w];
                        for xx in 0..iw {
                            plane[y * iw + xx] = row[xx * r + j];
                        }
                    }
                }
            }
        }
    }
    Tensor::new(&[n, ic, ih, iw], out)
}

#[derive(Debug, Clone, Copy)]
pub struct PixelShuffle {
    pub factor: usize,
}

impl<T: Scalar> Layer<T> for PixelShuffle {
    fn forward(&mut self, _: &ParamStore<T>, x: &Tensor<T>) -> Result<Tensor<T>> {
        pixel_shuffle(x, self.factor)
    }

    fn backward(&mut self, _: &mut ParamStore<T>, dy: &Tensor<T>) -> Result<Tensor<T>> {
        pixel_unshuffle(dy, self.factor)
    }
}

/// Stacks tensors along the channel axis in argument order.
pub fn concat_channels<T: Scalar>(xs: &[&Tensor<T>]) -> Result<Tensor<T>> {
    let Some(first) = xs.first() else {
        bail!(InvalidParameter, "nothing to concatenate");
    };
    let (n, _, h, w) = first.dims4()?;
    let mut channels = Vec::with_capacity(xs.len());
    for x in xs {
        let (xn, xc, xh, xw) = x.dims4()?;
        if (xn, xh, xw) != (n, h, w) {
            bail!(ShapeMismatch, "cannot concatenate {:?} with {:?}", first.shape(), x.shape());
        }
        channels.push(xc);
    }
    let total: usize = channels.iter().sum();
    let plane = h * w;
    let mut out = Vec::with_capacity(n * total * plane);
    for b in 0..n {
        for (x, &c) in xs.iter().zip(&channels) {
            out.extend_from_slice(&x.data()[b * c * plane..(b + 1) * c * plane]);
        }
    }
    Tensor::new(&[n, total, h, w], out)
}

/// Splits a gradient produced for [`concat_channels`] back into its parts.
pub fn split_channels<T: Scalar>(x: &Tensor<T>, channels: &[usize]) -> Result<Vec<Tensor<T>>> {
    let (n, c, h, w) = x.dims4()?;
    if channels.iter().sum::<usize>() != c {
        bail!(ShapeMismatch, "channel split {channels:?} does not add up to {c}");
    }
    let plane = h * w;
    let mut parts: Vec<Vec<T>> = channels.iter().map(|&k| Vec::with_capacity(n * k * plane)).collect();
    for b in 0..n {
        let mut offset = b * c * plane;
        for (part, &k) in parts.iter_mut().zip(channels) {
            part.extend_from_slice(&x.data()[offset..offset + k * plane]);
            offset += k * plane;
        }
    }
    parts.into_iter().zip(channels).map(|(d, &k)| Tensor::new(&[n, k, h, w], d)).collect()
}
