use alloc::vec;

use crate::error::{bail, Result};
use crate::scalar::Scalar;

use super::params::ParamStore;
use super::tensor::Tensor;
use super::{cached, Layer};

/// Spatial mean per channel: `(N, C, H, W) -> (N, C, 1, 1)`.
#[derive(Debug, Clone, Default)]
pub struct GlobalAvgPool {
    input_shape: Option<[usize; 4]>,
}

impl GlobalAvgPool {
    pub fn new() -> Self {
        Self { input_shape: None }
    }
}

impl<T: Scalar> Layer<T> for GlobalAvgPool {
    fn forward(&mut self, _: &ParamStore<T>, x: &Tensor<T>) -> Result<Tensor<T>> {
        let (n, c, h, w) = x.dims4()?;
        let inv = T::one() / T::of((h * w) as f64);
        let means = x.data().chunks_exact(h * w).map(|p| p.iter().copied().sum::<T>() * inv).collect();
        self.input_shape = Some([n, c, h, w]);
        Tensor::new(&[n, c, 1, 1], means)
    }

    fn backward(&mut self, _: &mut ParamStore<T>, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let [n, c, h, w] = *cached(&self.input_shape, "global_avg_pool")?;
        if dy.shape() != [n, c, 1, 1] {
            bail!(ShapeMismatch, "global pool backward expects [{n}, {c}, 1, 1], got {:?}", dy.shape());
        }
        let inv = T::one() / T::of((h * w) as f64);
        let mut dx = vec![T::zero(); n * c * h * w];
        for (plane, &g) in dx.chunks_exact_mut(h * w).zip(dy.data()) {
            plane.iter_mut().for_each(|v| *v = g * inv);
        }
        Tensor::new(&[n, c, h, w], dx)
    }
}

/// 2x2 box average with stride 2.
#[derive(Debug, Clone, Default)]
pub struct AvgPool2 {
    input_shape: Option<[usize; 4]>,
}

impl AvgPool2 {
    pub fn new() -> Self {
        Self { input_shape: None }
    }
}

impl<T: Scalar> Layer<T> for AvgPool2 {
    fn forward(&mut self, _: &ParamStore<T>, x: &Tensor<T>) -> Result<Tensor<T>> {
        let (n, c, h, w) = x.dims4()?;
        if h % 2 != 0 || w % 2 != 0 {
            bail!(InvalidDimensions, "2x2 average pooling needs even sides, got {h}x{w}");
        }
        let (oh, ow) = (h / 2, w / 2);
        let quarter = T::of(0.25);
        let mut out = vec![T::zero(); n * c * oh * ow];
        for (src, dst) in x.data().chunks_exact(h * w).zip(out.chunks_exact_mut(oh * ow)) {
            for y in 0..oh {
                for x in 0..ow {
                    let i = 2 * y * w + 2 * x;
                    dst[y * ow + x] = (src[i] + src[i + 1] + src[i + w] + src[i + w + 1]) * quarter;
                }
            }
        }
        self.input_shape = Some([n, c, h, w]);
        Tensor::new(&[n, c, oh, ow], out)
    }

    fn backward(&mut self, _: &mut ParamStore<T>, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let [n, c, h, w] = *cached(&self.input_shape, "avg_pool2")?;
        let (oh, ow) = (h / 2, w / 2);
        if dy.shape() != [n, c, oh, ow] {
            bail!(ShapeMismatch, "avg pool backward expects [{n}, {c}, {oh}, {ow}], got {:?}", dy.shape());
        }
        let quarter = T::of(0.25);
        let mut dx = vec![T::zero(); n * c * h * w];
        for (g, dst) in dy.data().chunks_exact(oh * ow).zip(dx.chunks_exact_mut(h * w)) {
            for y in 0..h {
                for x in 0..w {
                    dst[y * w + x] = g[(y / 2) * ow + x / 2] * quarter;
                }
            }
        }
        Tensor::new(&[n, c, h, w], dx)
    }
}
