//! 2-D convolution and transposed convolution via im2col + GEMM.

use alloc::format;
use alloc::vec;

use crate::error::{bail, Result};
use crate::rng::Rng;
use crate::scalar::Scalar;

use super::init::xavier_uniform;
use super::params::{ParamId, ParamStore};
use super::tensor::Tensor;
use super::{cached, Layer};

/// Sliding-window geometry of a convolution over a `channels x h x w` input.
#[derive(Debug, Clone, Copy)]
struct Window {
    channels: usize,
    h: usize,
    w: usize,
    k: usize,
    stride: usize,
    pad: usize,
    out_h: usize,
    out_w: usize,
}

impl Window {
    fn new(channels: usize, h: usize, w: usize, k: usize, stride: usize, pad: usize) -> Result<Self> {
        if h + 2 * pad < k || w + 2 * pad < k {
            bail!(InvalidDimensions, "{k}x{k} window does not fit a padded {h}x{w} input");
        }
        let out_h = (h + 2 * pad - k) / stride + 1;
        let out_w = (w + 2 * pad - k) / stride + 1;
        Ok(Self { channels, h, w, k, stride, pad, out_h, out_w })
    }

    fn rows(&self) -> usize {
        self.channels * self.k * self.k
    }

    fn cols(&self) -> usize {
        self.out_h * self.out_w
    }

    /// Unfolds `img` (`channels x h x w`) into a `rows x cols` matrix.
    fn im2col<T: Scalar>(&self, img: &[T], col: &mut [T]) {
        let cols = self.cols();
        for c in 0..self.channels {
            for ky in 0..self.k {
                for kx in 0..self.k {
                    let row = (c * self.k + ky) * self.k + kx;
                    let dst = &mut col[row * cols..(row + 1) * cols];
                    for oy in 0..self.out_h {
                        let iy = (oy * self.stride + ky) as isize - self.pad as isize;
                        let line = &mut dst[oy * self.out_w..(oy + 1) * self.out_w];
                        if iy < 0 || iy >= self.h as isize {
                            line.iter_mut().for_each(|v| *v = T::zero());
                            continue;
                        }
                        let src = &img[(c * self.h + iy as usize) * self.w..][..self.w];
                        for (ox, v) in line.iter_mut().enumerate() {
                            let ix = (ox * self.stride + kx) as isize - self.pad as isize;
                            *v = if ix < 0 || ix >= self.w as isize { T::zero() } else { src[ix as usize] };
                        }
                    }
                }
            }
        }
    }

    /// Adds the columns of `col` back onto `img`, the adjoint of `im2col`.
    fn col2im<T: Scalar>(&self, col: &[T], img: &mut [T]) {
        let cols = self.cols();
        for c in 0..self.channels {
            for ky in 0..self.k {
                for kx in 0..self.k {
                    let row = (c * self.k + ky) * self.k + kx;
                    let src = &col[row * cols..(row + 1) * cols];
                    for oy in 0..self.out_h {
                        let iy = (oy * self.stride + ky) as isize - self.pad as isize;
                        if iy < 0 || iy >= self.h as isize {
                            continue;
                        }
                        let dst = &mut img[(c * self.h + iy as usize) * self.w..][..self.w];
                        for ox in 0..self.out_w {
                            let ix = (ox * self.stride + kx) as isize - self.pad as isize;
                            if ix >= 0 && (ix as usize) < self.w {
                                dst[ix as usize] += src[oy * self.out_w + ox];
                            }
                        }
                    }
                }
            }
        }
    }
}

fn add_bias<T: Scalar>(out: &mut [T], bias: &[T], plane: usize) {
    for (chunk, &b) in out.chunks_exact_mut(plane).zip(bias) {
        chunk.iter_mut().for_each(|v| *v += b);
    }
}

fn accumulate_bias_grad<T: Scalar>(grad: &mut [T], dy: &[T], plane: usize) {
    for (g, chunk) in grad.iter_mut().zip(dy.chunks_exact(plane)) {
        *g += chunk.iter().copied().sum::<T>();
    }
}

/// Cross-correlation layer with weights `(out, in, k, k)` and a bias per
/// output channel.
#[derive(Debug, Clone)]
pub struct Conv2d<T> {
    pub weight: ParamId,
    pub bias: ParamId,
    in_channels: usize,
    out_channels: usize,
    kernel: usize,
    stride: usize,
    pad: usize,
    input: Option<Tensor<T>>,
}

impl<T: Scalar> Conv2d<T> {
    /// Xavier-uniform weights, zero bias.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        ps: &mut ParamStore<T>,
        name: &str,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
        rng: &mut Rng,
    ) -> Self {
        assert!(kernel > 0 && stride > 0, "conv kernel and stride must be positive");
        let shape = [out_channels, in_channels, kernel, kernel];
        let weight = ps.add(&format!("{name}.weight"), xavier_uniform(&shape, rng));
        let bias = ps.add(&format!("{name}.bias"), Tensor::zeros(&[out_channels]));
        Self { weight, bias, in_channels, out_channels, kernel, stride, pad, input: None }
    }

    /// "Same" 3x3 convolution.
    pub fn same3(ps: &mut ParamStore<T>, name: &str, cin: usize, cout: usize, rng: &mut Rng) -> Self {
        Self::new(ps, name, cin, cout, 3, 1, 1, rng)
    }

    /// 1x1 projection.
    pub fn pointwise(ps: &mut ParamStore<T>, name: &str, cin: usize, cout: usize, rng: &mut Rng) -> Self {
        Self::new(ps, name, cin, cout, 1, 1, 0, rng)
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    fn window(&self, x: &Tensor<T>) -> Result<(usize, Window)> {
        let (n, c, h, w) = x.dims4()?;
        if c != self.in_channels {
            bail!(ShapeMismatch, "conv expects {} input channels, got {c}", self.in_channels);
        }
        Ok((n, Window::new(c, h, w, self.kernel, self.stride, self.pad)?))
    }
}

impl<T: Scalar> Layer<T> for Conv2d<T> {
    fn forward(&mut self, ps: &ParamStore<T>, x: &Tensor<T>) -> Result<Tensor<T>> {
        let (n, win) = self.window(x)?;
        let (rows, cols) = (win.rows(), win.cols());
        let in_size = win.channels * win.h * win.w;
        let out_size = self.out_channels * cols;
        let weight = ps.value(self.weight);
        let bias = ps.value(self.bias);
        let mut out = vec![T::zero(); n * out_size];
        let mut col = vec![T::zero(); rows * cols];
        for (img, dst) in x.data().chunks_exact(in_size).zip(out.chunks_exact_mut(out_size)) {
            win.im2col(img, &mut col);
            T::gemm(self.out_channels, rows, cols, weight, false, &col, false, T::zero(), dst);
            add_bias(dst, bias, cols);
        }
        self.input = Some(x.clone());
        Tensor::new(&[n, self.out_channels, win.out_h, win.out_w], out)
    }

    fn backward(&mut self, ps: &mut ParamStore<T>, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let x = cached(&self.input, "conv2d")?;
        let (n, win) = self.window(x)?;
        let (rows, cols) = (win.rows(), win.cols());
        let expected = [n, self.out_channels, win.out_h, win.out_w];
        if dy.shape() != expected {
            bail!(ShapeMismatch, "conv2d backward expects {expected:?}, got {:?}", dy.shape());
        }
        let in_size = win.channels * win.h * win.w;
        let out_size = self.out_channels * cols;
        let mut dx = vec![T::zero(); x.len()];
        let mut col = vec![T::zero(); rows * cols];
        let mut dcol = vec![T::zero(); rows * cols];
        let weight = ps.value(self.weight).to_vec();
        for ((img, g), dimg) in x.data().chunks_exact(in_size).zip(dy.data().chunks_exact(out_size)).zip(dx.chunks_exact_mut(in_size)) {
            win.im2col(img, &mut col);
            T::gemm(self.out_channels, cols, rows, g, false, &col, true, T::one(), ps.grad_mut(self.weight));
            accumulate_bias_grad(ps.grad_mut(self.bias), g, cols);
            T::gemm(rows, self.out_channels, cols, &weight, true, g, false, T::zero(), &mut dcol);
            win.col2im(&dcol, dimg);
        }
        Tensor::new(x.shape(), dx)
    }
}

/// Transposed convolution with weights `(in, out, k, k)`; its forward pass
/// is the input-gradient of the [`Conv2d`] sharing the same weight tensor.
#[derive(Debug, Clone)]
pub struct ConvTranspose2d<T> {
    pub weight: ParamId,
    pub bias: ParamId,
    in_channels: usize,
    out_channels: usize,
    kernel: usize,
    stride: usize,
    pad: usize,
    input: Option<Tensor<T>>,
}

impl<T: Scalar> ConvTranspose2d<T> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        ps: &mut ParamStore<T>,
        name: &str,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
        rng: &mut Rng,
    ) -> Self {
        assert!(kernel > 0 && stride > 0, "deconv kernel and stride must be positive");
        let shape = [in_channels, out_channels, kernel, kernel];
        let weight = ps.add(&format!("{name}.weight"), xavier_uniform(&shape, rng));
        let bias = ps.add(&format!("{name}.bias"), Tensor::zeros(&[out_channels]));
        Self { weight, bias, in_channels, out_channels, kernel, stride, pad, input: None }
    }

    /// 4x4 kernel, stride 2, padding 1: exactly doubles the spatial size.
    pub fn up2(ps: &mut ParamStore<T>, name: &str, cin: usize, cout: usize, rng: &mut Rng) -> Self {
        Self::new(ps, name, cin, cout, 4, 2, 1, rng)
    }

    /// Geometry of the adjoint convolution mapping the output back to the input.
    fn window(&self, x: &Tensor<T>) -> Result<(usize, usize, usize, Window)> {
        let (n, c, h, w) = x.dims4()?;
        if c != self.in_channels {
            bail!(ShapeMismatch, "deconv expects {} input channels, got {c}", self.in_channels);
        }
        let out_h = ((h - 1) * self.stride + self.kernel).checked_sub(2 * self.pad);
        let out_w = ((w - 1) * self.stride + self.kernel).checked_sub(2 * self.pad);
        let (Some(oh), Some(ow)) = (out_h, out_w) else {
            bail!(InvalidDimensions, "deconv padding exceeds its output");
        };
        let win = Window::new(self.out_channels, oh, ow, self.kernel, self.stride, self.pad)?;
        if win.out_h != h || win.out_w != w {
            bail!(InvalidDimensions, "deconv geometry is not invertible for a {h}x{w} input");
        }
        Ok((n, oh, ow, win))
    }
}

impl<T: Scalar> Layer<T> for ConvTranspose2d<T> {
    fn forward(&mut self, ps: &ParamStore<T>, x: &Tensor<T>) -> Result<Tensor<T>> {
        let (n, oh, ow, win) = self.window(x)?;
        let (rows, cols) = (win.rows(), win.cols());
        let in_size = self.in_channels * cols;
        let out_size = self.out_channels * oh * ow;
        let weight = ps.value(self.weight);
        let bias = ps.value(self.bias);
        let mut out = vec![T::zero(); n * out_size];
        let mut col = vec![T::zero(); rows * cols];
        for (img, dst) in x.data().chunks_exact(in_size).zip(out.chunks_exact_mut(out_size)) {
            // col = W^T x, W viewed as (in) x (out * k * k)
            T::gemm(rows, self.in_channels, cols, weight, true, img, false, T::zero(), &mut col);
            win.col2im(&col, dst);
            add_bias(dst, bias, oh * ow);
        }
        self.input = Some(x.clone());
        Tensor::new(&[n, self.out_channels, oh, ow], out)
    }

    fn backward(&mut self, ps: &mut ParamStore<T>, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let x = cached(&self.input, "deconv2d")?;
        let (n, oh, ow, win) = self.window(x)?;
        let expected = [n, self.out_channels, oh, ow];
        if dy.shape() != expected {
            bail!(ShapeMismatch, "deconv backward expects {expected:?}, got {:?}", dy.shape());
        }
        let (rows, cols) = (win.rows(), win.cols());
        let in_size = self.in_channels * cols;
        let out_size = self.out_channels * oh * ow;
        let weight = ps.value(self.weight).to_vec();
        let mut dx = vec![T::zero(); x.len()];
        let mut col = vec![T::zero(); rows * cols];
        for ((img, g), dimg) in x.data().chunks_exact(in_size).zip(dy.data().chunks_exact(out_size)).zip(dx.chunks_exact_mut(in_size)) {
            win.im2col(g, &mut col);
            accumulate_bias_grad(ps.grad_mut(self.bias), g, oh * ow);
            // dW += x col^T ; dx = W col
            T::gemm(self.in_channels, cols, rows, img, false, &col, true, T::one(), ps.grad_mut(self.weight));
            T::gemm(self.in_channels, rows, cols, &weight, false, &col, false, T::zero(), dimg);
        }
        Tensor::new(x.shape(), dx)
    }
}
