//! Color-correction algebra: the classical guided filter, pixel-wise and
//! global affine color transforms, and the trainable-guided-filter assembly.
//!
//! Roles follow the color-correction use: the *source* is the restored
//! linear image being corrected and the *guide* is the reference color image
//! it should match. In every window the filter fits `guide ~ a * src + b`
//! by ridge-regularized least squares, averages the per-window `(a, b)` of
//! all windows covering a pixel, and emits `a * src + b`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::image::{LinearImage, Plane};
use crate::rng::{self, Stage};

pub const DEFAULT_RADIUS: usize = 8;
pub const DEFAULT_EPS: f64 = 1e-4;

/// Summed-area table with one row and column of zero padding.
struct Integral {
    width: usize,
    sums: Vec<f64>,
}

impl Integral {
    fn new(height: usize, width: usize, value: impl Fn(usize) -> f64) -> Self {
        let stride = width + 1;
        let mut sums = vec![0.0f64; (height + 1) * stride];
        for y in 0..height {
            let mut row = 0.0;
            for x in 0..width {
                row += value(y * width + x);
                sums[(y + 1) * stride + x + 1] = sums[y * stride + x + 1] + row;
            }
        }
        Self { width, sums }
    }

    /// Sum over rows `y0..y1` and columns `x0..x1`.
    #[inline]
    fn sum(&self, y0: usize, y1: usize, x0: usize, x1: usize) -> f64 {
        let s = self.width + 1;
        self.sums[y1 * s + x1] - self.sums[y0 * s + x1] - self.sums[y1 * s + x0] + self.sums[y0 * s + x0]
    }
}

/// Window `[c - r, c + r]` clipped to `0..n`, as a half-open range.
#[inline]
fn clipped(c: usize, r: usize, n: usize) -> (usize, usize) {
    (c.saturating_sub(r), (c + r + 1).min(n))
}

/// Mean over the clipped `(2r+1)^2` window around every pixel.
fn box_mean(height: usize, width: usize, radius: usize, values: &[f64]) -> Vec<f64> {
    let table = Integral::new(height, width, |i| values[i]);
    let mut out = Vec::with_capacity(height * width);
    for y in 0..height {
        let (y0, y1) = clipped(y, radius, height);
        for x in 0..width {
            let (x0, x1) = clipped(x, radius, width);
            out.push(table.sum(y0, y1, x0, x1) / ((y1 - y0) * (x1 - x0)) as f64);
        }
    }
    out
}

/// Per-pixel coefficients and result of one guided-filter pass.
#[derive(Debug, Clone, PartialEq)]
pub struct GuidedOutput {
    pub a: Plane,
    pub b: Plane,
    pub output: Plane,
}

pub fn guided_filter(guide: &Plane, src: &Plane, radius: usize, eps: f64) -> Result<GuidedOutput> {
    if radius < 1 {
        bail!(InvalidParameter, "guided filter radius must be at least 1");
    }
    if !eps.is_finite() || eps <= 0.0 {
        bail!(InvalidParameter, "guided filter eps must be positive, got {eps}");
    }
    if guide.height != src.height || guide.width != src.width {
        bail!(
            ShapeMismatch,
            "guide is {}x{} but source is {}x{}",
            guide.width,
            guide.height,
            src.width,
            src.height
        );
    }
    let (h, w) = (src.height, src.width);
    let s: Vec<f64> = src.data.iter().map(|&v| v as f64).collect();
    let g: Vec<f64> = guide.data.iter().map(|&v| v as f64).collect();
    let ss: Vec<f64> = s.iter().map(|v| v * v).collect();
    let sg: Vec<f64> = s.iter().zip(&g).map(|(a, b)| a * b).collect();

    let mean_s = box_mean(h, w, radius, &s);
    let mean_g = box_mean(h, w, radius, &g);
    let mean_ss = box_mean(h, w, radius, &ss);
    let mean_sg = box_mean(h, w, radius, &sg);

    let mut a_win = Vec::with_capacity(h * w);
    let mut b_win = Vec::with_capacity(h * w);
    for i in 0..h * w {
        let var = (mean_ss[i] - mean_s[i] * mean_s[i]).max(0.0);
        let cov = mean_sg[i] - mean_s[i] * mean_g[i];
        let a = cov / (var + eps);
        a_win.push(a);
        b_win.push(mean_g[i] - a * mean_s[i]);
    }

    let a = box_mean(h, w, radius, &a_win);
    let b = box_mean(h, w, radius, &b_win);
    let output = (0..h * w).map(|i| (a[i] * s[i] + b[i]) as f32).collect();
    let to_plane = |v: Vec<f64>| Plane { height: h, width: w, data: v.into_iter().map(|x| x as f32).collect() };
    Ok(GuidedOutput { a: to_plane(a), b: to_plane(b), output: Plane { height: h, width: w, data: output } })
}

/// Channel-wise guided filter of a color source against a color guide.
pub fn guided_filter_rgb(guide: &LinearImage, src: &LinearImage, radius: usize, eps: f64) -> Result<LinearImage> {
    let mut planes = Vec::with_capacity(3);
    for c in 0..3 {
        planes.push(guided_filter(&guide.channel(c), &src.channel(c), radius, eps)?.output);
    }
    LinearImage::from_planes([&planes[0], &planes[1], &planes[2]])
}

/// Per-pixel 3x3 matrices `A[x]` and offsets `B[x]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformField {
    height: usize,
    width: usize,
    a: Vec<f32>,
    b: Vec<f32>,
}

impl TransformField {
    /// `a` holds 9 row-major values per pixel, `b` holds 3.
    pub fn new(height: usize, width: usize, a: Vec<f32>, b: Vec<f32>) -> Result<Self> {
        let n = height * width;
        if n == 0 || a.len() != n * 9 || b.len() != n * 3 {
            bail!(ShapeMismatch, "{height}x{width} field needs {} matrix and {} bias values", n * 9, n * 3);
        }
        if a.iter().chain(&b).any(|v| !v.is_finite()) {
            bail!(InvalidParameter, "transform field has non-finite entries");
        }
        Ok(Self { height, width, a, b })
    }

    pub fn constant(height: usize, width: usize, g: &GlobalTransform) -> Self {
        let a = g.a.iter().flatten().copied().collect::<Vec<_>>();
        Self {
            height,
            width,
            a: a.iter().copied().cycle().take(height * width * 9).collect(),
            b: g.b.iter().copied().cycle().take(height * width * 3).collect(),
        }
    }

    pub fn identity(height: usize, width: usize) -> Self {
        Self::constant(height, width, &GlobalTransform::identity())
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn matrices(&self) -> &[f32] {
        &self.a
    }

    pub fn biases(&self) -> &[f32] {
        &self.b
    }
}

/// `out[x] = A[x] * in[x] + B[x]`, unclamped.
pub fn apply_transform_field(x: &LinearImage, t: &TransformField) -> Result<LinearImage> {
    if x.height() != t.height || x.width() != t.width {
        bail!(ShapeMismatch, "field is {}x{} but image is {}x{}", t.width, t.height, x.width(), x.height());
    }
    let mut out = Vec::with_capacity(x.data().len());
    for ((px, a), b) in x.data().chunks_exact(3).zip(t.a.chunks_exact(9)).zip(t.b.chunks_exact(3)) {
        for r in 0..3 {
            out.push(a[r * 3] * px[0] + a[r * 3 + 1] * px[1] + a[r * 3 + 2] * px[2] + b[r]);
        }
    }
    LinearImage::new(x.height(), x.width(), out)
}

/// One affine color transform shared by all pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GlobalTransform {
    pub a: [[f32; 3]; 3],
    pub b: [f32; 3],
}

impl GlobalTransform {
    pub fn identity() -> Self {
        Self { a: crate::isp::IDENTITY_MATRIX, b: [0.0; 3] }
    }
}

pub fn apply_global_transform(x: &LinearImage, g: &GlobalTransform) -> Result<LinearImage> {
    if g.a.iter().flatten().chain(&g.b).any(|v| !v.is_finite()) {
        bail!(InvalidParameter, "global transform has non-finite entries");
    }
    let mut out = Vec::with_capacity(x.data().len());
    for px in x.data().chunks_exact(3) {
        for r in 0..3 {
            out.push(g.a[r][0] * px[0] + g.a[r][1] * px[1] + g.a[r][2] * px[2] + g.b[r]);
        }
    }
    LinearImage::new(x.height(), x.width(), out)
}

/// Guided filtering of a learned re-encoding `phi(x)` against the guide,
/// channel by channel.
pub fn etgf<F>(guide: &LinearImage, x: &LinearImage, phi: F, radius: usize, eps: f64) -> Result<LinearImage>
where
    F: FnOnce(&LinearImage) -> Result<LinearImage>,
{
    let mapped = phi(x)?;
    if mapped.height() != x.height() || mapped.width() != x.width() {
        bail!(ShapeMismatch, "transform changed the image size");
    }
    guided_filter_rgb(guide, &mapped, radius, eps)
}

/// Two pointwise (1x1) layers with a LeakyReLU between them, the usual
/// re-encoding for [`etgf`].
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PointwiseMap {
    pub hidden: usize,
    /// `hidden x 3`, row-major.
    pub w1: Vec<f32>,
    pub b1: Vec<f32>,
    /// `3 x hidden`, row-major.
    pub w2: Vec<f32>,
    pub b2: Vec<f32>,
    pub slope: f32,
}

impl PointwiseMap {
    /// Identity on non-negative inputs.
    pub fn identity() -> Self {
        let eye = alloc::vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
        Self { hidden: 3, w1: eye.clone(), b1: vec![0.0; 3], w2: eye, b2: vec![0.0; 3], slope: 0.2 }
    }

    /// Xavier-uniform weights, zero biases.
    pub fn random(hidden: usize, seed: u64) -> Self {
        let mut r = rng::stage_rng(seed, 0, Stage::Init);
        let bound = libm::sqrt(6.0 / (hidden + 3) as f64);
        let mut draw = |n: usize| (0..n).map(|_| rng::uniform_in(&mut r, -bound, bound) as f32).collect::<Vec<_>>();
        let w1 = draw(hidden * 3);
        let w2 = draw(3 * hidden);
        Self { hidden, w1, b1: vec![0.0; hidden], w2, b2: vec![0.0; 3], slope: 0.2 }
    }

    pub fn apply(&self, x: &LinearImage) -> Result<LinearImage> {
        if self.w1.len() != self.hidden * 3 || self.w2.len() != self.hidden * 3 || self.b1.len() != self.hidden || self.b2.len() != 3 {
            bail!(ShapeMismatch, "pointwise map weights do not match hidden width {}", self.hidden);
        }
        let mut hidden = vec![0.0f32; self.hidden];
        let mut out = Vec::with_capacity(x.data().len());
        for px in x.data().chunks_exact(3) {
            for (j, hv) in hidden.iter_mut().enumerate() {
                let v = self.w1[j * 3] * px[0] + self.w1[j * 3 + 1] * px[1] + self.w1[j * 3 + 2] * px[2] + self.b1[j];
                *hv = if v >= 0.0 { v } else { self.slope * v };
            }
            for c in 0..3 {
                let row = &self.w2[c * self.hidden..(c + 1) * self.hidden];
                out.push(row.iter().zip(&hidden).map(|(w, h)| w * h).sum::<f32>() + self.b2[c]);
            }
        }
        LinearImage::new(x.height(), x.width(), out)
    }
}
