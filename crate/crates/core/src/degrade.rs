//! Blur kernels, convolution, downsampling and signal-dependent sensor noise.

use alloc::vec;
use alloc::vec::Vec;

use crate::bayer::reflect101;
use crate::error::{bail, Result};
use crate::image::{BayerImage, LinearImage};
use crate::rng::{self, ElementStream, Stage};

/// Square, odd-sized, non-negative blur kernel with unit mass.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Kernel {
    size: usize,
    weights: Vec<f32>,
}

impl Kernel {
    pub fn new(size: usize, weights: Vec<f32>) -> Result<Self> {
        if size.is_multiple_of(2) {
            bail!(InvalidParameter, "kernel size must be odd, got {size}");
        }
        if weights.len() != size * size {
            bail!(ShapeMismatch, "{size}x{size} kernel needs {} weights, got {}", size * size, weights.len());
        }
        if weights.iter().any(|&w| !w.is_finite() || w < 0.0) {
            bail!(InvalidParameter, "kernel weights must be finite and non-negative");
        }
        let sum: f64 = weights.iter().map(|&w| w as f64).sum();
        if (sum - 1.0).abs() > 1e-5 {
            bail!(InvalidParameter, "kernel weights sum to {sum}, expected 1");
        }
        Ok(Self { size, weights })
    }

    /// Normalizes non-negative `f64` weights to unit mass.
    fn from_mass(size: usize, mass: &[f64]) -> Self {
        let total: f64 = mass.iter().sum();
        Self { size, weights: mass.iter().map(|&m| (m / total) as f32).collect() }
    }

    pub fn delta(size: usize) -> Self {
        assert!(size % 2 == 1, "kernel size must be odd");
        let mut weights = vec![0.0; size * size];
        weights[size * size / 2] = 1.0;
        Self { size, weights }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn radius(&self) -> usize {
        self.size / 2
    }

    pub fn weights(&self) -> &[f32] {
        &self.weights
    }

    #[inline]
    pub fn at(&self, y: usize, x: usize) -> f32 {
        self.weights[y * self.size + x]
    }

    /// Full 2-D convolution of two kernels, the kernel of applying both.
    pub fn compose(&self, other: &Kernel) -> Kernel {
        let size = self.size + other.size - 1;
        let mut mass = vec![0.0f64; size * size];
        for ay in 0..self.size {
            for ax in 0..self.size {
                let a = self.at(ay, ax) as f64;
                for by in 0..other.size {
                    for bx in 0..other.size {
                        mass[(ay + by) * size + ax + bx] += a * other.at(by, bx) as f64;
                    }
                }
            }
        }
        Kernel::from_mass(size, &mass)
    }
}

const DISK_SUPERSAMPLING: usize = 16;

/// Defocus kernel: the area fraction of each pixel cell covered by a disk.
pub fn disk_kernel(radius: f64) -> Result<Kernel> {
    disk_kernel_supersampled(radius, DISK_SUPERSAMPLING)
}

pub fn disk_kernel_supersampled(radius: f64, samples: usize) -> Result<Kernel> {
    if !radius.is_finite() || radius < 0.5 {
        bail!(InvalidParameter, "disk radius must be at least 0.5, got {radius}");
    }
    let half = libm::ceil(radius) as usize;
    let size = 2 * half + 1;
    let r2 = radius * radius;
    let mut mass = vec![0.0f64; size * size];
    for ky in 0..size {
        for kx in 0..size {
            let cy = ky as f64 - half as f64;
            let cx = kx as f64 - half as f64;
            let mut inside = 0usize;
            for sy in 0..samples {
                let py = cy - 0.5 + (sy as f64 + 0.5) / samples as f64;
                for sx in 0..samples {
                    let px = cx - 0.5 + (sx as f64 + 0.5) / samples as f64;
                    if px * px + py * py <= r2 {
                        inside += 1;
                    }
                }
            }
            mass[ky * size + kx] = inside as f64;
        }
    }
    Ok(Kernel::from_mass(size, &mass))
}

/// Default number of random-walk steps for camera-shake kernels.
pub const MOTION_STEPS: usize = 64;

/// Camera-shake kernel from a seeded 2-D Gaussian random walk.
///
/// The trajectory's bounding box is centered and scaled so its longer side
/// spans `max_size - 1` pixels, then every point is splatted bilinearly.
pub fn motion_kernel(max_size: usize, steps: usize, seed: u64) -> Result<Kernel> {
    if max_size < 3 || max_size.is_multiple_of(2) {
        bail!(InvalidParameter, "motion kernel size must be odd and at least 3, got {max_size}");
    }
    if steps == 0 {
        bail!(InvalidParameter, "motion kernel needs at least one step");
    }
    let mut rng = rng::stream(seed, Stage::Motion as u64);
    let mut path = Vec::with_capacity(steps);
    let (mut py, mut px) = (0.0f64, 0.0f64);
    for _ in 0..steps {
        py += rng::standard_normal(&mut rng);
        px += rng::standard_normal(&mut rng);
        path.push((py, px));
    }

    let fold = |f: fn(f64, f64) -> f64, init: f64, pick: fn(&(f64, f64)) -> f64| path.iter().map(pick).fold(init, f);
    let (y_lo, y_hi) = (fold(f64::min, f64::INFINITY, |p| p.0), fold(f64::max, f64::NEG_INFINITY, |p| p.0));
    let (x_lo, x_hi) = (fold(f64::min, f64::INFINITY, |p| p.1), fold(f64::max, f64::NEG_INFINITY, |p| p.1));
    let extent = (y_hi - y_lo).max(x_hi - x_lo);
    let scale = if extent > 0.0 { (max_size - 1) as f64 / extent } else { 0.0 };
    let (y_mid, x_mid) = (0.5 * (y_lo + y_hi), 0.5 * (x_lo + x_hi));
    let center = (max_size / 2) as f64;
    let last = (max_size - 1) as f64;

    let mut mass = vec![0.0f64; max_size * max_size];
    for &(y, x) in &path {
        let u = (center + (y - y_mid) * scale).clamp(0.0, last);
        let v = (center + (x - x_mid) * scale).clamp(0.0, last);
        let (y0, x0) = (libm::floor(u) as usize, libm::floor(v) as usize);
        let (fy, fx) = (u - y0 as f64, v - x0 as f64);
        let (y1, x1) = ((y0 + 1).min(max_size - 1), (x0 + 1).min(max_size - 1));
        mass[y0 * max_size + x0] += (1.0 - fy) * (1.0 - fx);
        mass[y0 * max_size + x1] += (1.0 - fy) * fx;
        mass[y1 * max_size + x0] += fy * (1.0 - fx);
        mass[y1 * max_size + x1] += fy * fx;
    }
    Ok(Kernel::from_mass(max_size, &mass))
}

/// 2-D convolution with mirrored borders, output the same size as the input.
pub fn convolve(img: &LinearImage, k: &Kernel) -> Result<LinearImage> {
    let (h, w) = (img.height(), img.width());
    if k.size() > h || k.size() > w {
        bail!(InvalidDimensions, "{0}x{0} kernel does not fit a {w}x{h} image", k.size());
    }
    let r = k.radius() as isize;
    let src = img.data();
    let mut out = vec![0.0f32; h * w * 3];
    for y in 0..h {
        for x in 0..w {
            let mut acc = [0.0f32; 3];
            for ky in 0..k.size() {
                let sy = reflect101(y as isize + r - ky as isize, h);
                for kx in 0..k.size() {
                    let wgt = k.at(ky, kx);
                    if wgt == 0.0 {
                        continue;
                    }
                    let sx = reflect101(x as isize + r - kx as isize, w);
                    let i = (sy * w + sx) * 3;
                    acc[0] += wgt * src[i];
                    acc[1] += wgt * src[i + 1];
                    acc[2] += wgt * src[i + 2];
                }
            }
            out[(y * w + x) * 3..(y * w + x) * 3 + 3].copy_from_slice(&acc);
        }
    }
    LinearImage::new(h, w, out)
}

/// Box-average `factor x factor` blocks (`f_down`).
pub fn downsample(img: &LinearImage, factor: usize) -> Result<LinearImage> {
    let (h, w) = (img.height(), img.width());
    if factor < 2 {
        bail!(InvalidParameter, "downsampling factor must be at least 2, got {factor}");
    }
    if h % factor != 0 || w % factor != 0 {
        bail!(InvalidDimensions, "{w}x{h} image is not divisible by {factor}");
    }
    let (oh, ow) = (h / factor, w / factor);
    let norm = 1.0 / (factor * factor) as f32;
    let mut out = Vec::with_capacity(oh * ow * 3);
    for oy in 0..oh {
        for ox in 0..ow {
            for c in 0..3 {
                let mut s = 0.0f32;
                for y in oy * factor..(oy + 1) * factor {
                    for x in ox * factor..(ox + 1) * factor {
                        s += img.get(y, x, c);
                    }
                }
                out.push(s * norm);
            }
        }
    }
    LinearImage::new(oh, ow, out)
}

/// Parameters of the signal-dependent noise `n ~ N(0, sigma1_sq * x + sigma2_sq)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NoiseParams {
    pub sigma1_sq: f64,
    pub sigma2_sq: f64,
    pub seed: u64,
}

impl NoiseParams {
    pub const NONE: NoiseParams = NoiseParams { sigma1_sq: 0.0, sigma2_sq: 0.0, seed: 0 };

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma1_sq >= 0.0 && self.sigma2_sq >= 0.0) {
            bail!(InvalidParameter, "noise variances must be non-negative, got {} and {}", self.sigma1_sq, self.sigma2_sq);
        }
        Ok(())
    }
}

/// Pre-clamp noise values for each input sample.
///
/// Sample `i` uses normal deviate `i` of the element stream keyed by
/// `params.seed`, so results do not depend on evaluation order.
pub fn noise_values(samples: &[f32], params: &NoiseParams) -> Result<Vec<f64>> {
    params.validate()?;
    let mut z = vec![0.0f64; samples.len()];
    if params.sigma1_sq == 0.0 && params.sigma2_sq == 0.0 {
        return Ok(z);
    }
    ElementStream::new(params.seed, Stage::Noise as u64).normals(0, &mut z);
    for (n, &x) in z.iter_mut().zip(samples) {
        let var = (params.sigma1_sq * x as f64 + params.sigma2_sq).max(0.0);
        *n *= libm::sqrt(var);
    }
    Ok(z)
}

fn noisy(samples: &[f32], params: &NoiseParams) -> Result<Vec<f32>> {
    let n = noise_values(samples, params)?;
    Ok(samples.iter().zip(&n).map(|(&x, &d)| (x as f64 + d).clamp(0.0, 1.0) as f32).collect())
}

/// Images that can carry sensor noise.
pub trait NoiseTarget: Sized {
    fn add_noise(&self, params: &NoiseParams) -> Result<Self>;
}

impl NoiseTarget for BayerImage {
    fn add_noise(&self, params: &NoiseParams) -> Result<Self> {
        BayerImage::new(self.height(), self.width(), self.pattern(), noisy(self.data(), params)?)
    }
}

impl NoiseTarget for LinearImage {
    fn add_noise(&self, params: &NoiseParams) -> Result<Self> {
        LinearImage::new(self.height(), self.width(), noisy(self.data(), params)?)
    }
}

/// `out = clamp(in + n, 0, 1)` with heteroscedastic Gaussian `n`.
pub fn add_noise<I: NoiseTarget>(img: &I, params: &NoiseParams) -> Result<I> {
    img.add_noise(params)
}

/// Odd motion-kernel sizes drawn for blind degradations.
pub const MOTION_SIZES: [usize; 5] = [3, 5, 7, 9, 11];
pub const DEFOCUS_RADIUS_RANGE: (f64, f64) = (1.0, 5.0);
pub const SIGMA1_MAX: f64 = 1e-2;
pub const SIGMA2_MAX: f64 = 1e-3;

/// Parameters from which a sample's blur kernels and noise are rebuilt.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Degradation {
    pub defocus_radius: Option<f64>,
    pub motion: Option<MotionBlur>,
    pub noise: NoiseParams,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MotionBlur {
    pub size: usize,
    pub steps: usize,
    pub seed: u64,
}

impl Degradation {
    /// Blind draw for sample `sample` under dataset seed `seed`.
    pub fn sample(seed: u64, sample: u64) -> Self {
        let mut r = rng::stage_rng(seed, sample, Stage::Defocus);
        let defocus_radius = rng::uniform_in(&mut r, DEFOCUS_RADIUS_RANGE.0, DEFOCUS_RADIUS_RANGE.1);

        let mut r = rng::stage_rng(seed, sample, Stage::Motion);
        let size = MOTION_SIZES[(rng::uniform(&mut r) * MOTION_SIZES.len() as f64) as usize];
        let motion_seed = rand_chacha::rand_core::RngCore::next_u64(&mut r);

        let mut r = rng::stage_rng(seed, sample, Stage::NoiseParams);
        let sigma1 = rng::uniform_in(&mut r, 0.0, SIGMA1_MAX);
        let sigma2 = rng::uniform_in(&mut r, 0.0, SIGMA2_MAX);
        let noise_seed = rand_chacha::rand_core::RngCore::next_u64(&mut r);

        Self {
            defocus_radius: Some(defocus_radius),
            motion: Some(MotionBlur { size, steps: MOTION_STEPS, seed: motion_seed }),
            noise: NoiseParams { sigma1_sq: sigma1 * sigma1, sigma2_sq: sigma2 * sigma2, seed: noise_seed },
        }
    }

    /// Non-blind protocol: a fixed defocus disk and no camera shake.
    pub fn non_blind(seed: u64, sample: u64, radius: f64) -> Self {
        let blind = Self::sample(seed, sample);
        Self { defocus_radius: Some(radius), motion: None, noise: blind.noise }
    }

    pub fn identity() -> Self {
        Self { defocus_radius: None, motion: None, noise: NoiseParams::NONE }
    }

    pub fn defocus_kernel(&self) -> Result<Kernel> {
        match self.defocus_radius {
            Some(r) => disk_kernel(r),
            None => Ok(Kernel::delta(1)),
        }
    }

    pub fn motion_kernel(&self) -> Result<Kernel> {
        match self.motion {
            Some(m) => motion_kernel(m.size, m.steps, m.seed),
            None => Ok(Kernel::delta(1)),
        }
    }
}

/// Random defocus kernel, motion kernel and noise parameters for `seed`.
pub fn sample_degradation(seed: u64) -> Result<(Kernel, Kernel, NoiseParams)> {
    let d = Degradation::sample(seed, 0);
    Ok((d.defocus_kernel()?, d.motion_kernel()?, d.noise))
}
