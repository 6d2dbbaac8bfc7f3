//! Full-reference image quality: PSNR and single-scale SSIM in `[0, 1]`
//! float space.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::image::{ColorImage, LinearImage};

pub const PSNR_CAP: f64 = 99.0;
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

/// Three-channel images viewed as `[0, 1]` floats.
pub trait MetricImage {
    fn dims(&self) -> (usize, usize);

    /// Interleaved RGB values.
    fn values(&self) -> Vec<f64>;
}

impl MetricImage for LinearImage {
    fn dims(&self) -> (usize, usize) {
        (self.height(), self.width())
    }

    fn values(&self) -> Vec<f64> {
        self.data().iter().map(|&v| v as f64).collect()
    }
}

impl MetricImage for ColorImage {
    fn dims(&self) -> (usize, usize) {
        (self.height(), self.width())
    }

    fn values(&self) -> Vec<f64> {
        self.data().iter().map(|&v| v as f64 / 255.0).collect()
    }
}

fn same_dims<I: MetricImage>(a: &I, b: &I) -> Result<(usize, usize)> {
    if a.dims() != b.dims() {
        bail!(ShapeMismatch, "cannot compare {:?} with {:?}", a.dims(), b.dims());
    }
    Ok(a.dims())
}

/// Peak signal-to-noise ratio with peak 1, capped at [`PSNR_CAP`].
pub fn psnr<I: MetricImage>(a: &I, b: &I) -> Result<f64> {
    same_dims(a, b)?;
    let (va, vb) = (a.values(), b.values());
    let mse = va.iter().zip(&vb).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / va.len() as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP);
    }
    Ok((-10.0 * libm::log10(mse)).min(PSNR_CAP))
}

/// Normalized 1-D Gaussian; the 2-D window is its outer product.
pub fn gaussian_window() -> [f64; SSIM_WINDOW] {
    let mut g = [0.0; SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    for (i, v) in g.iter_mut().enumerate() {
        let d = i as f64 - c;
        *v = libm::exp(-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA));
    }
    let s: f64 = g.iter().sum();
    g.iter_mut().for_each(|v| *v /= s);
    g
}

/// Gaussian-weighted means over every fully contained window.
fn filter_valid(plane: &[f64], h: usize, w: usize, g: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let (oh, ow) = (h - SSIM_WINDOW + 1, w - SSIM_WINDOW + 1);
    let mut rows = vec![0.0; h * ow];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = g.iter().enumerate().map(|(k, &gk)| gk * plane[y * w + x + k]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = g.iter().enumerate().map(|(k, &gk)| gk * rows[(y + k) * ow + x]).sum();
        }
    }
    out
}

/// Structural similarity: 11x11 Gaussian window (sigma 1.5), no padding,
/// averaged over windows and then over channels.
pub fn ssim<I: MetricImage>(a: &I, b: &I) -> Result<f64> {
    let (h, w) = same_dims(a, b)?;
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        bail!(InvalidDimensions, "SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {w}x{h}");
    }
    let (va, vb) = (a.values(), b.values());
    let g = gaussian_window();
    let (c1, c2) = ((SSIM_K1 * SSIM_K1), (SSIM_K2 * SSIM_K2));
    let mut total = 0.0;
    for c in 0..3 {
        let x: Vec<f64> = va.iter().skip(c).step_by(3).copied().collect();
        let y: Vec<f64> = vb.iter().skip(c).step_by(3).copied().collect();
        let prod = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(u, v)| u * v).collect::<Vec<_>>();
        let mx = filter_valid(&x, h, w, &g);
        let my = filter_valid(&y, h, w, &g);
        let sxx = filter_valid(&prod(&x, &x), h, w, &g);
        let syy = filter_valid(&prod(&y, &y), h, w, &g);
        let sxy = filter_valid(&prod(&x, &y), h, w, &g);
        let mut acc = 0.0;
        for i in 0..mx.len() {
            let (ux, uy) = (mx[i], my[i]);
            let vx = sxx[i] - ux * ux;
            let vy = syy[i] - uy * uy;
            let cov = sxy[i] - ux * uy;
            acc += ((2.0 * ux * uy + c1) * (2.0 * cov + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2));
        }
        total += acc / mx.len() as f64;
    }
    Ok(total / 3.0)
}
