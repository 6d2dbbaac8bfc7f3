//! Simulated camera ISP: white balance, color-space conversion, tone curve
//! and 8-bit quantization.

use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::image::{ColorImage, LinearImage};
use crate::rng::{self, Stage};

/// Display tone curve.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "SCREAMING_SNAKE_CASE"))]
pub enum Tone {
    /// Piecewise sRGB encoding curve.
    SrgbGamma,
    /// Pure power law `v^(1/exponent)`.
    Gamma(f32),
}

/// Camera-to-sRGB matrix of the default development. Rows sum to one.
pub const DEFAULT_COLOR_MATRIX: [[f32; 3]; 3] = [
    [1.60, -0.50, -0.10],
    [-0.20, 1.50, -0.30],
    [0.00, -0.50, 1.50],
];

pub const IDENTITY_MATRIX: [[f32; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct IspConfig {
    pub wb_gains: [f32; 3],
    pub color_matrix: [[f32; 3]; 3],
    pub tone: Tone,
    pub quantize_bits: u8,
}

impl Default for IspConfig {
    fn default() -> Self {
        Self { wb_gains: [1.0; 3], color_matrix: DEFAULT_COLOR_MATRIX, tone: Tone::SrgbGamma, quantize_bits: 8 }
    }
}

impl IspConfig {
    pub fn identity() -> Self {
        Self { wb_gains: [1.0; 3], color_matrix: IDENTITY_MATRIX, tone: Tone::Gamma(1.0), quantize_bits: 8 }
    }

    /// Copy with per-channel white-balance gains drawn from `[0.8, 1.2]`.
    pub fn jittered(&self, seed: u64, sample: u64) -> Self {
        let mut r = rng::stage_rng(seed, sample, Stage::Isp);
        let mut cfg = *self;
        for g in &mut cfg.wb_gains {
            *g *= rng::uniform_in(&mut r, 0.8, 1.2) as f32;
        }
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        check_gains(self.wb_gains)?;
        check_matrix(&self.color_matrix)?;
        if let Tone::Gamma(g) = self.tone {
            if !g.is_finite() || g <= 0.0 {
                bail!(InvalidParameter, "gamma exponent must be positive, got {g}");
            }
        }
        if self.quantize_bits != 8 {
            bail!(InvalidParameter, "only 8-bit quantization is supported, got {}", self.quantize_bits);
        }
        Ok(())
    }
}

fn check_gains(gains: [f32; 3]) -> Result<()> {
    if gains.iter().any(|&g| !g.is_finite() || g <= 0.0) {
        bail!(InvalidParameter, "white-balance gains must be positive, got {gains:?}");
    }
    Ok(())
}

fn check_matrix(m: &[[f32; 3]; 3]) -> Result<()> {
    for (i, row) in m.iter().enumerate() {
        let s: f64 = row.iter().map(|&v| v as f64).sum();
        if (s - 1.0).abs() > 1e-6 || row.iter().any(|v| !v.is_finite()) {
            bail!(InvalidParameter, "color matrix row {i} sums to {s}, expected 1");
        }
    }
    Ok(())
}

pub fn white_balance(img: &LinearImage, gains: [f32; 3]) -> Result<LinearImage> {
    check_gains(gains)?;
    let mut data = img.data().to_vec();
    for px in data.chunks_exact_mut(3) {
        for c in 0..3 {
            px[c] = (px[c] * gains[c]).clamp(0.0, 1.0);
        }
    }
    LinearImage::new(img.height(), img.width(), data)
}

pub fn apply_color_matrix(img: &LinearImage, m: &[[f32; 3]; 3]) -> Result<LinearImage> {
    check_matrix(m)?;
    let mut data = Vec::with_capacity(img.data().len());
    for px in img.data().chunks_exact(3) {
        for row in m {
            data.push((row[0] * px[0] + row[1] * px[1] + row[2] * px[2]).clamp(0.0, 1.0));
        }
    }
    LinearImage::new(img.height(), img.width(), data)
}

/// Encodes one linear value with the tone curve.
#[inline]
pub fn tone_value(v: f32, tone: Tone) -> f32 {
    match tone {
        Tone::SrgbGamma => {
            if v <= 0.003_130_8 {
                12.92 * v
            } else {
                1.055 * libm::powf(v, 1.0 / 2.4) - 0.055
            }
        }
        Tone::Gamma(g) => {
            if v <= 0.0 {
                0.0
            } else {
                libm::powf(v, 1.0 / g)
            }
        }
    }
}

pub fn tone_map(img: &LinearImage, tone: Tone) -> LinearImage {
    img.map(|v| tone_value(v, tone))
}

/// `round(v * 255)` with halves rounded up, clamped to `[0, 255]`.
#[inline]
pub fn quantize_value(v: f32) -> u8 {
    libm::floorf(v * 255.0 + 0.5).clamp(0.0, 255.0) as u8
}

pub fn quantize(img: &LinearImage) -> ColorImage {
    ColorImage::new(img.height(), img.width(), img.data().iter().map(|&v| quantize_value(v)).collect())
        .expect("same shape as a valid image")
}

/// Runs the full development chain with one configuration.
pub fn develop(img: &LinearImage, cfg: &IspConfig) -> Result<ColorImage> {
    cfg.validate()?;
    let balanced = white_balance(img, cfg.wb_gains)?;
    let converted = apply_color_matrix(&balanced, &cfg.color_matrix)?;
    Ok(quantize(&tone_map(&converted, cfg.tone)))
}
