//! Training-sample synthesis: a clean linear image is blurred, downsampled,
//! mosaiced and corrupted by sensor noise to give the raw input, and the
//! raw input is developed by a simulated ISP into the reference image.

use crate::bayer::{demosaic_bilinear, linearize_virtual_sensel, mosaic};
use crate::degrade::{add_noise, convolve, downsample, Degradation};
use crate::error::{bail, Result};
use crate::image::{BayerImage, BayerPattern, ColorImage, LinearImage};
use crate::isp::{develop, IspConfig};

/// Clean stand-in for a high-quality capture.
#[derive(Debug, Clone)]
pub enum Source {
    /// Already scene-linear RGB.
    Linear(LinearImage),
    /// A full-resolution mosaic, linearized per 2x2 block.
    Raw(BayerImage),
}

impl Source {
    pub fn linear(&self) -> Result<LinearImage> {
        match self {
            Source::Linear(img) => Ok(img.clone()),
            Source::Raw(raw) => linearize_virtual_sensel(raw),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct SynthConfig {
    pub isp: IspConfig,
    /// Draw per-sample white-balance gains around `isp`.
    pub jitter_isp: bool,
    pub pattern: BayerPattern,
    /// Downsampling factor between the clean image and the raw input (2 or 4).
    pub factor: usize,
    /// Fixed defocus radius and no motion blur.
    pub non_blind_radius: Option<f64>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self { isp: IspConfig::default(), jitter_isp: false, pattern: BayerPattern::Rggb, factor: 2, non_blind_radius: None }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        self.isp.validate()?;
        if self.factor != 2 && self.factor != 4 {
            bail!(InvalidParameter, "downsampling factor must be 2 or 4, got {}", self.factor);
        }
        if let Some(r) = self.non_blind_radius {
            if !(r.is_finite() && r > 0.0) {
                bail!(InvalidParameter, "non-blind radius must be positive, got {r}");
            }
        }
        Ok(())
    }
}

/// Everything needed to regenerate a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct Provenance {
    pub seed: u64,
    pub index: u64,
    pub factor: usize,
    pub pattern: BayerPattern,
    pub degradation: Degradation,
    pub isp: IspConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleQuad {
    pub x_raw: BayerImage,
    pub x_ref: ColorImage,
    pub x_lin: LinearImage,
    pub x_gt: ColorImage,
    pub provenance: Provenance,
}

impl SampleQuad {
    /// Checks the size and development relations between the four images.
    pub fn validate(&self) -> Result<()> {
        let f = self.provenance.factor;
        let (h, w) = (self.x_raw.height(), self.x_raw.width());
        if (self.x_ref.height(), self.x_ref.width()) != (h, w) {
            bail!(ShapeMismatch, "reference is {}x{} but raw is {w}x{h}", self.x_ref.width(), self.x_ref.height());
        }
        for (name, dims) in [("linear", (self.x_lin.height(), self.x_lin.width())), ("ground truth", (self.x_gt.height(), self.x_gt.width()))] {
            if dims != (h * f, w * f) {
                bail!(ShapeMismatch, "{name} image is {}x{}, expected {}x{}", dims.1, dims.0, w * f, h * f);
            }
        }
        if self.x_raw.pattern() != self.provenance.pattern {
            bail!(InvalidParameter, "raw pattern {} differs from provenance {}", self.x_raw.pattern(), self.provenance.pattern);
        }
        Ok(())
    }
}

/// Blur, downsample, mosaic and noise: the raw input for a clean image.
pub fn degrade_to_raw(x_lin: &LinearImage, d: &Degradation, factor: usize, pattern: BayerPattern) -> Result<BayerImage> {
    let blurred = convolve(&convolve(x_lin, &d.defocus_kernel()?)?, &d.motion_kernel()?)?;
    add_noise(&mosaic(&downsample(&blurred, factor)?, pattern)?, &d.noise)
}

/// Builds the quad for an explicit degradation and development.
pub fn synthesize_with(x_lin: LinearImage, provenance: Provenance) -> Result<SampleQuad> {
    let (h, w) = (x_lin.height(), x_lin.width());
    let f = provenance.factor;
    if h == 0 || w == 0 || h % (2 * f) != 0 || w % (2 * f) != 0 {
        bail!(InvalidDimensions, "source size {w}x{h} must be a positive multiple of {}", 2 * f);
    }
    let x_raw = degrade_to_raw(&x_lin, &provenance.degradation, f, provenance.pattern)?;
    let x_ref = develop(&demosaic_bilinear(&x_raw)?, &provenance.isp)?;
    let x_gt = develop(&x_lin, &provenance.isp)?;
    Ok(SampleQuad { x_raw, x_ref, x_lin, x_gt, provenance })
}

/// Sample `index` of the dataset with seed `seed`.
pub fn synthesize_sample(src: &Source, seed: u64, index: u64, cfg: &SynthConfig) -> Result<SampleQuad> {
    cfg.validate()?;
    let degradation = match cfg.non_blind_radius {
        Some(r) => Degradation::non_blind(seed, index, r),
        None => Degradation::sample(seed, index),
    };
    let isp = if cfg.jitter_isp { cfg.isp.jittered(seed, index) } else { cfg.isp };
    let provenance = Provenance { seed, index, factor: cfg.factor, pattern: cfg.pattern, degradation, isp };
    synthesize_with(src.linear()?, provenance)
}
