//! Tiled inference with overlap averaging.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::image::{BayerImage, ColorImage, LinearImage};
use crate::isp::quantize;
use crate::nets::{RawSrModel, ALIGNMENT};
use crate::scalar::Scalar;

pub const DEFAULT_PATCH: usize = 256;
pub const DEFAULT_OVERLAP: usize = 32;

/// Anything that maps a raw mosaic and its reference to a larger image.
pub trait SrModel {
    /// Output size over input size.
    fn scale(&self) -> usize;

    /// Input sides must be multiples of this.
    fn alignment(&self) -> usize;

    fn forward(&mut self, raw: &BayerImage, reference: &ColorImage) -> Result<LinearImage>;
}

impl<T: Scalar> SrModel for RawSrModel<T> {
    fn scale(&self) -> usize {
        self.config().scale
    }

    fn alignment(&self) -> usize {
        ALIGNMENT
    }

    fn forward(&mut self, raw: &BayerImage, reference: &ColorImage) -> Result<LinearImage> {
        Ok(self.infer(raw, reference)?.output)
    }
}

/// Tile origins along one axis: stride `patch - overlap`, with the last tile
/// flush against the far edge.
pub fn tile_starts(dim: usize, patch: usize, overlap: usize) -> Vec<usize> {
    if patch >= dim {
        return vec![0];
    }
    let step = patch - overlap;
    let mut starts: Vec<usize> = (0..).map(|i| i * step).take_while(|&s| s + patch < dim).collect();
    starts.push(dim - patch);
    starts
}

/// Patched inference in the linear domain. `patch` and `overlap` are in
/// input (raw) pixels; an axis shorter than `patch` is processed whole.
pub fn infer_patched_linear<M: SrModel + ?Sized>(
    model: &mut M,
    raw: &BayerImage,
    reference: &ColorImage,
    patch: usize,
    overlap: usize,
) -> Result<LinearImage> {
    let (h, w) = (raw.height(), raw.width());
    if (reference.height(), reference.width()) != (h, w) {
        bail!(ShapeMismatch, "reference is {}x{} but raw is {w}x{h}", reference.width(), reference.height());
    }
    let align = model.alignment();
    if patch == 0 || !patch.is_multiple_of(align) {
        bail!(InvalidParameter, "patch {patch} must be a positive multiple of {align}");
    }
    if !overlap.is_multiple_of(2) || patch < 2 * overlap {
        bail!(InvalidParameter, "overlap {overlap} must be even and at most half the patch {patch}");
    }
    if patch >= h && patch >= w {
        return model.forward(raw, reference);
    }
    let s = model.scale();
    let (oh, ow) = (h * s, w * s);
    let mut sum = vec![0.0f64; oh * ow * 3];
    let mut count = vec![0u32; oh * ow];
    let (ph, pw) = (patch.min(h), patch.min(w));
    for &y0 in &tile_starts(h, ph, overlap) {
        for &x0 in &tile_starts(w, pw, overlap) {
            let out = model.forward(&raw.crop(x0, y0, pw, ph)?, &reference.crop(x0, y0, pw, ph)?)?;
            if (out.height(), out.width()) != (ph * s, pw * s) {
                bail!(ShapeMismatch, "model returned {}x{} for a {pw}x{ph} tile", out.width(), out.height());
            }
            for ty in 0..ph * s {
                let row = (y0 * s + ty) * ow + x0 * s;
                for tx in 0..pw * s {
                    count[row + tx] += 1;
                    for c in 0..3 {
                        sum[(row + tx) * 3 + c] += out.get(ty, tx, c) as f64;
                    }
                }
            }
        }
    }
    let data = sum.iter().enumerate().map(|(i, &v)| (v / count[i / 3] as f64) as f32).collect();
    LinearImage::new(oh, ow, data)
}

/// Patched inference quantized to 8 bits.
pub fn infer_patched<M: SrModel + ?Sized>(
    model: &mut M,
    raw: &BayerImage,
    reference: &ColorImage,
    patch: usize,
    overlap: usize,
) -> Result<ColorImage> {
    Ok(quantize(&infer_patched_linear(model, raw, reference, patch, overlap)?))
}
