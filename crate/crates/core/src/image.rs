//! Image containers shared by every stage of the pipeline.
//!
//! All containers are row-major. Color images interleave their three channels
//! (`RGB`), so sample `(y, x, c)` lives at `(y * width + x) * 3 + c`.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{bail, Error, Result};

/// Color-filter layout of the top-left 2x2 block of a mosaic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "UPPERCASE"))]
pub enum BayerPattern {
    #[default]
    Rggb,
    Bggr,
    Grbg,
    Gbrg,
}

impl BayerPattern {
    pub const ALL: [BayerPattern; 4] = [Self::Rggb, Self::Bggr, Self::Grbg, Self::Gbrg];

    /// Color channel (0 = R, 1 = G, 2 = B) sampled at mosaic position `(y, x)`.
    #[inline]
    pub fn channel_at(self, y: usize, x: usize) -> usize {
        let layout: [usize; 4] = match self {
            Self::Rggb => [0, 1, 1, 2],
            Self::Bggr => [2, 1, 1, 0],
            Self::Grbg => [1, 0, 2, 1],
            Self::Gbrg => [1, 2, 0, 1],
        };
        layout[(y & 1) * 2 + (x & 1)]
    }

    /// Offset `(dy, dx)` inside a 2x2 block of the red sample.
    pub fn red_offset(self) -> (usize, usize) {
        self.offset_of(0)
    }

    /// Offset `(dy, dx)` inside a 2x2 block of the blue sample.
    pub fn blue_offset(self) -> (usize, usize) {
        self.offset_of(2)
    }

    /// Offsets of the green sample sharing a row with red, then the one
    /// sharing a row with blue.
    pub fn green_offsets(self) -> [(usize, usize); 2] {
        let (ry, _) = self.red_offset();
        let (by, _) = self.blue_offset();
        let mut g_r = (0, 0);
        let mut g_b = (0, 0);
        for dy in 0..2 {
            for dx in 0..2 {
                if self.channel_at(dy, dx) == 1 {
                    if dy == ry {
                        g_r = (dy, dx);
                    }
                    if dy == by {
                        g_b = (dy, dx);
                    }
                }
            }
        }
        [g_r, g_b]
    }

    fn offset_of(self, channel: usize) -> (usize, usize) {
        for dy in 0..2 {
            for dx in 0..2 {
                if self.channel_at(dy, dx) == channel {
                    return (dy, dx);
                }
            }
        }
        unreachable!("every Bayer layout has one red and one blue sample")
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Rggb => "RGGB",
            Self::Bggr => "BGGR",
            Self::Grbg => "GRBG",
            Self::Gbrg => "GBRG",
        }
    }
}

impl fmt::Display for BayerPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BayerPattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidParameter(alloc::format!("unknown Bayer pattern `{s}`")))
    }
}

fn check_len(height: usize, width: usize, per_pixel: usize, len: usize) -> Result<()> {
    if height == 0 || width == 0 {
        bail!(InvalidDimensions, "empty image {height}x{width}");
    }
    if len != height * width * per_pixel {
        bail!(
            ShapeMismatch,
            "{height}x{width}x{per_pixel} image needs {} samples, got {len}",
            height * width * per_pixel
        );
    }
    Ok(())
}

fn check_window(height: usize, width: usize, x0: usize, y0: usize, w: usize, h: usize) -> Result<()> {
    if w == 0 || h == 0 || x0 + w > width || y0 + h > height {
        bail!(OutOfBounds, "{w}x{h} window at ({x0}, {y0}) in a {width}x{height} image");
    }
    Ok(())
}

fn crop_rows<T: Copy>(src: &[T], width: usize, per_pixel: usize, x0: usize, y0: usize, w: usize, h: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(w * h * per_pixel);
    for y in y0..y0 + h {
        let start = (y * width + x0) * per_pixel;
        out.extend_from_slice(&src[start..start + w * per_pixel]);
    }
    out
}

/// Scene-linear RGB radiance, nominally in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearImage {
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl LinearImage {
    pub fn new(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        check_len(height, width, 3, data.len())?;
        if data.iter().any(|v| !v.is_finite()) {
            bail!(InvalidParameter, "linear image contains non-finite samples");
        }
        Ok(Self { height, width, data })
    }

    pub fn filled(height: usize, width: usize, rgb: [f32; 3]) -> Self {
        let data = (0..height * width).flat_map(|_| rgb).collect();
        Self { height, width, data }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(height * width * 3);
        for y in 0..height {
            for x in 0..width {
                for c in 0..3 {
                    data.push(f(y, x, c));
                }
            }
        }
        Self { height, width, data }
    }

    /// Builds an image from values already known to be finite.
    pub(crate) fn from_raw(height: usize, width: usize, data: Vec<f32>) -> Self {
        debug_assert_eq!(data.len(), height * width * 3);
        Self { height, width, data }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * 3 + c]
    }

    #[inline]
    pub fn pixel(&self, y: usize, x: usize) -> [f32; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn channel(&self, c: usize) -> Plane {
        assert!(c < 3, "channel index {c} out of range");
        Plane {
            height: self.height,
            width: self.width,
            data: self.data.iter().skip(c).step_by(3).copied().collect(),
        }
    }

    pub fn from_planes(planes: [&Plane; 3]) -> Result<Self> {
        let (h, w) = (planes[0].height, planes[0].width);
        if planes.iter().any(|p| p.height != h || p.width != w) {
            bail!(ShapeMismatch, "planes of different sizes");
        }
        let mut data = Vec::with_capacity(h * w * 3);
        for i in 0..h * w {
            for p in &planes {
                data.push(p.data[i]);
            }
        }
        Self::new(h, w, data)
    }

    pub fn map(&self, mut f: impl FnMut(f32) -> f32) -> Self {
        Self { height: self.height, width: self.width, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<Self> {
        check_window(self.height, self.width, x0, y0, w, h)?;
        Ok(Self { height: h, width: w, data: crop_rows(&self.data, self.width, 3, x0, y0, w, h) })
    }

    pub fn channel_means(&self) -> [f64; 3] {
        let mut sums = [0.0f64; 3];
        for px in self.data.chunks_exact(3) {
            for c in 0..3 {
                sums[c] += px[c] as f64;
            }
        }
        let n = (self.height * self.width) as f64;
        sums.map(|s| s / n)
    }
}

/// Display-referred 8-bit RGB.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColorImage {
    height: usize,
    width: usize,
    data: Vec<u8>,
}

impl ColorImage {
    pub fn new(height: usize, width: usize, data: Vec<u8>) -> Result<Self> {
        check_len(height, width, 3, data.len())?;
        Ok(Self { height, width, data })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> u8 {
        self.data[(y * self.width + x) * 3 + c]
    }

    /// Code values mapped to `[0, 1]` by dividing by 255.
    pub fn to_linear(&self) -> LinearImage {
        LinearImage::from_raw(self.height, self.width, self.data.iter().map(|&v| v as f32 / 255.0).collect())
    }

    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<Self> {
        check_window(self.height, self.width, x0, y0, w, h)?;
        Ok(Self { height: h, width: w, data: crop_rows(&self.data, self.width, 3, x0, y0, w, h) })
    }
}

/// Single-channel color-filter-array mosaic with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BayerImage {
    height: usize,
    width: usize,
    pattern: BayerPattern,
    data: Vec<f32>,
}

impl BayerImage {
    /// Values are clamped into `[0, 1]`; NaN is rejected.
    pub fn new(height: usize, width: usize, pattern: BayerPattern, mut data: Vec<f32>) -> Result<Self> {
        check_len(height, width, 1, data.len())?;
        if !height.is_multiple_of(2) || !width.is_multiple_of(2) {
            bail!(InvalidDimensions, "Bayer mosaic must have even sides, got {height}x{width}");
        }
        if data.iter().any(|v| v.is_nan()) {
            bail!(InvalidParameter, "mosaic contains NaN");
        }
        for v in &mut data {
            *v = v.clamp(0.0, 1.0);
        }
        Ok(Self { height, width, pattern, data })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pattern(&self) -> BayerPattern {
        self.pattern
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> f32 {
        self.data[y * self.width + x]
    }

    /// Crops a window; the offset must be even so the pattern phase is kept.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Result<Self> {
        check_window(self.height, self.width, x0, y0, w, h)?;
        if !x0.is_multiple_of(2) || !y0.is_multiple_of(2) {
            bail!(InvalidParameter, "Bayer crop offset ({x0}, {y0}) would shift the pattern phase");
        }
        Self::new(h, w, self.pattern, crop_rows(&self.data, self.width, 1, x0, y0, w, h))
    }
}

/// One image channel, used by the per-channel guided filter.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f32>,
}

impl Plane {
    pub fn new(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        check_len(height, width, 1, data.len())?;
        Ok(Self { height, width, data })
    }

    pub fn filled(height: usize, width: usize, value: f32) -> Self {
        Self { height, width, data: alloc::vec![value; height * width] }
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> f32 {
        self.data[y * self.width + x]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn ramp(h: usize, w: usize) -> LinearImage {
        LinearImage::from_fn(h, w, |y, x, c| (y * 100 + x * 3 + c) as f32 / 1000.0)
    }

    #[test]
    fn crop_full_extent_is_identity() {
        let img = ramp(5, 7);
        assert_eq!(img.crop(0, 0, 7, 5).unwrap(), img);
    }

    #[test]
    fn crop_single_pixel_of_ramp() {
        let img = ramp(6, 6);
        let c = img.crop(2, 3, 1, 1).unwrap();
        // x0 = 2, y0 = 3
        for ch in 0..3 {
            assert_eq!(c.get(0, 0, ch), (3 * 100 + 2 * 3 + ch) as f32 / 1000.0);
        }
    }

    #[test]
    fn crop_out_of_bounds_rejected() {
        let img = ramp(4, 4);
        assert!(matches!(img.crop(2, 2, 3, 1), Err(Error::OutOfBounds(_))));
    }

    #[test]
    fn bayer_crop_at_odd_offset_rejected() {
        let raw = BayerImage::new(4, 4, BayerPattern::Rggb, vec![0.5; 16]).unwrap();
        assert!(raw.crop(1, 0, 2, 2).is_err());
        assert!(raw.crop(0, 1, 2, 2).is_err());
        assert!(raw.crop(2, 2, 2, 2).is_ok());
    }

    #[test]
    fn bayer_requires_even_sides() {
        assert!(BayerImage::new(3, 4, BayerPattern::Rggb, vec![0.0; 12]).is_err());
    }

    #[test]
    fn pattern_offsets() {
        assert_eq!(BayerPattern::Rggb.red_offset(), (0, 0));
        assert_eq!(BayerPattern::Rggb.blue_offset(), (1, 1));
        assert_eq!(BayerPattern::Rggb.green_offsets(), [(0, 1), (1, 0)]);
        assert_eq!(BayerPattern::Gbrg.red_offset(), (1, 0));
        assert_eq!(BayerPattern::Gbrg.green_offsets(), [(1, 1), (0, 0)]);
        for p in BayerPattern::ALL {
            assert_eq!(p.as_str().parse::<BayerPattern>().unwrap(), p);
        }
    }

    #[test]
    fn linear_rejects_nan() {
        assert!(LinearImage::new(1, 1, vec![0.0, f32::NAN, 0.0]).is_err());
    }
}
