//! Bayer-domain operations: mosaicing, four-channel packing, virtual-sensel
//! linearization and bilinear demosaicing.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::image::{BayerImage, BayerPattern, LinearImage};

/// Mirror index `i` into `0..n` without repeating the edge sample
/// (`-1 -> 1`, `n -> n - 2`). Parity is preserved, so Bayer phases survive
/// reflection.
#[inline]
pub(crate) fn reflect101(mut i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let n = n as isize;
    loop {
        if i < 0 {
            i = -i;
        } else if i >= n {
            i = 2 * (n - 1) - i;
        } else {
            return i as usize;
        }
    }
}

fn require_even(height: usize, width: usize) -> Result<()> {
    if !height.is_multiple_of(2) || !width.is_multiple_of(2) {
        bail!(InvalidDimensions, "Bayer operations need even sides, got {height}x{width}");
    }
    Ok(())
}

/// Four-channel half-resolution view of a mosaic.
///
/// Channel order is `[R, G on the red row, B, G on the blue row]`, stored
/// pixel-interleaved like [`LinearImage`].
#[derive(Debug, Clone, PartialEq)]
pub struct PackedRaw {
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl PackedRaw {
    pub fn new(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 || data.len() != height * width * 4 {
            bail!(ShapeMismatch, "packed raw {height}x{width}x4 needs {} values, got {}", height * width * 4, data.len());
        }
        Ok(Self { height, width, data })
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

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * 4 + c]
    }
}

/// Samples each pixel's pattern-selected channel (`f_Bayer`).
pub fn mosaic(img: &LinearImage, pattern: BayerPattern) -> Result<BayerImage> {
    let (h, w) = (img.height(), img.width());
    require_even(h, w)?;
    let mut data = Vec::with_capacity(h * w);
    for y in 0..h {
        for x in 0..w {
            data.push(img.get(y, x, pattern.channel_at(y, x)));
        }
    }
    BayerImage::new(h, w, pattern, data)
}

fn block_offsets(pattern: BayerPattern) -> [(usize, usize); 4] {
    let [g_r, g_b] = pattern.green_offsets();
    [pattern.red_offset(), g_r, pattern.blue_offset(), g_b]
}

pub fn pack(raw: &BayerImage) -> Result<PackedRaw> {
    require_even(raw.height(), raw.width())?;
    let (h, w) = (raw.height() / 2, raw.width() / 2);
    let offsets = block_offsets(raw.pattern());
    let mut data = Vec::with_capacity(h * w * 4);
    for by in 0..h {
        for bx in 0..w {
            for &(dy, dx) in &offsets {
                data.push(raw.get(2 * by + dy, 2 * bx + dx));
            }
        }
    }
    PackedRaw::new(h, w, data)
}

pub fn unpack(packed: &PackedRaw, pattern: BayerPattern) -> BayerImage {
    let (h, w) = (packed.height * 2, packed.width * 2);
    let offsets = block_offsets(pattern);
    let mut data = vec![0.0f32; h * w];
    for by in 0..packed.height {
        for bx in 0..packed.width {
            for (c, &(dy, dx)) in offsets.iter().enumerate() {
                data[(2 * by + dy) * w + 2 * bx + dx] = packed.get(by, bx, c);
            }
        }
    }
    BayerImage::new(h, w, pattern, data).expect("packed values come from a valid mosaic")
}

/// Translates a plane by a fraction of a sample along each axis with
/// bilinear weights: `out(i) = (1 - |s|) in(i) + |s| in(i + sign(s))`.
fn shift_plane(plane: &[f32], h: usize, w: usize, sy: f32, sx: f32) -> Vec<f32> {
    let step = |s: f32| if s >= 0.0 { 1isize } else { -1 };
    let (ay, ax) = (sy.abs(), sx.abs());
    let (dy, dx) = (step(sy), step(sx));
    let mut out = vec![0.0f32; h * w];
    for y in 0..h {
        let y1 = reflect101(y as isize + dy, h);
        for x in 0..w {
            let x1 = reflect101(x as isize + dx, w);
            let top = (1.0 - ax) * plane[y * w + x] + ax * plane[y * w + x1];
            let bottom = (1.0 - ax) * plane[y1 * w + x] + ax * plane[y1 * w + x1];
            out[y * w + x] = (1.0 - ay) * top + ay * bottom;
        }
    }
    out
}

/// Treats every 2x2 Bayer block as one "virtual sensel" holding all three
/// colors, yielding a half-resolution linear image.
///
/// Green is the mean of the two green samples; red and blue are resampled
/// by a quarter of a block (half a mosaic pixel) so that every channel is
/// sampled at the block center.
pub fn linearize_virtual_sensel(raw: &BayerImage) -> Result<LinearImage> {
    require_even(raw.height(), raw.width())?;
    let (h, w) = (raw.height() / 2, raw.width() / 2);
    let pattern = raw.pattern();
    let (ry, rx) = pattern.red_offset();
    let (by, bx) = pattern.blue_offset();
    let [g1, g2] = pattern.green_offsets();

    let mut red = Vec::with_capacity(h * w);
    let mut blue = Vec::with_capacity(h * w);
    let mut green = Vec::with_capacity(h * w);
    for y in 0..h {
        for x in 0..w {
            red.push(raw.get(2 * y + ry, 2 * x + rx));
            blue.push(raw.get(2 * y + by, 2 * x + bx));
            green.push(0.5 * (raw.get(2 * y + g1.0, 2 * x + g1.1) + raw.get(2 * y + g2.0, 2 * x + g2.1)));
        }
    }

    // A sample at block offset d (0 or 1) sits (d - 0.5) / 2 blocks from the
    // center; resampling at the center moves toward the opposite side.
    let phase = |d: usize| if d == 0 { 0.25f32 } else { -0.25 };
    let red = shift_plane(&red, h, w, phase(ry), phase(rx));
    let blue = shift_plane(&blue, h, w, phase(by), phase(bx));

    let mut data = Vec::with_capacity(h * w * 3);
    for i in 0..h * w {
        data.extend_from_slice(&[red[i], green[i], blue[i]]);
    }
    LinearImage::new(h, w, data)
}

/// Full-resolution bilinear demosaic.
///
/// The native channel of each sensel is copied; a missing channel is the
/// mean of the orthogonal neighbors carrying it or, when there are none,
/// of the diagonal neighbors. Borders mirror without edge repetition, which
/// keeps the pattern phase.
pub fn demosaic_bilinear(raw: &BayerImage) -> Result<LinearImage> {
    let (h, w) = (raw.height(), raw.width());
    require_even(h, w)?;
    let pattern = raw.pattern();
    const ORTHO: [(isize, isize); 4] = [(-1, 0), (1, 0), (0, -1), (0, 1)];
    const DIAG: [(isize, isize); 4] = [(-1, -1), (-1, 1), (1, -1), (1, 1)];

    let mut data = Vec::with_capacity(h * w * 3);
    for y in 0..h {
        for x in 0..w {
            let native = pattern.channel_at(y, x);
            for c in 0..3 {
                if c == native {
                    data.push(raw.get(y, x));
                    continue;
                }
                let average = |dirs: &[(isize, isize)]| {
                    let mut sum = 0.0f32;
                    let mut n = 0u32;
                    for &(dy, dx) in dirs {
                        // Reflection preserves parity, so the color test can
                        // use the unreflected coordinates.
                        if pattern.channel_at((y as isize + dy) as usize & 1, (x as isize + dx) as usize & 1) == c {
                            let yy = reflect101(y as isize + dy, h);
                            let xx = reflect101(x as isize + dx, w);
                            sum += raw.get(yy, xx);
                            n += 1;
                        }
                    }
                    (n > 0).then(|| sum / n as f32)
                };
                let v = average(&ORTHO).or_else(|| average(&DIAG)).expect("Bayer neighborhoods contain every color");
                data.push(v);
            }
        }
    }
    LinearImage::new(h, w, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw2x2(vals: [f32; 4]) -> BayerImage {
        BayerImage::new(2, 2, BayerPattern::Rggb, vals.to_vec()).unwrap()
    }

    #[test]
    fn reflect_without_edge_repeat() {
        assert_eq!(reflect101(-1, 5), 1);
        assert_eq!(reflect101(-2, 5), 2);
        assert_eq!(reflect101(5, 5), 3);
        assert_eq!(reflect101(6, 5), 2);
        assert_eq!(reflect101(3, 1), 0);
    }

    #[test]
    fn mosaic_constant_gray() {
        let img = LinearImage::filled(4, 6, [0.5; 3]);
        let raw = mosaic(&img, BayerPattern::Gbrg).unwrap();
        assert!(raw.data().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn mosaic_selects_pattern_channel() {
        let img = LinearImage::filled(2, 2, [0.2, 0.4, 0.8]);
        let raw = mosaic(&img, BayerPattern::Rggb).unwrap();
        assert_eq!(raw.data(), &[0.2, 0.4, 0.4, 0.8]);
    }

    #[test]
    fn mosaic_rejects_odd() {
        let img = LinearImage::filled(3, 2, [0.0; 3]);
        assert!(mosaic(&img, BayerPattern::Rggb).is_err());
    }

    #[test]
    fn pack_block_permutation() {
        let (a, b, c, d) = (0.1, 0.2, 0.3, 0.4);
        let p = pack(&raw2x2([a, b, c, d])).unwrap();
        assert_eq!(p.data(), &[a, b, d, c]);
    }

    #[test]
    fn unpack_block_layout() {
        let p = PackedRaw::new(1, 1, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let raw = unpack(&p, BayerPattern::Rggb);
        assert_eq!(raw.data(), &[0.1, 0.2, 0.4, 0.3]);
    }

    #[test]
    fn virtual_sensel_single_block() {
        let lin = linearize_virtual_sensel(&raw2x2([0.2, 0.4, 0.6, 0.8])).unwrap();
        let px = lin.pixel(0, 0);
        assert!((px[0] - 0.2).abs() < 1e-7);
        assert!((px[1] - 0.5).abs() < 1e-7);
        assert!((px[2] - 0.8).abs() < 1e-7);
    }

    #[test]
    fn virtual_sensel_constant() {
        let raw = BayerImage::new(8, 8, BayerPattern::Bggr, vec![0.5; 64]).unwrap();
        let lin = linearize_virtual_sensel(&raw).unwrap();
        assert!(lin.data().iter().all(|&v| (v - 0.5).abs() < 1e-7));
    }

    #[test]
    fn demosaic_constant() {
        let raw = BayerImage::new(6, 8, BayerPattern::Grbg, vec![0.3; 48]).unwrap();
        let rgb = demosaic_bilinear(&raw).unwrap();
        assert!(rgb.data().iter().all(|&v| (v - 0.3).abs() < 1e-7));
    }

    #[test]
    fn demosaic_recovers_per_channel_constants() {
        for pattern in BayerPattern::ALL {
            let img = LinearImage::filled(6, 6, [0.1, 0.6, 0.9]);
            let rgb = demosaic_bilinear(&mosaic(&img, pattern).unwrap()).unwrap();
            for (a, b) in rgb.data().iter().zip(img.data()) {
                assert!((a - b).abs() < 1e-6);
            }
        }
    }
}
