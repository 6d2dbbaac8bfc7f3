//! PNG (8/16-bit), binary 16-bit PGM and the Bayer pattern sidecar.
//!
//! | file                      | loads as      |
//! |---------------------------|---------------|
//! | 8-bit RGB PNG             | `ColorImage`  |
//! | 16-bit RGB PNG            | `LinearImage` |
//! | grayscale PNG + sidecar   | `BayerImage`  |
//! | 16-bit P5 PGM + sidecar   | `BayerImage`  |
//!
//! Codes are divided by the maximum code value. The sidecar of `x.pgm` is
//! `x.pgm.json` holding `{"pattern":"RGGB"}`.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use png::{BitDepth, ColorType, Transformations};
use rawsr_core::{BayerImage, BayerPattern, ColorImage, LinearImage};
use serde::{Deserialize, Serialize};

use crate::error::invalid;

#[derive(Debug, Clone, PartialEq)]
pub enum Image {
    Linear(LinearImage),
    Color(ColorImage),
    Bayer(BayerImage),
}

impl Image {
    pub fn kind(&self) -> &'static str {
        match self {
            Image::Linear(_) => "16-bit linear RGB",
            Image::Color(_) => "8-bit RGB",
            Image::Bayer(_) => "Bayer mosaic",
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        match self {
            Image::Linear(i) => (i.height(), i.width()),
            Image::Color(i) => (i.height(), i.width()),
            Image::Bayer(i) => (i.height(), i.width()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sidecar {
    pub pattern: BayerPattern,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn read_sidecar(path: &Path) -> Result<BayerPattern> {
    let side = sidecar_path(path);
    let text = fs::read_to_string(&side).map_err(|_| invalid!("{}: Bayer data needs a sidecar at {}", path.display(), side.display()))?;
    let s: Sidecar = serde_json::from_str(&text).map_err(|e| invalid!("{}: {e}", side.display()))?;
    Ok(s.pattern)
}

fn is_pgm(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm"))
}

pub fn load_image(path: &Path) -> Result<Image> {
    if !path.is_file() {
        return Err(invalid!("{}: no such file", path.display()));
    }
    if is_pgm(path) {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        let (w, h, maxval, codes) = decode_pgm16(&bytes).map_err(|e| invalid!("{}: {e}", path.display()))?;
        let data = codes.iter().map(|&c| c as f32 / maxval as f32).collect();
        let pattern = read_sidecar(path)?;
        return Ok(Image::Bayer(BayerImage::new(h, w, pattern, data)?));
    }
    load_png(path)
}

fn load_png(path: &Path) -> Result<Image> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut decoder = png::Decoder::new(BufReader::new(file));
    decoder.set_transformations(Transformations::IDENTITY);
    let mut reader = decoder.read_info().map_err(|e| invalid!("{}: not a readable PNG ({e})", path.display()))?;
    let mut buf = vec![0; reader.output_buffer_size().ok_or_else(|| invalid!("{}: image too large", path.display()))?];
    let info = reader.next_frame(&mut buf).map_err(|e| invalid!("{}: {e}", path.display()))?;
    buf.truncate(info.buffer_size());
    let (w, h) = (info.width as usize, info.height as usize);
    let samples16 = || buf.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]]) as f32 / 65535.0).collect::<Vec<_>>();
    match (info.color_type, info.bit_depth) {
        (ColorType::Rgb, BitDepth::Eight) => Ok(Image::Color(ColorImage::new(h, w, buf)?)),
        (ColorType::Rgb, BitDepth::Sixteen) => Ok(Image::Linear(LinearImage::new(h, w, samples16())?)),
        (ColorType::Grayscale, BitDepth::Sixteen) => {
            let data = samples16();
            Ok(Image::Bayer(BayerImage::new(h, w, read_sidecar(path)?, data)?))
        }
        (ColorType::Grayscale, BitDepth::Eight) => {
            let data = buf.iter().map(|&c| c as f32 / 255.0).collect();
            Ok(Image::Bayer(BayerImage::new(h, w, read_sidecar(path)?, data)?))
        }
        (c, d) => Err(invalid!("{}: unsupported PNG layout {c:?} at {d:?}; expected 8/16-bit RGB or grayscale", path.display())),
    }
}

pub fn load_linear(path: &Path) -> Result<LinearImage> {
    match load_image(path)? {
        Image::Linear(i) => Ok(i),
        other => Err(invalid!("{}: expected a 16-bit linear RGB PNG, found {}", path.display(), other.kind())),
    }
}

pub fn load_color(path: &Path) -> Result<ColorImage> {
    match load_image(path)? {
        Image::Color(i) => Ok(i),
        other => Err(invalid!("{}: expected an 8-bit RGB PNG, found {}", path.display(), other.kind())),
    }
}

pub fn load_bayer(path: &Path) -> Result<BayerImage> {
    match load_image(path)? {
        Image::Bayer(i) => Ok(i),
        other => Err(invalid!("{}: expected Bayer data, found {}", path.display(), other.kind())),
    }
}

/// RGB in `[0, 1]` from either a linear or an 8-bit file.
pub fn load_rgb(path: &Path) -> Result<LinearImage> {
    match load_image(path)? {
        Image::Linear(i) => Ok(i),
        Image::Color(i) => Ok(i.to_linear()),
        Image::Bayer(_) => Err(invalid!("{}: expected an RGB image, found Bayer data", path.display())),
    }
}

/// `round(v * 65535)`, clamped.
pub fn code16(v: f32) -> u16 {
    (v * 65535.0 + 0.5).floor().clamp(0.0, 65535.0) as u16
}

fn write_png(path: &Path, w: usize, h: usize, color: ColorType, depth: BitDepth, data: &[u8]) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut enc = png::Encoder::new(BufWriter::new(file), w as u32, h as u32);
    enc.set_color(color);
    enc.set_depth(depth);
    let mut writer = enc.write_header()?;
    writer.write_image_data(data)?;
    writer.finish()?;
    Ok(())
}

fn be16(values: &[f32]) -> Vec<u8> {
    values.iter().flat_map(|&v| code16(v).to_be_bytes()).collect()
}

pub fn save_color(img: &ColorImage, path: &Path) -> Result<()> {
    write_png(path, img.width(), img.height(), ColorType::Rgb, BitDepth::Eight, img.data())
}

pub fn save_linear(img: &LinearImage, path: &Path) -> Result<()> {
    write_png(path, img.width(), img.height(), ColorType::Rgb, BitDepth::Sixteen, &be16(img.data()))
}

/// 16-bit PGM when the extension is `pgm`, 16-bit grayscale PNG otherwise,
/// plus the pattern sidecar.
pub fn save_bayer(img: &BayerImage, path: &Path) -> Result<()> {
    if is_pgm(path) {
        let codes: Vec<u16> = img.data().iter().map(|&v| code16(v)).collect();
        let mut f = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
        f.write_all(&encode_pgm16(img.width(), img.height(), &codes))?;
        f.flush()?;
    } else {
        write_png(path, img.width(), img.height(), ColorType::Grayscale, BitDepth::Sixteen, &be16(img.data()))?;
    }
    let side = serde_json::to_string(&Sidecar { pattern: img.pattern() })?;
    fs::write(sidecar_path(path), side + "\n")?;
    Ok(())
}

pub fn save_image(img: &Image, path: &Path) -> Result<()> {
    match img {
        Image::Linear(i) => save_linear(i, path),
        Image::Color(i) => save_color(i, path),
        Image::Bayer(i) => save_bayer(i, path),
    }
}

pub fn encode_pgm16(width: usize, height: usize, codes: &[u16]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n65535\n").into_bytes();
    out.extend(codes.iter().flat_map(|c| c.to_be_bytes()));
    out
}

/// Parses a binary PGM with a 16-bit maximum value. Returns
/// `(width, height, maxval, samples)`.
pub fn decode_pgm16(bytes: &[u8]) -> std::result::Result<(usize, usize, u16, Vec<u16>), String> {
    if !bytes.starts_with(b"P5") {
        return Err("not a binary PGM (missing P5 magic)".into());
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in &mut fields {
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                _ => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        *field = std::str::from_utf8(&bytes[start..pos]).ok().and_then(|s| s.parse().ok()).ok_or("malformed PGM header")?;
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err("malformed PGM header".into());
    }
    pos += 1;
    let [w, h, maxval] = fields;
    if !(256..=65535).contains(&maxval) {
        return Err(format!("unsupported PGM maxval {maxval}; only 16-bit files are read"));
    }
    let body = &bytes[pos..];
    if body.len() != 2 * w * h {
        return Err(format!("PGM body holds {} bytes, expected {}", body.len(), 2 * w * h));
    }
    let codes: Vec<u16> = body.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect();
    if codes.iter().any(|&c| c as usize > maxval) {
        return Err(format!("PGM sample exceeds maxval {maxval}"));
    }
    Ok((w, h, maxval as u16, codes))
}
