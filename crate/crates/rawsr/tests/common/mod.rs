#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rawsr_core::LinearImage;

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_rawsr")
}

pub fn rawsr(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("binary runs")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Smooth color gradients with a little texture, in `[0.05, 0.95]`.
pub fn smooth_source(h: usize, w: usize, seed: u64) -> LinearImage {
    let phase = seed as f32 * 0.7;
    LinearImage::from_fn(h, w, |y, x, c| {
        let t = (y as f32 * 0.11 + x as f32 * 0.07 + c as f32 + phase).sin() * 0.3 + (x as f32 * 0.31 - y as f32 * 0.17 + phase).cos() * 0.1;
        0.5 + t
    })
}

/// Writes `n` 16-bit linear sources of size `h x w` into `dir`.
pub fn write_sources(dir: &Path, n: usize, h: usize, w: usize) -> Vec<PathBuf> {
    std::fs::create_dir_all(dir).unwrap();
    (0..n)
        .map(|i| {
            let p = dir.join(format!("src{i}.png"));
            rawsr::imageio::save_linear(&smooth_source(h, w, i as u64), &p).unwrap();
            p
        })
        .collect()
}
