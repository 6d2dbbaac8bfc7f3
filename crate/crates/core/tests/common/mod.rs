#![allow(dead_code)]

use rawsr_core::rng;
use rawsr_core::{BayerImage, BayerPattern, LinearImage};

pub fn random_image(h: usize, w: usize, seed: u64) -> LinearImage {
    let mut r = rng::stream(seed, 0xabc);
    LinearImage::new(h, w, (0..h * w * 3).map(|_| rng::uniform(&mut r) as f32).collect()).unwrap()
}

pub fn random_mosaic(h: usize, w: usize, pattern: BayerPattern, seed: u64) -> BayerImage {
    let mut r = rng::stream(seed, 0xdef);
    BayerImage::new(h, w, pattern, (0..h * w).map(|_| rng::uniform(&mut r) as f32).collect()).unwrap()
}

pub fn sorted(mut v: Vec<f32>) -> Vec<f32> {
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

pub fn max_abs_diff(a: &[f32], b: &[f32]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| (x as f64 - y as f64).abs()).fold(0.0, f64::max)
}
