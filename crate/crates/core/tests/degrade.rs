mod common;

use common::{max_abs_diff, random_image};
use proptest::prelude::*;
use rawsr_core::degrade::*;
use rawsr_core::rng;
use rawsr_core::LinearImage;

fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let mut i = i;
    while i < 0 || i >= n {
        i = if i < 0 { -i } else { 2 * (n - 1) - i };
    }
    i as usize
}

/// Textbook convolution: out(y,x) = sum k(i,j) in(y - i + r, x - j + r).
fn convolve_oracle(img: &LinearImage, k: &Kernel) -> Vec<f64> {
    let (h, w, r) = (img.height(), img.width(), k.radius() as isize);
    let mut out = Vec::new();
    for y in 0..h {
        for x in 0..w {
            for c in 0..3 {
                let mut acc = 0.0f64;
                for i in 0..k.size() {
                    for j in 0..k.size() {
                        let sy = reflect(y as isize - i as isize + r, h);
                        let sx = reflect(x as isize - j as isize + r, w);
                        acc += k.at(i, j) as f64 * img.get(sy, sx, c) as f64;
                    }
                }
                out.push(acc);
            }
        }
    }
    out
}

fn random_kernel(size: usize, seed: u64) -> Kernel {
    let mut r = rng::stream(seed, 5);
    let raw: Vec<f64> = (0..size * size).map(|_| rng::uniform(&mut r)).collect();
    let total: f64 = raw.iter().sum();
    Kernel::new(size, raw.iter().map(|v| (v / total) as f32).collect()).unwrap()
}

#[test]
fn convolution_matches_nested_loops() {
    for seed in 0..5 {
        let img = random_image(8, 8, seed);
        let k = random_kernel(3, seed);
        let fast = convolve(&img, &k).unwrap();
        let oracle: Vec<f32> = convolve_oracle(&img, &k).iter().map(|&v| v as f32).collect();
        assert!(max_abs_diff(fast.data(), &oracle) < 1e-6);
    }
    // An asymmetric kernel distinguishes convolution from correlation.
    let mut w = vec![0.0f32; 9];
    w[5] = 1.0;
    let shift = Kernel::new(3, w).unwrap();
    let img = random_image(6, 6, 9);
    let out = convolve(&img, &shift).unwrap();
    assert_eq!(out.get(3, 3, 0), img.get(3, 2, 0));
}

#[test]
fn constant_images_pass_through_blur() {
    let img = LinearImage::filled(16, 16, [0.3, 0.6, 0.9]);
    let out = convolve(&img, &disk_kernel(2.5).unwrap()).unwrap();
    assert!(max_abs_diff(out.data(), img.data()) < 1e-6);
}

#[test]
fn disk_matches_finer_rasterization() {
    let k = disk_kernel(2.0).unwrap();
    let fine = disk_kernel_supersampled(2.0, 256).unwrap();
    assert!(max_abs_diff(k.weights(), fine.weights()) < 2e-3);
}

#[test]
fn disk_kernel_area_fraction_oracle() {
    // Independent rasterization: count 256x256 sub-samples per cell.
    let r = 1.5f64;
    let k = disk_kernel(r).unwrap();
    let size = k.size();
    let c = (size / 2) as f64;
    let n = 256;
    let mut mass = vec![0.0f64; size * size];
    for y in 0..size {
        for x in 0..size {
            let mut inside = 0;
            for sy in 0..n {
                for sx in 0..n {
                    let py = y as f64 - 0.5 + (sy as f64 + 0.5) / n as f64 - c;
                    let px = x as f64 - 0.5 + (sx as f64 + 0.5) / n as f64 - c;
                    if px * px + py * py <= r * r {
                        inside += 1;
                    }
                }
            }
            mass[y * size + x] = inside as f64;
        }
    }
    let total: f64 = mass.iter().sum();
    let oracle: Vec<f32> = mass.iter().map(|m| (m / total) as f32).collect();
    assert!(max_abs_diff(k.weights(), &oracle) < 2e-3);
}

#[test]
fn motion_kernel_support_and_determinism() {
    let k = motion_kernel(7, 64, 42).unwrap();
    assert_eq!(k.size(), 7);
    assert!((k.weights().iter().map(|&w| w as f64).sum::<f64>() - 1.0).abs() < 1e-6);
    assert!(k.weights().iter().all(|&w| w >= 0.0));
    assert_eq!(k, motion_kernel(7, 64, 42).unwrap());
    assert_ne!(k, motion_kernel(7, 64, 43).unwrap());
}

#[test]
fn downsample_matches_block_means() {
    let img = random_image(8, 8, 4);
    let d = downsample(&img, 2).unwrap();
    for y in 0..4 {
        for x in 0..4 {
            for c in 0..3 {
                let m = (img.get(2 * y, 2 * x, c) + img.get(2 * y, 2 * x + 1, c) + img.get(2 * y + 1, 2 * x, c) + img.get(2 * y + 1, 2 * x + 1, c)) * 0.25;
                assert_eq!(d.get(y, x, c), m);
            }
        }
    }
    let blocks = LinearImage::from_fn(2, 2, |y, _, _| y as f32);
    assert_eq!(downsample(&blocks, 2).unwrap().pixel(0, 0), [0.5; 3]);
    assert!(downsample(&random_image(6, 6, 1), 4).is_err());
}

#[test]
fn noise_variance_matches_model() {
    let params = NoiseParams { sigma1_sq: 1e-4, sigma2_sq: 1e-6, seed: 77 };
    let n = 1_000_000;
    let samples = vec![0.5f32; n];
    let noise = noise_values(&samples, &params).unwrap();
    let mean = noise.iter().sum::<f64>() / n as f64;
    let var = noise.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    assert!((var / 5.1e-5 - 1.0).abs() < 0.03, "{var}");
}

#[test]
fn noise_is_deterministic_and_clamped() {
    let img = random_image(16, 16, 2);
    let p = NoiseParams { sigma1_sq: 0.5, sigma2_sq: 0.1, seed: 1 };
    let a = add_noise(&img, &p).unwrap();
    assert_eq!(a, add_noise(&img, &p).unwrap());
    assert!(a.data().iter().all(|v| (0.0..=1.0).contains(v)));
    assert_eq!(add_noise(&img, &NoiseParams::NONE).unwrap(), img);
}

#[test]
fn degradation_draws_stay_in_range() {
    let mut sigma1 = 0.0;
    let n = 10_000;
    for seed in 0..n {
        let d = Degradation::sample(seed, 0);
        let r = d.defocus_radius.unwrap();
        assert!((1.0..=5.0).contains(&r));
        assert!(MOTION_SIZES.contains(&d.motion.unwrap().size));
        assert!(d.noise.sigma1_sq <= SIGMA1_MAX * SIGMA1_MAX && d.noise.sigma2_sq <= SIGMA2_MAX * SIGMA2_MAX);
        sigma1 += d.noise.sigma1_sq.sqrt();
    }
    assert!((sigma1 / n as f64 / 5e-3 - 1.0).abs() < 0.05);
    let (a, b, c) = sample_degradation(3).unwrap();
    assert_eq!((a, b, c), sample_degradation(3).unwrap());
}

#[test]
fn blur_preserves_mean_on_large_images() {
    let smooth = LinearImage::from_fn(64, 64, |y, x, c| 0.5 + 0.3 * ((x as f32 * 0.3 + c as f32).sin() * (y as f32 * 0.2).cos()));
    for (img, k) in [(smooth.clone(), disk_kernel(3.0).unwrap()), (smooth, motion_kernel(9, 64, 5).unwrap()), (random_image(256, 256, 8), disk_kernel(5.0).unwrap())] {
        let out = convolve(&img, &k).unwrap();
        for c in 0..3 {
            let d = (out.channel_means()[c] - img.channel_means()[c]).abs();
            assert!(d < 1e-4);
        }
    }
}

#[test]
fn composed_kernels_match_sequential_blur() {
    let img = random_image(24, 24, 6);
    let (k1, k2) = (disk_kernel(1.5).unwrap(), motion_kernel(5, 64, 2).unwrap());
    let seq = convolve(&convolve(&img, &k1).unwrap(), &k2).unwrap();
    let once = convolve(&img, &k1.compose(&k2)).unwrap();
    let margin = (k1.size() + k2.size()) / 2;
    for y in margin..24 - margin {
        for x in margin..24 - margin {
            for c in 0..3 {
                assert!((seq.get(y, x, c) - once.get(y, x, c)).abs() < 1e-4);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn convolution_is_linear(s1 in 0u64..500, s2 in 0u64..500, a in -2.0f32..2.0, b in -2.0f32..2.0) {
        let (x, y) = (random_image(10, 9, s1), random_image(10, 9, s2));
        let k = random_kernel(5, s1 ^ s2);
        let combo = LinearImage::new(10, 9, x.data().iter().zip(y.data()).map(|(p, q)| a * p + b * q).collect()).unwrap();
        let lhs = convolve(&combo, &k).unwrap();
        let (cx, cy) = (convolve(&x, &k).unwrap(), convolve(&y, &k).unwrap());
        let rhs: Vec<f32> = cx.data().iter().zip(cy.data()).map(|(p, q)| a * p + b * q).collect();
        prop_assert!(max_abs_diff(lhs.data(), &rhs) < 1e-5);
    }

    #[test]
    fn noise_variance_per_intensity(x in 0.05f32..0.95, s1 in 0.0f64..1e-2, s2 in 0.0f64..1e-3, seed in 0u64..100) {
        let p = NoiseParams { sigma1_sq: s1 * s1, sigma2_sq: s2 * s2, seed };
        let n = 100_000;
        let noise = noise_values(&vec![x; n], &p).unwrap();
        let var = noise.iter().map(|v| v * v).sum::<f64>() / n as f64;
        let expect = s1 * s1 * x as f64 + s2 * s2;
        prop_assume!(expect > 0.0);
        prop_assert!((var / expect - 1.0).abs() < 0.05);
    }
}
