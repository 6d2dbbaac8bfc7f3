//! One PASS/FAIL line per acceptance criterion. Exits nonzero if any fails.

mod common;

use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use common::{code, rawsr, s, write_sources};
use rawsr_core::bayer::{demosaic_bilinear, mosaic};
use rawsr_core::degrade::{downsample, noise_values, Degradation, NoiseParams};
use rawsr_core::guided::guided_filter;
use rawsr_core::isp::{develop, tone_value, IspConfig, Tone};
use rawsr_core::nets::check::{check_named_net, NETS, NET_STEP};
use rawsr_core::nets::{raw_tensor, tensor_image, NetConfig, RawSrModel};
use rawsr_core::nn::gradcheck::{check_named_layer, max_error, GradCheckOptions, LAYERS};
use rawsr_core::nn::{pixel_shuffle, Conv2d, Layer, LeakyRelu, ParamStore};
use rawsr_core::pipeline::*;
use rawsr_core::rng::{self, Stage};
use rawsr_core::{BayerImage, BayerPattern, ColorImage, LinearImage, Plane, Result};

type Outcome = std::result::Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(limit: Duration, start: Instant, detail: String) -> Outcome {
    let spent = start.elapsed();
    ensure(spent <= limit, format!("{detail}; {:.1}s of {}s", spent.as_secs_f64(), limit.as_secs()))
}

fn random_image(h: usize, w: usize, seed: u64) -> LinearImage {
    let mut r = rng::stream(seed, 0xacc);
    LinearImage::new(h, w, (0..h * w * 3).map(|_| rng::uniform(&mut r) as f32).collect()).unwrap()
}

fn random_plane(h: usize, w: usize, seed: u64) -> Plane {
    let mut r = rng::stream(seed, 0xacd);
    Plane::new(h, w, (0..h * w).map(|_| rng::uniform(&mut r) as f32).collect()).unwrap()
}

fn gradients() -> Outcome {
    let start = Instant::now();
    let mut layer_worst = 0.0f64;
    for seed in 0..20 {
        for name in LAYERS {
            let opts = GradCheckOptions { seed, ..Default::default() };
            layer_worst = layer_worst.max(max_error(&check_named_layer::<f64>(name, &opts).map_err(|e| e.to_string())?));
        }
    }
    let mut net_worst = 0.0f64;
    for seed in 0..20 {
        for name in NETS {
            let opts = GradCheckOptions { seed, samples_per_tensor: 2, adaptive: true, step: NET_STEP, ..Default::default() };
            net_worst = net_worst.max(max_error(&check_named_net::<f64>(name, &opts).map_err(|e| e.to_string())?));
        }
    }
    let detail = format!("worst layer rel err {layer_worst:.2e}, worst net rel err {net_worst:.2e}");
    ensure(layer_worst < 1e-4 && net_worst < 1e-3, detail.clone())?;
    within(Duration::from_secs(300), start, detail)
}

fn window(c: usize, r: usize, n: usize) -> std::ops::Range<usize> {
    c.saturating_sub(r)..(c + r + 1).min(n)
}

/// Per-window ridge fit of the guide as an affine function of the source,
/// then mean coefficients over the windows covering each pixel.
fn guided_oracle(guide: &Plane, src: &Plane, r: usize, eps: f64) -> Vec<f64> {
    let (h, w) = (src.height, src.width);
    let mut coef = vec![(0.0, 0.0); h * w];
    for y in 0..h {
        for x in 0..w {
            let (mut n, mut sg, mut ss, mut sss, mut sgs) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for yy in window(y, r, h) {
                for xx in window(x, r, w) {
                    let (g, v) = (guide.get(yy, xx) as f64, src.get(yy, xx) as f64);
                    n += 1.0;
                    sg += g;
                    ss += v;
                    sss += v * v;
                    sgs += g * v;
                }
            }
            let (mg, ms) = (sg / n, ss / n);
            let a = (sgs / n - mg * ms) / (sss / n - ms * ms + eps);
            coef[y * w + x] = (a, mg - a * ms);
        }
    }
    let mut out = Vec::with_capacity(h * w);
    for y in 0..h {
        for x in 0..w {
            let (mut a, mut b, mut n) = (0.0, 0.0, 0.0);
            for yy in window(y, r, h) {
                for xx in window(x, r, w) {
                    a += coef[yy * w + xx].0;
                    b += coef[yy * w + xx].1;
                    n += 1.0;
                }
            }
            out.push(a / n * src.get(y, x) as f64 + b / n);
        }
    }
    out
}

fn guided() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for i in 0..200u64 {
        let (g, src) = (random_plane(16, 16, 2 * i), random_plane(16, 16, 2 * i + 1));
        for r in [1, 2, 3] {
            for eps in [1e-4, 1e-2] {
                let fast = guided_filter(&g, &src, r, eps).map_err(|e| e.to_string())?.output;
                for (f, o) in fast.data.iter().zip(guided_oracle(&g, &src, r, eps)) {
                    worst = worst.max((*f as f64 - o).abs());
                }
            }
        }
    }
    let detail = format!("200 pairs x 3 radii x 2 eps, max abs diff {worst:.2e}");
    ensure(worst < 1e-6, detail.clone())?;
    within(Duration::from_secs(60), start, detail)
}

fn bayer_identity() -> Outcome {
    for seed in 0..20u64 {
        let pattern = BayerPattern::ALL[seed as usize % 4];
        for factor in [2, 4] {
            let x_lin = random_image(32, 48, seed);
            let provenance =
                Provenance { seed, index: 0, factor, pattern, degradation: Degradation::identity(), isp: IspConfig::default() };
            let quad = synthesize_with(x_lin.clone(), provenance).map_err(|e| e.to_string())?;
            let oracle = mosaic(&downsample(&x_lin, factor).unwrap(), pattern).unwrap();
            if quad.x_raw != oracle {
                return Err(format!("raw differs from mosaic of downsample (seed {seed}, {factor}x, {pattern})"));
            }
        }
    }
    for seed in 0..100u64 {
        let pattern = BayerPattern::ALL[seed as usize % 4];
        let (h, w) = (2 * (2 + seed as usize % 7), 2 * (2 + seed as usize % 5));
        let mut r = rng::stream(seed, 0xace);
        let raw = BayerImage::new(h, w, pattern, (0..h * w).map(|_| rng::uniform(&mut r) as f32).collect()).unwrap();
        if mosaic(&demosaic_bilinear(&raw).unwrap(), pattern).unwrap() != raw {
            return Err(format!("mosaic of demosaic changed mosaic {seed}"));
        }
    }
    Ok("40 identity degradations bit-exact, 100 mosaic round trips exact".into())
}

fn noise() -> Outcome {
    let start = Instant::now();
    let (s1, s2) = (1e-4, 1e-6);
    let mut worst = 0.0f64;
    for (i, x) in [0.1f32, 0.5, 0.9].into_iter().enumerate() {
        let n = 1_000_000;
        let z = noise_values(&vec![x; n], &NoiseParams { sigma1_sq: s1, sigma2_sq: s2, seed: 40 + i as u64 }).unwrap();
        let mean = z.iter().sum::<f64>() / n as f64;
        let var = z.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
        worst = worst.max((var / (s1 * x as f64 + s2) - 1.0).abs());
    }
    let detail = format!("worst relative variance error {:.2}%", worst * 100.0);
    ensure(worst < 0.03, detail.clone())?;
    within(Duration::from_secs(30), start, detail)
}

fn srgb() -> Outcome {
    let v = tone_value(0.5, Tone::SrgbGamma);
    let out = develop(&LinearImage::filled(4, 4, [0.5; 3]), &IspConfig::default()).unwrap();
    let codes: Vec<u8> = out.data().to_vec();
    let detail = format!("sRGB(0.5) = {v:.6}, developed gray = {}", codes[0]);
    ensure((v - 0.735_357).abs() <= 1e-5 && codes.iter().all(|&c| c == 188), detail)
}

fn scene(n: usize, seed: u64) -> LinearImage {
    let mut r = rng::stream(seed, 0xacf);
    let f: Vec<f32> = (0..6).map(|_| rng::uniform_in(&mut r, 1.0, 4.0) as f32).collect();
    LinearImage::from_fn(n, n, |y, x, c| {
        let (u, v) = (x as f32 / n as f32, y as f32 / n as f32);
        0.1 + 0.35 * (1.0 + (6.0 * f[c] * u + 4.0 * f[c + 3] * v + c as f32).sin()) * (0.6 + 0.4 * (5.0 * v).cos().abs())
    })
}

fn overfit() -> Outcome {
    let start = Instant::now();
    let data: Vec<SampleQuad> = (0..4)
        .map(|i| synthesize_sample(&Source::Linear(scene(64, i)), 5, i, &SynthConfig::default()))
        .collect::<Result<_>>()
        .map_err(|e| e.to_string())?;
    let mut model = RawSrModel::<f32>::new(NetConfig::toy(), 1).unwrap();
    let desk = TrainSchedule::desk();
    let before = model.export();
    train(&mut model, &data, &TrainSchedule { phase2_iters: 0, ..desk }, 3, |_| {}).map_err(|e| e.to_string())?;
    let color_kept = before.iter().zip(model.export()).filter(|(b, _)| b.0.starts_with("color.")).all(|(b, a)| b.2 == a.2);
    let log = train(&mut model, &data, &TrainSchedule { phase1_iters: 0, phase2_iters: 2000, ..desk }, 4, |_| {})
        .map_err(|e| e.to_string())?;
    let at50 = log[49].loss;
    let last = log.last().unwrap().loss;
    let detail = format!(
        "phase 1 kept color params {}; phase-2 loss {at50:.4} at iter 50, {last:.4} at iter {} ({:.1}x)",
        if color_kept { "bit-identical" } else { "CHANGED" },
        log.len(),
        at50 / last
    );
    ensure(color_kept && last * 5.0 <= at50, detail.clone())?;
    within(Duration::from_secs(1200), start, detail)
}

fn shapes() -> Outcome {
    let mut r = rng::stream(7, 0xad0);
    let raw = BayerImage::new(64, 64, BayerPattern::Rggb, (0..4096).map(|_| rng::uniform(&mut r) as f32).collect()).unwrap();
    let reference = ColorImage::new(64, 64, (0..64 * 64 * 3).map(|i| (i * 37 % 251) as u8).collect()).unwrap();
    let mut dims = Vec::new();
    for (profile, side) in [("toy", 128), ("toy-4x", 256)] {
        let mut model = RawSrModel::<f32>::new(NetConfig::profile(profile).unwrap(), 2).unwrap();
        let out = model.infer(&raw, &reference).map_err(|e| e.to_string())?;
        let got = (out.output.height(), out.output.width(), out.output.data().len() / (out.output.height() * out.output.width()));
        if got != (side, side, 3) {
            return Err(format!("{profile} gave {got:?}"));
        }
        dims.push(format!("{}x{}x3", got.0, got.1));
        model.force_identity_head().unwrap();
        let out = model.infer(&raw, &reference).unwrap();
        if out.output != out.restored {
            return Err(format!("{profile} identity head changed the restoration estimate"));
        }
    }
    Ok(format!("64x64 -> {}, identity head passes the restoration estimate through exactly", dims.join(" and ")))
}

/// Purely local network: packed raw, two 3x3 convolutions, pixel shuffle.
struct LocalModel {
    ps: ParamStore<f32>,
    conv1: Conv2d<f32>,
    act: LeakyRelu<f32>,
    conv2: Conv2d<f32>,
}

impl LocalModel {
    /// Output offset from a tile edge beyond which zero padding has no effect:
    /// two 3x3 layers on the half-resolution packed grid.
    const REACH: usize = 2 * 2;

    fn new() -> Self {
        let mut ps = ParamStore::new();
        let mut r = rng::stage_rng(11, 0, Stage::Init);
        let conv1 = Conv2d::same3(&mut ps, "c1", 4, 8, &mut r);
        let conv2 = Conv2d::same3(&mut ps, "c2", 8, 48, &mut r);
        Self { ps, conv1, act: LeakyRelu::new(0.2), conv2 }
    }
}

impl SrModel for LocalModel {
    fn scale(&self) -> usize {
        2
    }

    fn alignment(&self) -> usize {
        2
    }

    fn forward(&mut self, raw: &BayerImage, _: &ColorImage) -> Result<LinearImage> {
        let x = raw_tensor::<f32>(raw)?;
        let y = self.conv1.forward(&self.ps, &x)?;
        let y = self.act.forward(&self.ps, &y)?;
        let y = self.conv2.forward(&self.ps, &y)?;
        tensor_image(&pixel_shuffle(&y, 4)?, 0)
    }
}

fn seams() -> Outcome {
    let (side, patch, overlap) = (96, 64, 32);
    let mut r = rng::stream(3, 0xad1);
    let raw = BayerImage::new(side, side, BayerPattern::Rggb, (0..side * side).map(|_| rng::uniform(&mut r) as f32).collect()).unwrap();
    let reference = ColorImage::new(side, side, vec![0; side * side * 3]).unwrap();
    let mut model = LocalModel::new();
    let whole = model.forward(&raw, &reference).unwrap();
    let tiled = infer_patched_linear(&mut model, &raw, &reference, patch, overlap).map_err(|e| e.to_string())?;
    let s = model.scale();
    let starts = tile_starts(side, patch, overlap);
    // Internal tile borders in raw pixels; the image border is shared by every pass.
    let mut borders: Vec<usize> = starts.iter().copied().filter(|&x| x > 0).collect();
    borders.extend(starts.iter().map(|&x| x + patch).filter(|&x| x < side));
    let band = LocalModel::REACH * s;
    let near = |v: usize| borders.iter().any(|&b| (v as isize - (b * s) as isize).unsigned_abs() <= band);
    let (mut interior, mut seam) = (0.0f32, 0.0f32);
    for y in 0..side * s {
        for x in 0..side * s {
            for c in 0..3 {
                let d = (whole.get(y, x, c) - tiled.get(y, x, c)).abs();
                if near(y) || near(x) {
                    seam = seam.max(d);
                } else {
                    interior = interior.max(d);
                }
            }
        }
    }
    ensure(
        interior <= 1e-5,
        format!("{side}x{side} input, patch {patch}, overlap {overlap}: interior max diff {interior:.2e} (seam bands {seam:.2e})"),
    )
}

/// Per-window SSIM with the full 2-D Gaussian weights.
fn ssim_oracle(a: &LinearImage, b: &LinearImage) -> f64 {
    let g = gaussian_window();
    let (c1, c2) = ((SSIM_K1 * SSIM_K1), (SSIM_K2 * SSIM_K2));
    let n = SSIM_WINDOW;
    let mut total = 0.0;
    for c in 0..3 {
        let (mut acc, mut count) = (0.0, 0.0);
        for y0 in 0..=a.height() - n {
            for x0 in 0..=a.width() - n {
                let at = |img: &LinearImage, i: usize, j: usize| img.get(y0 + i, x0 + j, c) as f64;
                let (mut mx, mut my) = (0.0, 0.0);
                for i in 0..n {
                    for j in 0..n {
                        mx += g[i] * g[j] * at(a, i, j);
                        my += g[i] * g[j] * at(b, i, j);
                    }
                }
                let (mut vx, mut vy, mut cov) = (0.0, 0.0, 0.0);
                for i in 0..n {
                    for j in 0..n {
                        let (dx, dy) = (at(a, i, j) - mx, at(b, i, j) - my);
                        vx += g[i] * g[j] * dx * dx;
                        vy += g[i] * g[j] * dy * dy;
                        cov += g[i] * g[j] * dx * dy;
                    }
                }
                acc += (2.0 * mx * my + c1) * (2.0 * cov + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
                count += 1.0;
            }
        }
        total += acc / count;
    }
    total / 3.0
}

fn psnr_oracle(a: &LinearImage, b: &LinearImage) -> f64 {
    let mse = a.data().iter().zip(b.data()).map(|(&x, &y)| (x as f64 - y as f64).powi(2)).sum::<f64>() / a.data().len() as f64;
    10.0 * (1.0 / mse).log10()
}

fn metrics() -> Outcome {
    let a = random_image(32, 32, 9).map(|v| 0.8 * v);
    let b = a.map(|v| v + 0.1);
    let p = psnr(&a, &b).unwrap();
    let same = ssim(&a, &a).unwrap();
    let c = random_image(32, 32, 10);
    let psnr_gap = (p - psnr_oracle(&a, &b)).abs().max((psnr(&a, &c).unwrap() - psnr_oracle(&a, &c)).abs());
    let ssim_gap = (same - ssim_oracle(&a, &a)).abs().max((ssim(&a, &c).unwrap() - ssim_oracle(&a, &c)).abs());
    let detail = format!("PSNR of 0.1 offset {p:.6} dB, SSIM(identical) {same}, oracle gaps {psnr_gap:.1e} / {ssim_gap:.1e}");
    ensure((p - 20.0).abs() <= 1e-4 && same == 1.0 && psnr_gap <= 1e-6 && ssim_gap <= 1e-6, detail)
}

fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn reproducible() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let src = dir.path().join("src");
    write_sources(&src, 2, 48, 48);
    let mut trees = Vec::new();
    for run in ["a", "b"] {
        let data = dir.path().join(format!("data_{run}"));
        let ckpt = dir.path().join(format!("ckpt_{run}"));
        let out = rawsr(&["synth", "--src-dir", s(&src), "--out-dir", s(&data), "--count", "4", "--seed", "21"]);
        if code(&out) != 0 {
            return Err(format!("synth failed: {}", String::from_utf8_lossy(&out.stderr)));
        }
        let out = rawsr(&[
            "train", "--manifest", s(&data.join("manifest.jsonl")), "--profile", "desk", "--out-checkpoint", s(&ckpt),
            "--seed", "8", "--phase1-iters", "5", "--phase2-iters", "5", "--patch", "32",
        ]);
        if code(&out) != 0 {
            return Err(format!("train failed: {}", String::from_utf8_lossy(&out.stderr)));
        }
        trees.push((tree(&data), tree(&ckpt)));
    }
    let files = trees[0].0.len() + trees[0].1.len();
    ensure(trees[0] == trees[1], format!("two synth + train runs, {files} files compared byte for byte"))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("gradient checks of every layer and both networks", gradients),
        ("fast guided filter against brute force", guided),
        ("identity degradation and mosaic round trips", bayer_identity),
        ("noise variance", noise),
        ("sRGB encoding and gray development", srgb),
        ("overfit smoke run", overfit),
        ("output shapes and identity head", shapes),
        ("patched-inference seam audit", seams),
        ("PSNR and SSIM oracles", metrics),
        ("reproducible synth and train", reproducible),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {} {name}: {detail} [{secs:.1}s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {} {name}: {detail} [{secs:.1}s]", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}

