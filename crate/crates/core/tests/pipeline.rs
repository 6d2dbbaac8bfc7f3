use proptest::prelude::*;
use rawsr_core::bayer::mosaic;
use rawsr_core::degrade::{downsample, Degradation};
use rawsr_core::isp::IspConfig;
use rawsr_core::nets::{NetConfig, RawSrModel};
use rawsr_core::pipeline::*;
use rawsr_core::rng::{self, Stage};
use rawsr_core::{BayerImage, BayerPattern, ColorImage, LinearImage, Result};

fn random_image(h: usize, w: usize, seed: u64) -> LinearImage {
    let mut r = rng::stream(seed, 1);
    let data = (0..h * w * 3).map(|_| rng::uniform(&mut r) as f32).collect();
    LinearImage::new(h, w, data).unwrap()
}

fn scene(n: usize, seed: u64) -> LinearImage {
    let f = 1.0 + (seed % 5) as f32;
    LinearImage::from_fn(n, n, |y, x, c| 0.1 + 0.4 * (0.5 + 0.5 * ((f * x as f32 + 3.0 * y as f32) / n as f32 * 6.0 + c as f32).sin()))
}

#[test]
fn identity_degradation_reduces_to_mosaic_of_downsample() {
    let x_lin = random_image(32, 24, 3);
    let provenance = Provenance { seed: 0, index: 0, factor: 2, pattern: BayerPattern::Grbg, degradation: Degradation::identity(), isp: IspConfig::default() };
    let quad = synthesize_with(x_lin.clone(), provenance).unwrap();
    let oracle = mosaic(&downsample(&x_lin, 2).unwrap(), BayerPattern::Grbg).unwrap();
    assert_eq!(quad.x_raw, oracle);
}

#[test]
fn quads_satisfy_their_invariants() {
    let src = Source::Linear(scene(32, 1));
    for seed in 0..100 {
        let q = synthesize_sample(&src, seed, seed % 7, &SynthConfig::default()).unwrap();
        q.validate().unwrap();
        assert_eq!((q.x_raw.height(), q.x_raw.width()), (16, 16));
        assert_eq!((q.x_gt.height(), q.x_gt.width()), (32, 32));
        assert_eq!(q.provenance.isp, IspConfig::default());
    }
}

#[test]
fn synthesis_is_deterministic() {
    let src = Source::Linear(scene(32, 2));
    let cfg = SynthConfig::default();
    assert_eq!(synthesize_sample(&src, 9, 4, &cfg).unwrap(), synthesize_sample(&src, 9, 4, &cfg).unwrap());
    assert_ne!(synthesize_sample(&src, 9, 4, &cfg).unwrap().x_raw, synthesize_sample(&src, 9, 5, &cfg).unwrap().x_raw);
}

#[test]
fn non_blind_fixes_defocus_and_drops_motion() {
    let cfg = SynthConfig { non_blind_radius: Some(5.0), ..Default::default() };
    let q = synthesize_sample(&Source::Linear(scene(32, 3)), 1, 0, &cfg).unwrap();
    assert_eq!(q.provenance.degradation.defocus_radius, Some(5.0));
    assert!(q.provenance.degradation.motion.is_none());
}

#[test]
fn raw_sources_are_linearized_first() {
    let raw = mosaic(&scene(64, 4), BayerPattern::Rggb).unwrap();
    let q = synthesize_sample(&Source::Raw(raw), 2, 0, &SynthConfig::default()).unwrap();
    assert_eq!((q.x_lin.height(), q.x_raw.height()), (32, 16));
}

#[test]
fn four_x_data_and_bad_sizes() {
    let cfg = SynthConfig { factor: 4, ..Default::default() };
    let q = synthesize_sample(&Source::Linear(scene(32, 5)), 3, 0, &cfg).unwrap();
    assert_eq!((q.x_raw.height(), q.x_gt.height()), (8, 32));
    assert!(synthesize_sample(&Source::Linear(scene(30, 5)), 3, 0, &SynthConfig::default()).is_err());
}

fn small_dataset(n: usize) -> Vec<SampleQuad> {
    (0..n as u64).map(|i| synthesize_sample(&Source::Linear(scene(32, i)), 5, i, &SynthConfig::default()).unwrap()).collect()
}

#[test]
fn zero_learning_rate_changes_nothing() {
    let data = small_dataset(1);
    let mut model = RawSrModel::<f32>::new(NetConfig::toy(), 2).unwrap();
    let before = model.export();
    let sched = TrainSchedule { phase1_iters: 3, phase2_iters: 4, lr0: 0.0, lr_late: 0.0, ..TrainSchedule::desk() };
    let log = train(&mut model, &data, &sched, 1, |_| {}).unwrap();
    assert_eq!(log.len(), 7);
    assert_eq!(model.export(), before);
    for phase in [1, 2] {
        let losses: Vec<f64> = log.iter().filter(|r| r.phase == phase).map(|r| r.loss).collect();
        assert!(losses.windows(2).all(|w| w[0] == w[1]));
    }
}

#[test]
fn phase_one_touches_only_restoration() {
    let data = small_dataset(2);
    let mut model = RawSrModel::<f32>::new(NetConfig::toy(), 3).unwrap();
    let before = model.export();
    let sched = TrainSchedule { phase1_iters: 5, phase2_iters: 0, ..TrainSchedule::desk() };
    let log = train(&mut model, &data, &sched, 1, |_| {}).unwrap();
    assert_eq!(log.len(), 5);
    for (b, a) in before.iter().zip(model.export()) {
        if b.0.starts_with("color.") {
            assert_eq!(b.2, a.2, "{}", b.0);
        }
    }
    assert!(before.iter().zip(model.export()).any(|(b, a)| b.0.starts_with("restoration.") && b.2 != a.2));
}

#[test]
fn training_is_deterministic_and_logs_every_update() {
    let data = small_dataset(2);
    let sched = TrainSchedule { phase1_iters: 3, phase2_iters: 3, ..TrainSchedule::desk() };
    let run = || {
        let mut model = RawSrModel::<f32>::new(NetConfig::toy(), 4).unwrap();
        let mut seen = 0;
        let log = train(&mut model, &data, &sched, 8, |_| seen += 1).unwrap();
        assert_eq!(seen, 6);
        (log, model.export())
    };
    let (a, b) = (run(), run());
    assert_eq!(a, b);
    assert_eq!(a.0.iter().map(|r| (r.phase, r.iter)).collect::<Vec<_>>(), vec![(1, 1), (1, 2), (1, 3), (2, 1), (2, 2), (2, 3)]);
}

#[test]
fn learning_rate_schedule() {
    let s = TrainSchedule::paper();
    assert_eq!(s.lr(1, 39_999), 2e-4);
    assert_eq!(s.lr(2, 1_999), 2e-4);
    assert!((s.lr(2, 2_000) - 2e-4 * 0.96).abs() < 1e-18);
    assert!((s.lr(2, 39_999) - 2e-4 * 0.96f64.powi(19)).abs() < 1e-15);
    assert_eq!(s.lr(2, 40_000), 1e-5);
    assert!(TrainSchedule::profile("nope").is_err());
    assert!(train(&mut RawSrModel::<f32>::new(NetConfig::toy(), 0).unwrap(), &[], &s, 0, |_| {}).is_err());
}

#[test]
fn wrong_factor_data_is_rejected() {
    let data = small_dataset(1);
    let mut model = RawSrModel::<f32>::new(NetConfig::toy().with_scale(4), 0).unwrap();
    assert!(train(&mut model, &data, &TrainSchedule::desk(), 0, |_| {}).is_err());
}

struct ConstantModel;

impl SrModel for ConstantModel {
    fn scale(&self) -> usize {
        2
    }

    fn alignment(&self) -> usize {
        8
    }

    fn forward(&mut self, raw: &BayerImage, _: &ColorImage) -> Result<LinearImage> {
        Ok(LinearImage::filled(raw.height() * 2, raw.width() * 2, [0.25, 0.5, 0.75]))
    }
}

fn raw_and_ref(side: usize, seed: u64) -> (BayerImage, ColorImage) {
    let q = synthesize_sample(&Source::Linear(random_image(2 * side, 2 * side, seed)), seed, 0, &SynthConfig::default()).unwrap();
    (q.x_raw, q.x_ref)
}

#[test]
fn constant_model_survives_tiling() {
    let (raw, reference) = raw_and_ref(48, 1);
    let out = infer_patched_linear(&mut ConstantModel, &raw, &reference, 16, 4).unwrap();
    assert_eq!(out, LinearImage::filled(96, 96, [0.25, 0.5, 0.75]));
}

#[test]
fn small_images_run_whole() {
    let (raw, reference) = raw_and_ref(16, 2);
    let mut model = RawSrModel::<f32>::new(NetConfig::toy(), 1).unwrap();
    let whole = model.infer(&raw, &reference).unwrap().output;
    assert_eq!(infer_patched_linear(&mut model, &raw, &reference, 256, 32).unwrap(), whole);
    assert_eq!(infer_patched(&mut model, &raw, &reference, 256, 32).unwrap(), rawsr_core::isp::quantize(&whole));
}

#[test]
fn patch_parameters_are_validated() {
    let (raw, reference) = raw_and_ref(16, 3);
    assert!(infer_patched_linear(&mut ConstantModel, &raw, &reference, 12, 2).is_err());
    assert!(infer_patched_linear(&mut ConstantModel, &raw, &reference, 16, 10).is_err());
    assert!(infer_patched_linear(&mut ConstantModel, &raw, &reference, 16, 3).is_err());
}

#[test]
fn psnr_values() {
    let a = random_image(8, 8, 1);
    assert_eq!(psnr(&a, &a).unwrap(), 99.0);
    let b = a.map(|v| v + 0.1);
    let mse: f64 = a.data().iter().zip(b.data()).map(|(&x, &y)| (x as f64 - y as f64).powi(2)).sum::<f64>() / a.data().len() as f64;
    assert!((psnr(&a, &b).unwrap() - 10.0 * (1.0 / mse).log10()).abs() < 1e-9);
    assert!((psnr(&a, &b).unwrap() - 20.0).abs() < 1e-5);
    let c = random_image(8, 8, 2);
    let mse: f64 = a.data().iter().zip(c.data()).map(|(&x, &y)| (x as f64 - y as f64).powi(2)).sum::<f64>() / 192.0;
    assert!((psnr(&a, &c).unwrap() - 10.0 * (1.0 / mse).log10()).abs() < 1e-9);
    assert!(psnr(&a, &random_image(8, 6, 2)).is_err());
}

/// Direct per-window SSIM with the full 2-D Gaussian weights.
fn ssim_oracle(a: &LinearImage, b: &LinearImage) -> f64 {
    let g = gaussian_window();
    let (h, w) = (a.height(), a.width());
    let (c1, c2) = (1e-4, 9e-4);
    let mut total = 0.0;
    for c in 0..3 {
        let mut acc = 0.0;
        let mut count = 0;
        for y0 in 0..=h - 11 {
            for x0 in 0..=w - 11 {
                let (mut mx, mut my) = (0.0, 0.0);
                for i in 0..11 {
                    for j in 0..11 {
                        mx += g[i] * g[j] * a.get(y0 + i, x0 + j, c) as f64;
                        my += g[i] * g[j] * b.get(y0 + i, x0 + j, c) as f64;
                    }
                }
                let (mut vx, mut vy, mut cov) = (0.0, 0.0, 0.0);
                for i in 0..11 {
                    for j in 0..11 {
                        let dx = a.get(y0 + i, x0 + j, c) as f64 - mx;
                        let dy = b.get(y0 + i, x0 + j, c) as f64 - my;
                        vx += g[i] * g[j] * dx * dx;
                        vy += g[i] * g[j] * dy * dy;
                        cov += g[i] * g[j] * dx * dy;
                    }
                }
                acc += (2.0 * mx * my + c1) * (2.0 * cov + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
                count += 1;
            }
        }
        total += acc / count as f64;
    }
    total / 3.0
}

#[test]
fn ssim_values() {
    let a = random_image(32, 32, 3);
    assert_eq!(ssim(&a, &a).unwrap(), 1.0);
    let b = random_image(32, 32, 4);
    assert!((ssim(&a, &b).unwrap() - ssim_oracle(&a, &b)).abs() < 1e-6);
    let blurred = a.map(|v| 0.8 * v + 0.1);
    assert!((ssim(&a, &blurred).unwrap() - ssim_oracle(&a, &blurred)).abs() < 1e-6);
    let binary = LinearImage::from_fn(16, 16, |y, x, _| ((y / 3 + x / 2) % 2) as f32);
    let inverse = binary.map(|v| 1.0 - v);
    let s = ssim(&binary, &inverse).unwrap();
    assert!((-1.0..-0.5).contains(&s), "{s}");
    assert!(ssim(&random_image(10, 32, 1), &random_image(10, 32, 2)).is_err());
}

#[test]
fn metrics_on_color_images() {
    let a = ColorImage::new(12, 12, (0..432).map(|i| (i % 200) as u8).collect()).unwrap();
    let b = ColorImage::new(12, 12, (0..432).map(|i| (i % 200) as u8 + 51).collect()).unwrap();
    assert!((psnr(&a, &b).unwrap() - 20.0 * 5.0f64.log10()).abs() < 1e-9);
    assert_eq!(ssim(&a, &a).unwrap(), 1.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn metrics_are_symmetric(s1 in 0u64..1000, s2 in 0u64..1000) {
        let (a, b) = (random_image(12, 13, s1), random_image(12, 13, s2));
        prop_assert_eq!(psnr(&a, &b).unwrap(), psnr(&b, &a).unwrap());
        prop_assert!((ssim(&a, &b).unwrap() - ssim(&b, &a).unwrap()).abs() < 1e-12);
        let s = ssim(&a, &b).unwrap();
        prop_assert!((-1.0..=1.0).contains(&s));
    }

    #[test]
    fn psnr_ignores_common_offsets(s in 0u64..1000, shift in -0.2f32..0.2) {
        let a = random_image(6, 6, s).map(|v| 0.3 + 0.4 * v);
        let b = random_image(6, 6, s + 1).map(|v| 0.3 + 0.4 * v);
        let d = psnr(&a, &b).unwrap() - psnr(&a.map(|v| v + shift), &b.map(|v| v + shift)).unwrap();
        prop_assert!(d.abs() < 1e-4);
    }

    #[test]
    fn tiles_cover_every_index(dim in 8usize..300, patch_blocks in 1usize..20, overlap_half in 0usize..40) {
        let patch = patch_blocks * 8;
        let overlap = (2 * overlap_half).min(patch / 2);
        let starts = tile_starts(dim, patch, overlap);
        let mut covered = vec![false; dim];
        for &s in &starts {
            for c in covered.iter_mut().skip(s).take(patch) {
                *c = true;
            }
        }
        prop_assert!(covered.iter().all(|&c| c));
        prop_assert!(starts.iter().all(|&s| s + patch.min(dim) <= dim));
    }
}

#[test]
fn stage_streams_are_distinct() {
    let mut a = rng::stage_rng(1, 0, Stage::Batch);
    let mut b = rng::stage_rng(1, 0, Stage::Crop);
    assert_ne!(rng::uniform(&mut a), rng::uniform(&mut b));
}
