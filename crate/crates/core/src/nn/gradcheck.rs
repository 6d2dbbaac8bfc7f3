//! Central finite-difference verification of backward passes.
//!
//! The scalar objective is `L = <f(x), r>` for a fixed random projection
//! `r`, so `dL/dy = r`. Analytic gradients from the backward pass are
//! compared against `(L(p + h) - L(p - h)) / 2h` on a random subset of the
//! coordinates of every input and parameter tensor. The reported error per
//! tensor is `||g_analytic - g_numeric|| / max(||g_analytic||, ||g_numeric||)`
//! over the sampled coordinates.
//!
//! Piecewise-linear activations put kinks into deep networks, and a fixed
//! step that straddles one gives a wrong numeric slope. With `adaptive`
//! set, the step is quartered until two successive central differences
//! agree, and the wider of the two is used.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::Result;
use crate::rng::{self, Rng};
use crate::scalar::Scalar;

use super::params::{ParamId, ParamStore};
use super::tensor::Tensor;
use super::Layer;

#[derive(Debug, Clone, Copy)]
pub struct GradCheckOptions {
    pub step: f64,
    /// Coordinates probed per tensor (all of them when the tensor is smaller).
    pub samples_per_tensor: usize,
    pub seed: u64,
    /// Scales analytic gradients before comparison; anything but 1 must fail.
    pub corrupt_factor: f64,
    pub adaptive: bool,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self { step: 1e-5, samples_per_tensor: 12, seed: 0, corrupt_factor: 1.0, adaptive: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradReport {
    pub name: String,
    pub rel_error: f64,
    pub coords: usize,
}

pub fn max_error(reports: &[GradReport]) -> f64 {
    reports.iter().map(|r| r.rel_error).fold(0.0, f64::max)
}

fn pick_coords(len: usize, k: usize, rng: &mut Rng) -> Vec<usize> {
    if len <= k {
        return (0..len).collect();
    }
    let mut picked = Vec::with_capacity(k);
    while picked.len() < k {
        let i = (rng::uniform(rng) * len as f64) as usize;
        if !picked.contains(&i) {
            picked.push(i);
        }
    }
    picked
}

fn rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff: f64 = analytic.iter().zip(numeric).map(|(a, n)| (a - n) * (a - n)).sum();
    let scale = analytic.iter().map(|a| a * a).sum::<f64>().max(numeric.iter().map(|n| n * n).sum());
    if scale == 0.0 {
        0.0
    } else {
        libm::sqrt(diff / scale)
    }
}

const REFINEMENTS: usize = 6;

/// Numeric derivative of `f` at zero offset.
fn derivative(mut f: impl FnMut(f64) -> Result<f64>, opts: &GradCheckOptions) -> Result<f64> {
    let mut central = |h: f64| -> Result<f64> { Ok((f(h)? - f(-h)?) / (2.0 * h)) };
    let mut h = opts.step;
    let mut estimate = central(h)?;
    if !opts.adaptive {
        return Ok(estimate);
    }
    for _ in 0..REFINEMENTS {
        h /= 4.0;
        let next = central(h)?;
        // Agreement means no kink inside the wider step, whose estimate then
        // carries less rounding noise.
        if (next - estimate).abs() <= 1e-8 + 1e-6 * next.abs() {
            break;
        }
        estimate = next;
    }
    Ok(estimate)
}

/// Uniform `[-1, 1]` tensor.
pub fn random_tensor<T: Scalar>(shape: &[usize], rng: &mut Rng) -> Tensor<T> {
    Tensor::from_fn(shape, |_| T::of(rng::uniform_in(rng, -1.0, 1.0)))
}

/// A differentiable function of several inputs and the parameters in a
/// store, with a scalar objective.
pub trait Objective<T: Scalar> {
    /// Objective value.
    fn value(&mut self, ps: &ParamStore<T>, inputs: &[Tensor<T>]) -> Result<T>;

    /// Objective value and input gradients; parameter gradients are added
    /// into `ps`.
    fn gradients(&mut self, ps: &mut ParamStore<T>, inputs: &[Tensor<T>]) -> Result<(T, Vec<Tensor<T>>)>;
}

/// Checks every input (named `input{i}`) and every parameter in `params`.
pub fn check<T: Scalar, O: Objective<T>>(
    objective: &mut O,
    ps: &mut ParamStore<T>,
    inputs: &mut [Tensor<T>],
    params: &[ParamId],
    opts: &GradCheckOptions,
) -> Result<Vec<GradReport>> {
    let mut rng = rng::stream(opts.seed, 0x6772_6164);
    ps.zero_grad();
    let (_, input_grads) = objective.gradients(ps, inputs)?;
    let mut reports = Vec::new();

    for i in 0..inputs.len() {
        let coords = pick_coords(inputs[i].len(), opts.samples_per_tensor, &mut rng);
        let mut analytic = Vec::with_capacity(coords.len());
        let mut numeric = Vec::with_capacity(coords.len());
        for &c in &coords {
            let orig = inputs[i].data()[c];
            let n = derivative(
                |d| {
                    inputs[i].data_mut()[c] = orig + T::of(d);
                    let v = objective.value(ps, inputs);
                    inputs[i].data_mut()[c] = orig;
                    Ok(v?.as_f64())
                },
                opts,
            )?;
            numeric.push(n);
            analytic.push(input_grads[i].data()[c].as_f64() * opts.corrupt_factor);
        }
        reports.push(GradReport { name: alloc::format!("input{i}"), rel_error: rel_error(&analytic, &numeric), coords: coords.len() });
    }

    for &id in params {
        let grad: Vec<f64> = ps.get(id).grad().expect("parameters carry gradients").iter().map(|g| g.as_f64()).collect();
        let coords = pick_coords(grad.len(), opts.samples_per_tensor, &mut rng);
        let mut analytic = Vec::with_capacity(coords.len());
        let mut numeric = Vec::with_capacity(coords.len());
        for &c in &coords {
            let orig = ps.get(id).data()[c];
            let n = derivative(
                |d| {
                    ps.get_mut(id).data_mut()[c] = orig + T::of(d);
                    let v = objective.value(ps, inputs);
                    ps.get_mut(id).data_mut()[c] = orig;
                    Ok(v?.as_f64())
                },
                opts,
            )?;
            numeric.push(n);
            analytic.push(grad[c] * opts.corrupt_factor);
        }
        reports.push(GradReport { name: ps.name(id).to_string(), rel_error: rel_error(&analytic, &numeric), coords: coords.len() });
    }
    Ok(reports)
}

/// `<layer(x), r>` for a single-input layer and a fixed projection `r`.
pub struct LayerObjective<'a, T, L> {
    pub layer: &'a mut L,
    pub projection: Tensor<T>,
}

impl<T: Scalar, L: Layer<T>> Objective<T> for LayerObjective<'_, T, L> {
    fn value(&mut self, ps: &ParamStore<T>, inputs: &[Tensor<T>]) -> Result<T> {
        self.layer.forward(ps, &inputs[0])?.dot(&self.projection)
    }

    fn gradients(&mut self, ps: &mut ParamStore<T>, inputs: &[Tensor<T>]) -> Result<(T, Vec<Tensor<T>>)> {
        let y = self.layer.forward(ps, &inputs[0])?;
        let value = y.dot(&self.projection)?;
        let dx = self.layer.backward(ps, &self.projection)?;
        Ok((value, alloc::vec![dx]))
    }
}

/// Gradient check of a single-input layer on a random input of `shape`.
pub fn check_layer<T: Scalar, L: Layer<T>>(
    layer: &mut L,
    ps: &mut ParamStore<T>,
    shape: &[usize],
    opts: &GradCheckOptions,
) -> Result<Vec<GradReport>> {
    let mut rng = rng::stream(opts.seed, 0x696e_7075);
    let x = random_tensor(shape, &mut rng);
    let out_shape = layer.forward(ps, &x)?.shape().to_vec();
    let projection = random_tensor(&out_shape, &mut rng);
    let params: Vec<ParamId> = ps.ids().collect();
    let mut objective = LayerObjective { layer, projection };
    check(&mut objective, ps, &mut [x], &params, opts)
}

/// Layers known to [`check_named_layer`].
pub const LAYERS: &[&str] = &[
    "conv2d",
    "conv2d_stride2",
    "conv_transpose2d",
    "linear",
    "leaky_relu",
    "sigmoid",
    "global_avg_pool",
    "avg_pool2",
    "pixel_shuffle",
    "concat",
    "dense_block",
    "channel_attention",
    "dca_block",
    "l1_loss",
];

/// Concatenation of the input with a fixed random tensor, so the objective
/// sees both the pass-through and the shifted channel block.
struct ConcatLayer<T> {
    extra: Tensor<T>,
    channels: usize,
}

impl<T: Scalar> Layer<T> for ConcatLayer<T> {
    fn forward(&mut self, _: &ParamStore<T>, x: &Tensor<T>) -> Result<Tensor<T>> {
        self.channels = x.dims4()?.1;
        super::concat_channels(&[&self.extra, x])
    }

    fn backward(&mut self, _: &mut ParamStore<T>, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let c = dy.dims4()?.1;
        Ok(super::split_channels(dy, &[c - self.channels, self.channels])?.pop().expect("two parts"))
    }
}

struct L1Objective<T> {
    target: Tensor<T>,
}

impl<T: Scalar> Objective<T> for L1Objective<T> {
    fn value(&mut self, _: &ParamStore<T>, inputs: &[Tensor<T>]) -> Result<T> {
        Ok(super::l1_loss(&inputs[0], &self.target)?.0)
    }

    fn gradients(&mut self, _: &mut ParamStore<T>, inputs: &[Tensor<T>]) -> Result<(T, Vec<Tensor<T>>)> {
        let (v, g) = super::l1_loss(&inputs[0], &self.target)?;
        Ok((v, alloc::vec![g]))
    }
}

/// Builds the named layer at a small, seed-dependent size with seeded
/// weights and checks it. Unknown names are rejected.
pub fn check_named_layer<T: Scalar>(name: &str, opts: &GradCheckOptions) -> Result<Vec<GradReport>> {
    use super::{AvgPool2, ChannelAttention, Conv2d, ConvTranspose2d, DcaBlock, DenseBlock, GlobalAvgPool, LeakyRelu, Linear, PixelShuffle, Sigmoid, LEAKY_SLOPE};

    let mut rng = rng::stream(opts.seed, 0x6c61_7965);
    let mut pick = |lo: usize, hi: usize| lo + (rng::uniform(&mut rng) * (hi - lo + 1) as f64) as usize;
    let (n, h, w) = (pick(1, 2), pick(3, 6), pick(3, 6));
    let mut init = rng::stream(opts.seed, rng::Stage::Init as u64);
    let mut ps = ParamStore::<T>::new();
    let ps = &mut ps;
    match name {
        "conv2d" => check_layer(&mut Conv2d::same3(ps, name, 3, 4, &mut init), ps, &[n, 3, h, w], opts),
        "conv2d_stride2" => check_layer(&mut Conv2d::new(ps, name, 2, 3, 3, 2, 1, &mut init), ps, &[n, 2, h, w], opts),
        "conv_transpose2d" => check_layer(&mut ConvTranspose2d::up2(ps, name, 3, 2, &mut init), ps, &[n, 3, h, w], opts),
        "linear" => check_layer(&mut Linear::new(ps, name, h, w, &mut init), ps, &[n, h, 1, 1], opts),
        "leaky_relu" => check_layer(&mut LeakyRelu::new(LEAKY_SLOPE), ps, &[n, 2, h, w], opts),
        "sigmoid" => check_layer(&mut Sigmoid::new(), ps, &[n, 2, h, w], opts),
        "global_avg_pool" => check_layer(&mut GlobalAvgPool::new(), ps, &[n, 3, h, w], opts),
        "avg_pool2" => check_layer(&mut AvgPool2::new(), ps, &[n, 2, 2 * h, 2 * w], opts),
        "pixel_shuffle" => check_layer(&mut PixelShuffle { factor: 2 }, ps, &[n, 8, h, w], opts),
        "concat" => {
            let extra = random_tensor(&[n, 2, h, w], &mut init);
            check_layer(&mut ConcatLayer { extra, channels: 0 }, ps, &[n, 3, h, w], opts)
        }
        "dense_block" => check_layer(&mut DenseBlock::new(ps, name, 4, 3, 2, LEAKY_SLOPE, &mut init), ps, &[n, 4, h, w], opts),
        "channel_attention" => check_layer(&mut ChannelAttention::new(ps, name, 8, 4, LEAKY_SLOPE, &mut init)?, ps, &[n, 8, h, w], opts),
        "dca_block" => check_layer(&mut DcaBlock::new(ps, name, 8, 4, 2, 4, LEAKY_SLOPE, &mut init)?, ps, &[n, 8, h, w], opts),
        "l1_loss" => {
            let target = random_tensor(&[n, 3, h, w], &mut init);
            let mut x = [random_tensor(&[n, 3, h, w], &mut init)];
            check(&mut L1Objective { target }, ps, &mut x, &[], opts)
        }
        _ => crate::error::bail!(InvalidParameter, "unknown layer {name:?}; expected one of {LAYERS:?}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{AvgPool2, ChannelAttention, Conv2d, ConvTranspose2d, DcaBlock, DenseBlock, GlobalAvgPool, LeakyRelu, Linear, PixelShuffle, Sigmoid, LEAKY_SLOPE};

    fn worst<L: Layer<f64>>(layer: &mut L, ps: &mut ParamStore<f64>, shape: &[usize], opts: &GradCheckOptions) -> f64 {
        max_error(&check_layer(layer, ps, shape, opts).unwrap())
    }

    #[test]
    fn layers_pass() {
        let opts = GradCheckOptions::default();
        let mut rng = rng::stream(3, 0);
        let mut ps = ParamStore::new();
        let mut conv = Conv2d::new(&mut ps, "c", 2, 3, 3, 2, 1, &mut rng);
        assert!(worst(&mut conv, &mut ps, &[1, 2, 6, 5], &opts) < 1e-6);

        let mut ps = ParamStore::new();
        let mut deconv = ConvTranspose2d::up2(&mut ps, "d", 2, 3, &mut rng);
        assert!(worst(&mut deconv, &mut ps, &[2, 2, 3, 4], &opts) < 1e-6);

        let mut ps = ParamStore::new();
        let mut lin = Linear::new(&mut ps, "l", 4, 3, &mut rng);
        assert!(worst(&mut lin, &mut ps, &[2, 4, 1, 1], &opts) < 1e-6);

        let mut ps = ParamStore::new();
        assert!(worst(&mut LeakyRelu::new(LEAKY_SLOPE), &mut ps, &[1, 2, 3, 3], &opts) < 1e-6);
        assert!(worst(&mut Sigmoid::new(), &mut ps, &[1, 2, 3, 3], &opts) < 1e-6);
        assert!(worst(&mut GlobalAvgPool::new(), &mut ps, &[2, 2, 3, 3], &opts) < 1e-6);
        assert!(worst(&mut AvgPool2::new(), &mut ps, &[1, 2, 4, 6], &opts) < 1e-6);
        assert!(worst(&mut PixelShuffle { factor: 2 }, &mut ps, &[1, 8, 2, 3], &opts) < 1e-6);

        let mut ps = ParamStore::new();
        let mut dense = DenseBlock::new(&mut ps, "b", 3, 2, 3, LEAKY_SLOPE, &mut rng);
        assert!(worst(&mut dense, &mut ps, &[1, 3, 5, 4], &opts) < 1e-6);

        let mut ps = ParamStore::new();
        let mut ca = ChannelAttention::new(&mut ps, "a", 4, 2, LEAKY_SLOPE, &mut rng).unwrap();
        assert!(worst(&mut ca, &mut ps, &[2, 4, 3, 3], &opts) < 1e-6);

        let mut ps = ParamStore::new();
        let mut dca = DcaBlock::new(&mut ps, "x", 4, 2, 2, 2, LEAKY_SLOPE, &mut rng).unwrap();
        assert!(worst(&mut dca, &mut ps, &[1, 4, 4, 4], &opts) < 1e-6);
    }

    #[test]
    fn named_suite_passes() {
        for seed in 0..3 {
            let opts = GradCheckOptions { seed, ..Default::default() };
            for name in LAYERS {
                let worst = max_error(&check_named_layer::<f64>(name, &opts).unwrap());
                assert!(worst < 1e-6, "{name} seed {seed}: {worst}");
            }
        }
        assert!(check_named_layer::<f64>("nope", &GradCheckOptions::default()).is_err());
    }

    #[test]
    fn corruption_is_detected() {
        let opts = GradCheckOptions { corrupt_factor: 1.01, ..Default::default() };
        let mut rng = rng::stream(4, 0);
        let mut ps = ParamStore::new();
        let mut conv = Conv2d::same3(&mut ps, "c", 2, 2, &mut rng);
        assert!(worst(&mut conv, &mut ps, &[1, 2, 4, 4], &opts) > 5e-3);
    }
}
