//! Composite blocks of the restoration network.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::rng::Rng;
use crate::scalar::Scalar;

use super::activation::{LeakyRelu, Sigmoid};
use super::conv::Conv2d;
use super::linear::Linear;
use super::params::ParamStore;
use super::pool::GlobalAvgPool;
use super::reshape::{concat_channels, split_channels};
use super::tensor::Tensor;
use super::{cached, Layer};

/// `layers` densely connected 3x3 conv + LeakyReLU stages; every stage sees
/// the concatenation of the block input and all earlier stage outputs and
/// appends `growth` channels.
#[derive(Debug, Clone)]
pub struct DenseBlock<T> {
    convs: Vec<Conv2d<T>>,
    acts: Vec<LeakyRelu<T>>,
    in_channels: usize,
    growth: usize,
}

impl<T: Scalar> DenseBlock<T> {
    pub fn new(ps: &mut ParamStore<T>, name: &str, in_channels: usize, growth: usize, layers: usize, slope: f64, rng: &mut Rng) -> Self {
        let convs = (0..layers)
            .map(|i| Conv2d::same3(ps, &format!("{name}.conv{i}"), in_channels + i * growth, growth, rng))
            .collect();
        let acts = (0..layers).map(|_| LeakyRelu::new(slope)).collect();
        Self { convs, acts, in_channels, growth }
    }

    pub fn out_channels(&self) -> usize {
        self.in_channels + self.convs.len() * self.growth
    }

    pub fn convs(&self) -> &[Conv2d<T>] {
        &self.convs
    }
}

impl<T: Scalar> Layer<T> for DenseBlock<T> {
    fn forward(&mut self, ps: &ParamStore<T>, x: &Tensor<T>) -> Result<Tensor<T>> {
        let mut acc = x.clone();
        for (conv, act) in self.convs.iter_mut().zip(&mut self.acts) {
            let y = act.forward(ps, &conv.forward(ps, &acc)?)?;
            acc = concat_channels(&[&acc, &y])?;
        }
        Ok(acc)
    }

    fn backward(&mut self, ps: &mut ParamStore<T>, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let mut grad = dy.clone();
        for (i, (conv, act)) in self.convs.iter_mut().zip(&mut self.acts).enumerate().rev() {
            let width = self.in_channels + i * self.growth;
            let mut parts = split_channels(&grad, &[width, self.growth])?;
            let d_stage = parts.pop().expect("two parts");
            let mut d_acc = parts.pop().expect("two parts");
            let d_pre = act.backward(ps, &d_stage)?;
            d_acc.add_assign(&conv.backward(ps, &d_pre)?)?;
            grad = d_acc;
        }
        Ok(grad)
    }
}

/// Squeeze-and-excitation gating:
/// `s = sigmoid(FC2(LeakyReLU(FC1(mean_hw(x)))))`, `y[c] = s[c] * x[c]`.
#[derive(Debug, Clone)]
pub struct ChannelAttention<T> {
    pool: GlobalAvgPool,
    fc1: Linear<T>,
    act: LeakyRelu<T>,
    fc2: Linear<T>,
    gate: Sigmoid<T>,
    cache: Option<(Tensor<T>, Tensor<T>)>,
}

impl<T: Scalar> ChannelAttention<T> {
    pub fn new(ps: &mut ParamStore<T>, name: &str, channels: usize, reduction: usize, slope: f64, rng: &mut Rng) -> Result<Self> {
        if reduction == 0 || !channels.is_multiple_of(reduction) {
            bail!(InvalidParameter, "{channels} channels are not divisible by reduction {reduction}");
        }
        let hidden = channels / reduction;
        Ok(Self {
            pool: GlobalAvgPool::new(),
            fc1: Linear::new(ps, &format!("{name}.fc1"), channels, hidden, rng),
            act: LeakyRelu::new(slope),
            fc2: Linear::new(ps, &format!("{name}.fc2"), hidden, channels, rng),
            gate: Sigmoid::new(),
            cache: None,
        })
    }

    /// Per-sample, per-channel gates of the last forward pass.
    pub fn last_gates(&self) -> Option<&Tensor<T>> {
        self.cache.as_ref().map(|(_, s)| s)
    }
}

impl<T: Scalar> Layer<T> for ChannelAttention<T> {
    fn forward(&mut self, ps: &ParamStore<T>, x: &Tensor<T>) -> Result<Tensor<T>> {
        let (_, _, h, w) = x.dims4()?;
        let pooled = self.pool.forward(ps, x)?;
        let s = self.gate.forward(ps, &self.fc2.forward(ps, &self.act.forward(ps, &self.fc1.forward(ps, &pooled)?)?)?)?;
        let mut y = x.clone();
        for (plane, &g) in y.data_mut().chunks_exact_mut(h * w).zip(s.data()) {
            plane.iter_mut().for_each(|v| *v *= g);
        }
        self.cache = Some((x.clone(), s));
        Ok(y)
    }

    fn backward(&mut self, ps: &mut ParamStore<T>, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let (x, s) = cached(&self.cache, "channel_attention")?;
        x.same_shape(dy)?;
        let (n, c, h, w) = x.dims4()?;
        let plane = h * w;
        let mut dx = dy.clone();
        let mut ds = Vec::with_capacity(n * c);
        for ((dplane, xplane), &g) in dx.data_mut().chunks_exact_mut(plane).zip(x.data().chunks_exact(plane)).zip(s.data()) {
            ds.push(dplane.iter().zip(xplane).map(|(&a, &b)| a * b).sum::<T>());
            dplane.iter_mut().for_each(|v| *v *= g);
        }
        let ds = Tensor::new(&[n, c, 1, 1], ds)?;
        let d = self.gate.backward(ps, &ds)?;
        let d = self.fc2.backward(ps, &d)?;
        let d = self.act.backward(ps, &d)?;
        let d_pooled = self.fc1.backward(ps, &d)?;
        dx.add_assign(&self.pool.backward(ps, &d_pooled.reshape(&[n, c, 1, 1])?)?)?;
        Ok(dx)
    }
}

/// Dense channel-attention block:
/// `y = x + P(attention(dense(x)))` where the 1x1 projection `P` maps the
/// dense block's channels back to the input width.
#[derive(Debug, Clone)]
pub struct DcaBlock<T> {
    dense: DenseBlock<T>,
    attention: ChannelAttention<T>,
    project: Conv2d<T>,
}

impl<T: Scalar> DcaBlock<T> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        ps: &mut ParamStore<T>,
        name: &str,
        channels: usize,
        growth: usize,
        layers: usize,
        reduction: usize,
        slope: f64,
        rng: &mut Rng,
    ) -> Result<Self> {
        let dense = DenseBlock::new(ps, &format!("{name}.dense"), channels, growth, layers, slope, rng);
        let wide = dense.out_channels();
        let attention = ChannelAttention::new(ps, &format!("{name}.attention"), wide, reduction, slope, rng)?;
        let project = Conv2d::pointwise(ps, &format!("{name}.project"), wide, channels, rng);
        Ok(Self { dense, attention, project })
    }
}

impl<T: Scalar> Layer<T> for DcaBlock<T> {
    fn forward(&mut self, ps: &ParamStore<T>, x: &Tensor<T>) -> Result<Tensor<T>> {
        let d = self.dense.forward(ps, x)?;
        let a = self.attention.forward(ps, &d)?;
        x.add(&self.project.forward(ps, &a)?)
    }

    fn backward(&mut self, ps: &mut ParamStore<T>, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let d = self.project.backward(ps, dy)?;
        let d = self.attention.backward(ps, &d)?;
        let d_branch = self.dense.backward(ps, &d)?;
        dy.add(&d_branch)
    }
}
