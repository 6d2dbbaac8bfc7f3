//! The two-branch super-resolution model.
//!
//! A restoration branch maps the packed Bayer mosaic to a linear RGB image
//! at the output resolution. A color branch encodes the developed reference
//! image, fuses restoration features at two decoder scales and emits a
//! per-pixel 3x3 matrix plus bias that maps the linear estimate to display
//! colors.

pub mod check;
mod color;
mod field;
mod restoration;

pub use color::{ColorGrads, ColorNet};
pub use field::{apply_field, apply_field_backward, head_to_field, HEAD_CHANNELS};
pub use restoration::{RestorationNet, Restored};

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::bayer::pack;
use crate::error::{bail, Result};
use crate::guided::TransformField;
use crate::image::{BayerImage, ColorImage, LinearImage};
use crate::nn::{ParamId, ParamStore, Tensor};
use crate::rng::{self, Stage};
use crate::scalar::Scalar;

/// Name prefix of restoration parameters.
pub const RESTORATION: &str = "restoration";
/// Name prefix of color-correction parameters.
pub const COLOR: &str = "color";

/// Raw and reference sides must be multiples of this.
pub const ALIGNMENT: usize = 8;

/// Architecture hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct NetConfig {
    /// Restoration feature width at packed resolution; doubled per downscale.
    pub width: usize,
    pub growth: usize,
    pub dense_layers: usize,
    pub reduction: usize,
    pub color_widths: [usize; 3],
    /// Output size relative to the raw mosaic: 2 or 4.
    pub scale: usize,
}

impl NetConfig {
    pub const PROFILES: [&'static str; 4] = ["full", "toy", "full-4x", "toy-4x"];

    pub fn full() -> Self {
        Self { width: 64, growth: 16, dense_layers: 8, reduction: 16, color_widths: [32, 64, 128], scale: 2 }
    }

    pub fn toy() -> Self {
        Self { width: 8, growth: 8, dense_layers: 3, reduction: 4, color_widths: [8, 16, 32], scale: 2 }
    }

    pub fn with_scale(self, scale: usize) -> Self {
        Self { scale, ..self }
    }

    pub fn profile(name: &str) -> Result<Self> {
        Ok(match name {
            "full" => Self::full(),
            "toy" => Self::toy(),
            "full-4x" => Self::full().with_scale(4),
            "toy-4x" => Self::toy().with_scale(4),
            _ => bail!(InvalidParameter, "unknown model profile {name:?}; expected one of {:?}", Self::PROFILES),
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.growth == 0 || self.dense_layers == 0 || self.reduction == 0 || self.color_widths.contains(&0) {
            bail!(InvalidParameter, "network widths must be positive: {self:?}");
        }
        if self.scale != 2 && self.scale != 4 {
            bail!(InvalidParameter, "scale must be 2 or 4, got {}", self.scale);
        }
        for level in [1, 2, 4] {
            let channels = level * self.width + self.dense_layers * self.growth;
            if !channels.is_multiple_of(self.reduction) {
                bail!(InvalidParameter, "attention reduction {} does not divide {channels} dense channels", self.reduction);
            }
        }
        Ok(())
    }
}

/// Packed mosaic as a `(1, 4, H/2, W/2)` tensor.
pub fn raw_tensor<T: Scalar>(raw: &BayerImage) -> Result<Tensor<T>> {
    let packed = pack(raw)?;
    let (h, w) = (packed.height(), packed.width());
    Ok(Tensor::from_fn(&[1, 4, h, w], |i| {
        let (c, p) = (i / (h * w), i % (h * w));
        T::of(packed.data()[p * 4 + c] as f64)
    }))
}

/// `(1, 3, H, W)` tensor of an interleaved image.
pub fn image_tensor<T: Scalar>(img: &LinearImage) -> Tensor<T> {
    let plane = img.height() * img.width();
    Tensor::from_fn(&[1, 3, img.height(), img.width()], |i| T::of(img.data()[(i % plane) * 3 + i / plane] as f64))
}

/// Batch item `index` of a 3-channel tensor as an image.
pub fn tensor_image<T: Scalar>(t: &Tensor<T>, index: usize) -> Result<LinearImage> {
    let (n, c, h, w) = t.dims4()?;
    if c != 3 || index >= n {
        bail!(ShapeMismatch, "no RGB image {index} in tensor {:?}", t.shape());
    }
    let plane = h * w;
    let src = &t.data()[index * 3 * plane..][..3 * plane];
    let data = (0..3 * plane).map(|i| src[(i % 3) * plane + i / 3].as_f64() as f32).collect();
    LinearImage::new(h, w, data)
}

/// Concatenates tensors of equal trailing shape along the batch axis.
pub fn stack<T: Scalar>(items: &[Tensor<T>]) -> Result<Tensor<T>> {
    let Some(first) = items.first() else {
        bail!(InvalidParameter, "cannot stack an empty batch");
    };
    let (_, c, h, w) = first.dims4()?;
    let mut n = 0;
    let mut data = Vec::with_capacity(first.len() * items.len());
    for t in items {
        let (tn, tc, th, tw) = t.dims4()?;
        if (tc, th, tw) != (c, h, w) {
            bail!(ShapeMismatch, "cannot stack {:?} with {:?}", first.shape(), t.shape());
        }
        n += tn;
        data.extend_from_slice(t.data());
    }
    Tensor::new(&[n, c, h, w], data)
}

/// Model output together with its intermediate images.
#[derive(Debug, Clone)]
pub struct Inference {
    /// Final linear-domain estimate, before quantization.
    pub output: LinearImage,
    /// Restoration-branch estimate.
    pub restored: LinearImage,
    pub field: TransformField,
}

pub struct RawSrModel<T> {
    config: NetConfig,
    params: ParamStore<T>,
    restoration: RestorationNet<T>,
    color: ColorNet<T>,
    cache: Option<(Tensor<T>, Tensor<T>)>,
}

impl<T: Scalar> RawSrModel<T> {
    /// Xavier-initialized model; identical seeds give identical weights.
    pub fn new(config: NetConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = rng::stage_rng(seed, 0, Stage::Init);
        let mut params = ParamStore::new();
        let restoration = RestorationNet::new(&mut params, RESTORATION, &config, &mut rng)?;
        let color = ColorNet::new(&mut params, COLOR, &config, &mut rng)?;
        Ok(Self { config, params, restoration, color, cache: None })
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.params
    }

    pub fn restoration_ids(&self) -> Vec<ParamId> {
        self.params.ids_with_prefix(&format!("{RESTORATION}.")).collect()
    }

    pub fn color_ids(&self) -> Vec<ParamId> {
        self.params.ids_with_prefix(&format!("{COLOR}.")).collect()
    }

    fn check_inputs(&self, packed: &Tensor<T>, reference: &Tensor<T>) -> Result<()> {
        let (n, _, h, w) = packed.dims4()?;
        let (rn, _, rh, rw) = reference.dims4()?;
        if (rn, rh, rw) != (n, 2 * h, 2 * w) {
            bail!(ShapeMismatch, "reference {:?} must match the raw size of packed input {:?}", reference.shape(), packed.shape());
        }
        Ok(())
    }

    /// Restoration branch only: packed `(N, 4, h, w)` to `(N, 3, 2*scale*h, 2*scale*w)`.
    pub fn forward_restoration(&mut self, packed: &Tensor<T>) -> Result<Tensor<T>> {
        self.cache = None;
        Ok(self.restoration.forward(&self.params, packed)?.lin)
    }

    /// Accumulates restoration gradients for the last [`Self::forward_restoration`].
    pub fn backward_restoration(&mut self, d_lin: &Tensor<T>) -> Result<()> {
        self.restoration.backward(&mut self.params, d_lin, None, None)?;
        Ok(())
    }

    /// Full model on packed raw `(N, 4, h, w)` and reference `(N, 3, 2h, 2w)`.
    pub fn forward(&mut self, packed: &Tensor<T>, reference: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_inputs(packed, reference)?;
        let restored = self.restoration.forward(&self.params, packed)?;
        let head = self.color.forward(&self.params, reference, Some((&restored.f_s1, &restored.f_s2)))?;
        let out = apply_field(&restored.lin, &head)?;
        self.cache = Some((restored.lin, head));
        Ok(out)
    }

    /// Accumulates gradients of every parameter for the last [`Self::forward`]
    /// and returns the gradients of the packed raw and reference inputs.
    pub fn backward(&mut self, dy: &Tensor<T>) -> Result<(Tensor<T>, Tensor<T>)> {
        let Some((lin, head)) = &self.cache else {
            bail!(InvalidParameter, "model backward called before forward");
        };
        let (d_lin, d_head) = apply_field_backward(lin, head, dy)?;
        let grads = self.color.backward(&mut self.params, &d_head)?;
        let d_packed = self.restoration.backward(&mut self.params, &d_lin, grads.f_s1.as_ref(), grads.f_s2.as_ref())?;
        Ok((d_packed, grads.reference))
    }

    /// Restoration estimate and transform head of the last full forward.
    pub fn last_intermediates(&self) -> Option<(&Tensor<T>, &Tensor<T>)> {
        self.cache.as_ref().map(|(l, h)| (l, h))
    }

    /// Sets the transform head to emit `A = I`, `B = 0` everywhere.
    pub fn force_identity_head(&mut self) -> Result<()> {
        let weight = format!("{COLOR}.head.weight");
        let bias = format!("{COLOR}.head.bias");
        let zeros = alloc::vec![T::zero(); self.params.value(self.params.find(&weight).expect("head weight")).len()];
        self.params.assign(&weight, &zeros)?;
        let eye: Vec<T> = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0].iter().map(|&v| T::of(v)).collect();
        self.params.assign(&bias, &eye)
    }

    /// Whole-image inference. The raw mosaic and the reference must have the
    /// same size, a multiple of [`ALIGNMENT`].
    pub fn infer(&mut self, raw: &BayerImage, reference: &ColorImage) -> Result<Inference> {
        let (h, w) = (raw.height(), raw.width());
        if (reference.height(), reference.width()) != (h, w) {
            bail!(ShapeMismatch, "reference is {}x{} but raw is {}x{}", reference.width(), reference.height(), w, h);
        }
        if h % ALIGNMENT != 0 || w % ALIGNMENT != 0 {
            bail!(InvalidDimensions, "raw size {w}x{h} is not a multiple of {ALIGNMENT}");
        }
        let out = self.forward(&raw_tensor(raw)?, &image_tensor(&reference.to_linear()))?;
        let (lin, head) = self.cache.as_ref().expect("forward fills the cache");
        Ok(Inference { output: tensor_image(&out, 0)?, restored: tensor_image(lin, 0)?, field: head_to_field(head, 0)? })
    }

    /// Name, shape and values of every parameter in creation order.
    pub fn export(&self) -> Vec<(String, Vec<usize>, Vec<f32>)> {
        self.params
            .iter()
            .map(|(name, t)| (String::from(name), t.shape().to_vec(), t.data().iter().map(|v| v.as_f64() as f32).collect()))
            .collect()
    }

    /// Overwrites every parameter; names and shapes must match exactly.
    pub fn import(&mut self, tensors: &[(String, Vec<usize>, Vec<f32>)]) -> Result<()> {
        if tensors.len() != self.params.len() {
            bail!(ShapeMismatch, "expected {} parameter tensors, got {}", self.params.len(), tensors.len());
        }
        for (name, shape, values) in tensors {
            let Some(id) = self.params.find(name) else {
                bail!(ShapeMismatch, "unknown parameter {name:?}");
            };
            if self.params.get(id).shape() != shape.as_slice() {
                bail!(ShapeMismatch, "parameter {name:?} has shape {:?}, checkpoint has {shape:?}", self.params.get(id).shape());
            }
            let data: Vec<T> = values.iter().map(|&v| T::of(v as f64)).collect();
            self.params.assign(name, &data)?;
        }
        Ok(())
    }
}
