//! Backbones, assembly modes, and the sequential model container.

use std::fmt;
use std::str::FromStr;

use rand_chacha::ChaCha8Rng;

use super::{AdaptiveAvgPool1d, BatchNorm1d, Conv1d, Dense, Flatten, Layer, MaxPool1d, Relu, Residual, Tensor};
use crate::error::{invalid, Error, Result};
use crate::kernels::{init_params, KernelFamily};
use crate::seed;
use crate::tfconv::{TfConvLayer, TfConvVariant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Backbone {
    PaperCnn,
    Lenet1d,
    Resnet1d,
}

impl Backbone {
    pub const ALL: [Backbone; 3] = [Backbone::PaperCnn, Backbone::Lenet1d, Backbone::Resnet1d];

    pub fn name(self) -> &'static str {
        match self {
            Backbone::PaperCnn => "paper-cnn",
            Backbone::Lenet1d => "lenet-1d",
            Backbone::Resnet1d => "resnet-1d",
        }
    }
}

impl fmt::Display for Backbone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Backbone {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Backbone::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| invalid(format!("unknown backbone `{s}` (paper-cnn | lenet-1d | resnet-1d)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelMode {
    BackboneOnly,
    TfnAdd,
    TfnReplace,
    WknAdd,
    WknReplace,
    RandomTfn,
}

impl ModelMode {
    pub const ALL: [ModelMode; 6] = [
        ModelMode::BackboneOnly,
        ModelMode::TfnAdd,
        ModelMode::TfnReplace,
        ModelMode::WknAdd,
        ModelMode::WknReplace,
        ModelMode::RandomTfn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelMode::BackboneOnly => "backbone-only",
            ModelMode::TfnAdd => "tfn-add",
            ModelMode::TfnReplace => "tfn-replace",
            ModelMode::WknAdd => "wkn-add",
            ModelMode::WknReplace => "wkn-replace",
            ModelMode::RandomTfn => "random-tfn",
        }
    }

    pub fn uses_tfconv(self) -> bool {
        self != ModelMode::BackboneOnly
    }

    fn replaces_first(self) -> bool {
        matches!(self, ModelMode::TfnReplace | ModelMode::WknReplace)
    }

    fn variant(self) -> TfConvVariant {
        match self {
            ModelMode::WknAdd | ModelMode::WknReplace => TfConvVariant::RealOnly,
            _ => TfConvVariant::Modulus,
        }
    }
}

impl fmt::Display for ModelMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelMode::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| {
            invalid(format!(
                "unknown mode `{s}` (backbone-only | tfn-add | tfn-replace | wkn-add | wkn-replace | random-tfn)"
            ))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TfConvConfig {
    pub family: KernelFamily,
    pub channels: usize,
}

impl Default for TfConvConfig {
    fn default() -> Self {
        Self { family: KernelFamily::Sttf, channels: 8 }
    }
}

#[derive(Debug, Clone)]
pub struct Model {
    pub layers: Vec<Layer>,
    pub mode: ModelMode,
    pub backbone: Backbone,
    pub n_classes: usize,
    /// Kernel family and width of the time-frequency layer, if any.
    pub tfconv: Option<TfConvConfig>,
    /// Per-sample z-scoring ahead of the first layer.
    pub standardize_input: bool,
}

/// Tracks the channel count while appending layers. The first convolution
/// can be swapped for a prepared time-frequency layer.
struct Builder {
    layers: Vec<Layer>,
    channels: usize,
    features: usize,
    rng: ChaCha8Rng,
    replacement: Option<TfConvLayer>,
}

impl Builder {
    fn conv(&mut self, out: usize, k: usize) -> &mut Self {
        if let Some(tf) = self.replacement.take() {
            self.channels = tf.n_channels();
            self.layers.push(Layer::TfConv(tf));
        } else {
            self.layers.push(Layer::Conv1d(Conv1d::new(self.channels, out, k, &mut self.rng)));
            self.channels = out;
        }
        self
    }

    fn bn(&mut self) -> &mut Self {
        self.layers.push(Layer::BatchNorm1d(BatchNorm1d::new(self.channels)));
        self
    }

    fn relu(&mut self) -> &mut Self {
        self.layers.push(Layer::Relu(Relu::default()));
        self
    }

    fn maxpool(&mut self, size: usize) -> &mut Self {
        self.layers.push(Layer::MaxPool(MaxPool1d::new(size)));
        self
    }

    fn adaptive(&mut self, bins: usize) -> &mut Self {
        self.layers.push(Layer::AdaptiveAvgPool(AdaptiveAvgPool1d::new(bins)));
        self.features = self.channels * bins;
        self
    }

    fn flatten(&mut self) -> &mut Self {
        self.layers.push(Layer::Flatten(Flatten::default()));
        self
    }

    /// Dense layers with ReLU between them (none after the last).
    fn head(&mut self, widths: &[usize]) -> &mut Self {
        for (i, &w) in widths.iter().enumerate() {
            if i > 0 {
                self.relu();
            }
            self.layers.push(Layer::Dense(Dense::new(self.features, w, &mut self.rng)));
            self.features = w;
        }
        self
    }

    fn residual(&mut self) -> &mut Self {
        let c = self.channels;
        let body = vec![
            Layer::Conv1d(Conv1d::same(c, c, 3, &mut self.rng)),
            Layer::BatchNorm1d(BatchNorm1d::new(c)),
            Layer::Relu(Relu::default()),
            Layer::Conv1d(Conv1d::same(c, c, 3, &mut self.rng)),
            Layer::BatchNorm1d(BatchNorm1d::new(c)),
        ];
        self.layers.push(Layer::Residual(Residual { body }));
        self.relu()
    }
}

fn build_layers(backbone: Backbone, in_channels: usize, n_classes: usize, seed: u64, replacement: Option<TfConvLayer>) -> Result<Vec<Layer>> {
    if n_classes < 2 {
        return Err(invalid(format!("a classifier needs at least 2 classes, got {n_classes}")));
    }
    let mut b = Builder {
        layers: Vec::new(),
        channels: in_channels,
        features: 0,
        rng: seed::rng(seed, "model.backbone"),
        replacement,
    };
    match backbone {
        Backbone::PaperCnn => {
            b.conv(16, 15).bn().relu();
            b.conv(32, 3).bn().relu().maxpool(2);
            b.conv(64, 3).bn().relu();
            b.conv(128, 3).bn().relu().adaptive(4);
            b.flatten().head(&[512, 256, 64, n_classes]);
        }
        Backbone::Lenet1d => {
            b.conv(6, 5).relu().maxpool(2);
            b.conv(16, 5).relu().maxpool(2).adaptive(16);
            b.flatten().head(&[120, 84, n_classes]);
        }
        Backbone::Resnet1d => {
            b.conv(16, 15).bn().relu();
            b.conv(32, 3).bn().relu().maxpool(2);
            b.conv(64, 3).bn().relu();
            b.residual().residual();
            b.conv(128, 3).bn().relu().adaptive(4);
            b.flatten().head(&[512, 256, 64, n_classes]);
        }
    }
    Ok(b.layers)
}

/// One of the plain backbones on `in_channels` input channels.
pub fn build_backbone(backbone: Backbone, in_channels: usize, n_classes: usize, seed: u64) -> Result<Model> {
    if in_channels == 0 {
        return Err(invalid("backbone needs at least one input channel"));
    }
    Ok(Model {
        layers: build_layers(backbone, in_channels, n_classes, seed, None)?,
        mode: ModelMode::BackboneOnly,
        backbone,
        n_classes,
        tfconv: None,
        standardize_input: true,
    })
}

/// Combines a backbone with a time-frequency layer according to `mode`.
/// `random-tfn` always uses random kernels; the random family is rejected
/// in every other mode.
pub fn assemble_model(mode: ModelMode, backbone: Backbone, tf: TfConvConfig, n_classes: usize, seed: u64) -> Result<Model> {
    if mode == ModelMode::BackboneOnly {
        return build_backbone(backbone, 1, n_classes, seed);
    }
    let family = if mode == ModelMode::RandomTfn { KernelFamily::Random } else { tf.family };
    if family == KernelFamily::Random && mode != ModelMode::RandomTfn {
        return Err(invalid(format!("random kernels are only valid in random-tfn mode, not {mode}")));
    }
    if tf.channels == 0 {
        return Err(invalid("time-frequency layer needs at least one channel"));
    }
    let params = init_params(family, tf.channels, seed::derive(seed, "model.tfconv"))?;
    let layer = TfConvLayer::new(params, mode.variant())?;
    let layers = if mode.replaces_first() {
        build_layers(backbone, 1, n_classes, seed, Some(layer))?
    } else {
        let mut layers = vec![Layer::TfConv(layer)];
        layers.extend(build_layers(backbone, tf.channels, n_classes, seed, None)?);
        layers
    };
    Ok(Model {
        layers,
        mode,
        backbone,
        n_classes,
        tfconv: Some(TfConvConfig { family, channels: tf.channels }),
        standardize_input: true,
    })
}

/// Per-sample z-score; constant samples are only centred.
pub fn standardize(x: &Tensor) -> Tensor {
    let mut out = x.clone();
    let n = x.sample_size();
    for b in 0..x.batch {
        let s = out.sample_mut(b);
        let mean = s.iter().sum::<f64>() / n as f64;
        let var = s.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        let scale = if var > 0.0 { 1.0 / var.sqrt() } else { 1.0 };
        s.iter_mut().for_each(|v| *v = (*v - mean) * scale);
    }
    out
}

impl Model {
    pub fn forward(&mut self, x: &Tensor, train: bool) -> Result<Tensor> {
        let mut h = if self.standardize_input { standardize(x) } else { x.clone() };
        for layer in &mut self.layers {
            h = layer.forward(&h, train)?;
        }
        Ok(h)
    }

    /// Backpropagates `∂L/∂logits`, accumulating every parameter gradient.
    pub fn backward(&mut self, grad: &Tensor) -> Result<()> {
        let mut g = grad.clone();
        for i in (0..self.layers.len()).rev() {
            match self.layers[i].backward(&g, i > 0)? {
                Some(next) => g = next,
                None if i == 0 => {}
                None => return Err(invalid("layer dropped its input gradient")),
            }
        }
        Ok(())
    }

    pub fn zero_grad(&mut self) {
        self.layers.iter_mut().for_each(Layer::zero_grad);
    }

    pub fn clear_cache(&mut self) {
        self.layers.iter_mut().for_each(Layer::clear_cache);
    }

    pub fn param_count(&mut self) -> usize {
        self.layers.iter_mut().map(Layer::param_count).sum()
    }

    /// `(channels, length)` after every top-level layer, for a single-channel
    /// input of `in_len` samples.
    pub fn layer_shapes(&self, in_len: usize) -> Result<Vec<(usize, usize)>> {
        let mut s = (1, in_len);
        let mut out = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            s = layer.output_shape(s)?;
            out.push(s);
        }
        Ok(out)
    }

    pub fn tfconv_layer(&self) -> Option<&TfConvLayer> {
        self.layers.iter().find_map(|l| match l {
            Layer::TfConv(t) => Some(t),
            _ => None,
        })
    }

    pub fn tfconv_layer_mut(&mut self) -> Option<&mut TfConvLayer> {
        self.layers.iter_mut().find_map(|l| match l {
            Layer::TfConv(t) => Some(t),
            _ => None,
        })
    }

    pub fn first_conv(&self) -> Option<&Conv1d> {
        self.layers.iter().find_map(|l| match l {
            Layer::Conv1d(c) => Some(c),
            _ => None,
        })
    }

    /// Inference-mode activations at the Flatten output.
    pub fn representations(&mut self, x: &Tensor) -> Result<Tensor> {
        let flat = self
            .layers
            .iter()
            .position(|l| matches!(l, Layer::Flatten(_)))
            .ok_or_else(|| invalid("model has no Flatten layer"))?;
        let mut h = if self.standardize_input { standardize(x) } else { x.clone() };
        for layer in &mut self.layers[..=flat] {
            h = layer.forward(&h, false)?;
        }
        Ok(h)
    }
}
