//! Central finite-difference checks of a model's analytic gradients.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};
use crate::kernels::{init_params, KernelFamily};
use crate::nn::{
    softmax_cross_entropy, AdaptiveAvgPool1d, Backbone, BatchNorm1d, Conv1d, Dense, Flatten, Layer, MaxPool1d, Model,
    ModelMode, Relu, Residual, Tensor, TfConvConfig,
};
use crate::tfconv::{TfConvLayer, TfConvVariant};

#[derive(Debug, Clone, PartialEq)]
pub struct GradEntry {
    /// Top-level layer index and kind.
    pub layer: usize,
    pub kind: &'static str,
    /// Parameter tensor ordinal within the layer and element index.
    pub tensor: usize,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

impl GradEntry {
    /// `|a - n| / max(|a|, |n|, floor)`
    pub fn relative_error(&self, floor: f64) -> f64 {
        (self.analytic - self.numeric).abs() / self.analytic.abs().max(self.numeric.abs()).max(floor)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GradReport {
    pub entries: Vec<GradEntry>,
}

impl GradReport {
    pub fn worst(&self, floor: f64) -> Option<&GradEntry> {
        self.entries
            .iter()
            .max_by(|a, b| a.relative_error(floor).total_cmp(&b.relative_error(floor)))
    }

    pub fn max_relative_error(&self, floor: f64) -> f64 {
        self.worst(floor).map_or(0.0, |e| e.relative_error(floor))
    }

    pub fn kinds(&self) -> Vec<&'static str> {
        let mut k: Vec<&'static str> = self.entries.iter().map(|e| e.kind).collect();
        k.sort_unstable();
        k.dedup();
        k
    }
}

fn loss(model: &mut Model, x: &Tensor, labels: &[usize]) -> Result<f64> {
    let logits = model.forward(x, true)?;
    Ok(softmax_cross_entropy(&logits, labels)?.0)
}

/// Calls `f` on parameter element `(layer, tensor, index)`.
fn with_element(model: &mut Model, layer: usize, tensor: usize, index: usize, f: &mut dyn FnMut(&mut f64)) {
    let mut t = 0;
    model.layers[layer].visit_params(&mut |p| {
        if t == tensor {
            f(&mut p.value[index]);
        }
        t += 1;
    });
}

/// Compares the back-propagated gradient of the mean cross-entropy of
/// `model(x)` (training mode) with central differences of step `h`, for every
/// trainable scalar.
pub fn check_model_gradients(model: &mut Model, x: &Tensor, labels: &[usize], h: f64) -> Result<GradReport> {
    if !(h > 0.0) {
        return Err(invalid("finite-difference step must be positive"));
    }
    model.zero_grad();
    let logits = model.forward(x, true)?;
    let (_, grad) = softmax_cross_entropy(&logits, labels)?;
    model.backward(&grad)?;
    let mut shapes = Vec::new();
    for (li, layer) in model.layers.iter_mut().enumerate() {
        let kind = layer.kind();
        let mut t = 0;
        layer.visit_params(&mut |p| {
            shapes.push((li, kind, t, p.grad.to_vec()));
            t += 1;
        });
    }
    let mut report = GradReport::default();
    for (layer, kind, tensor, analytic) in shapes {
        for (index, &a) in analytic.iter().enumerate() {
            let mut orig = 0.0;
            with_element(model, layer, tensor, index, &mut |v| {
                orig = *v;
                *v = orig + h;
            });
            let plus = loss(model, x, labels)?;
            with_element(model, layer, tensor, index, &mut |v| *v = orig - h);
            let minus = loss(model, x, labels)?;
            with_element(model, layer, tensor, index, &mut |v| *v = orig);
            report.entries.push(GradEntry { layer, kind, tensor, index, analytic: a, numeric: (plus - minus) / (2.0 * h) });
        }
    }
    model.clear_cache();
    Ok(report)
}

/// A small network touching every layer kind: an optional two-channel
/// time-frequency layer, convolution, batch norm, ReLU, max pool, a residual
/// block, adaptive pool, flatten and two dense layers, for `n_classes` outputs.
pub fn micro_model(tf: Option<(KernelFamily, TfConvVariant)>, n_classes: usize, seed: u64) -> Result<Model> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers = Vec::new();
    let mut channels = 1;
    if let Some((family, variant)) = tf {
        layers.push(Layer::TfConv(TfConvLayer::new(init_params(family, 2, seed)?, variant)?));
        channels = 2;
    }
    layers.extend([
        Layer::Conv1d(Conv1d::same(channels, 4, 5, &mut rng)),
        Layer::BatchNorm1d(BatchNorm1d::new(4)),
        Layer::Relu(Relu::default()),
        Layer::MaxPool(MaxPool1d::new(2)),
        Layer::Residual(Residual {
            body: vec![
                Layer::Conv1d(Conv1d::same(4, 4, 3, &mut rng)),
                Layer::BatchNorm1d(BatchNorm1d::new(4)),
                Layer::Relu(Relu::default()),
            ],
        }),
        Layer::AdaptiveAvgPool(AdaptiveAvgPool1d::new(4)),
        Layer::Flatten(Flatten::default()),
        Layer::Dense(Dense::new(16, 8, &mut rng)),
        Layer::Relu(Relu::default()),
        Layer::Dense(Dense::new(8, n_classes, &mut rng)),
    ]);
    let mode = match tf {
        None => ModelMode::BackboneOnly,
        Some((_, TfConvVariant::RealOnly)) => ModelMode::WknAdd,
        Some((KernelFamily::Random, _)) => ModelMode::RandomTfn,
        Some(_) => ModelMode::TfnAdd,
    };
    Ok(Model {
        layers,
        mode,
        backbone: Backbone::PaperCnn,
        n_classes,
        tfconv: tf.map(|(family, _)| TfConvConfig { family, channels: 2 }),
        standardize_input: true,
    })
}

/// Time-frequency layer followed only by smooth layers (convolution, batch
/// norm, average pooling, dense), so finite differences of θ never straddle a
/// ReLU or max-pool switch.
pub fn smooth_tfconv_model(family: KernelFamily, variant: TfConvVariant, n_classes: usize, seed: u64) -> Result<Model> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = vec![
        Layer::TfConv(TfConvLayer::new(init_params(family, 2, seed)?, variant)?),
        Layer::Conv1d(Conv1d::same(2, 4, 5, &mut rng)),
        Layer::BatchNorm1d(BatchNorm1d::new(4)),
        Layer::AdaptiveAvgPool(AdaptiveAvgPool1d::new(4)),
        Layer::Flatten(Flatten::default()),
        Layer::Dense(Dense::new(16, n_classes, &mut rng)),
    ];
    let mode = match (family, variant) {
        (_, TfConvVariant::RealOnly) => ModelMode::WknAdd,
        (KernelFamily::Random, _) => ModelMode::RandomTfn,
        _ => ModelMode::TfnAdd,
    };
    Ok(Model {
        layers,
        mode,
        backbone: Backbone::PaperCnn,
        n_classes,
        tfconv: Some(TfConvConfig { family, channels: 2 }),
        standardize_input: true,
    })
}
