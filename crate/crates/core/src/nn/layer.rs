use super::{AdaptiveAvgPool1d, BatchNorm1d, Conv1d, Dense, MaxPool1d, Tensor};
use crate::error::{invalid, Result};
use crate::kernels::KernelFamily;
use crate::tfconv::TfConvLayer;

#[derive(Debug, Clone, Default)]
pub struct Relu {
    mask: Vec<bool>,
}

impl Relu {
    pub fn forward(&mut self, x: &Tensor, train: bool) -> Tensor {
        if train {
            self.mask = x.data.iter().map(|&v| v > 0.0).collect();
        }
        Tensor { batch: x.batch, channels: x.channels, len: x.len, data: x.data.iter().map(|v| v.max(0.0)).collect() }
    }

    pub fn backward(&mut self, grad: &Tensor) -> Result<Tensor> {
        if grad.data.len() != self.mask.len() {
            return Err(invalid("relu gradient does not match the cached forward pass"));
        }
        let data = grad.data.iter().zip(&self.mask).map(|(&g, &m)| if m { g } else { 0.0 }).collect();
        Ok(Tensor { batch: grad.batch, channels: grad.channels, len: grad.len, data })
    }
}

/// `(b, c, l) → (b, c·l, 1)`.
#[derive(Debug, Clone, Default)]
pub struct Flatten {
    in_shape: (usize, usize),
}

impl Flatten {
    pub fn forward(&mut self, x: &Tensor) -> Tensor {
        self.in_shape = (x.channels, x.len);
        Tensor { batch: x.batch, channels: x.channels * x.len, len: 1, data: x.data.clone() }
    }

    pub fn backward(&self, grad: &Tensor) -> Tensor {
        Tensor { batch: grad.batch, channels: self.in_shape.0, len: self.in_shape.1, data: grad.data.clone() }
    }
}

/// `y = body(x) + x`; the body must preserve shape.
#[derive(Debug, Clone)]
pub struct Residual {
    pub body: Vec<Layer>,
}

/// A trainable tensor handed to the optimizer.
pub struct Param<'a> {
    pub value: &'a mut [f64],
    pub grad: &'a mut [f64],
    /// Kernel-control parameters are projected onto this family's box after updates.
    pub constraint: Option<KernelFamily>,
}

#[derive(Debug, Clone)]
pub enum Layer {
    TfConv(TfConvLayer),
    Conv1d(Conv1d),
    BatchNorm1d(BatchNorm1d),
    Relu(Relu),
    MaxPool(MaxPool1d),
    AdaptiveAvgPool(AdaptiveAvgPool1d),
    Flatten(Flatten),
    Dense(Dense),
    Residual(Residual),
}

impl Layer {
    pub fn kind(&self) -> &'static str {
        match self {
            Layer::TfConv(_) => "tfconv",
            Layer::Conv1d(_) => "conv1d",
            Layer::BatchNorm1d(_) => "batchnorm1d",
            Layer::Relu(_) => "relu",
            Layer::MaxPool(_) => "maxpool",
            Layer::AdaptiveAvgPool(_) => "adaptive_avgpool",
            Layer::Flatten(_) => "flatten",
            Layer::Dense(_) => "dense",
            Layer::Residual(_) => "residual",
        }
    }

    pub fn forward(&mut self, x: &Tensor, train: bool) -> Result<Tensor> {
        match self {
            Layer::TfConv(l) => l.forward(x, train),
            Layer::Conv1d(l) => l.forward(x, train),
            Layer::BatchNorm1d(l) => l.forward(x, train),
            Layer::Relu(l) => Ok(l.forward(x, train)),
            Layer::MaxPool(l) => l.forward(x, train),
            Layer::AdaptiveAvgPool(l) => l.forward(x, train),
            Layer::Flatten(l) => Ok(l.forward(x)),
            Layer::Dense(l) => l.forward(x, train),
            Layer::Residual(r) => {
                let mut h = x.clone();
                for layer in &mut r.body {
                    h = layer.forward(&h, train)?;
                }
                if h.shape() != x.shape() {
                    return Err(invalid("residual body changed the tensor shape"));
                }
                h.data.iter_mut().zip(&x.data).for_each(|(a, b)| *a += b);
                Ok(h)
            }
        }
    }

    /// Accumulates parameter gradients and returns `∂L/∂input` if requested.
    pub fn backward(&mut self, grad: &Tensor, want_input: bool) -> Result<Option<Tensor>> {
        match self {
            Layer::TfConv(l) => l.backward(grad, want_input),
            Layer::Conv1d(l) => l.backward(grad, want_input),
            Layer::BatchNorm1d(l) => l.backward(grad, want_input),
            Layer::Relu(l) => l.backward(grad).map(Some),
            Layer::MaxPool(l) => l.backward(grad).map(Some),
            Layer::AdaptiveAvgPool(l) => l.backward(grad).map(Some),
            Layer::Flatten(l) => Ok(Some(l.backward(grad))),
            Layer::Dense(l) => l.backward(grad, want_input),
            Layer::Residual(r) => {
                let mut g = grad.clone();
                for layer in r.body.iter_mut().rev() {
                    g = layer
                        .backward(&g, true)?
                        .ok_or_else(|| invalid("residual body dropped its input gradient"))?;
                }
                g.data.iter_mut().zip(&grad.data).for_each(|(a, b)| *a += b);
                Ok(Some(g))
            }
        }
    }

    /// `(channels, length)` produced from a `(channels, length)` input.
    pub fn output_shape(&self, (c, l): (usize, usize)) -> Result<(usize, usize)> {
        let mismatch = |want: usize| {
            invalid(format!("{} expects {want} input channels, got {c}", self.kind()))
        };
        match self {
            Layer::TfConv(t) => {
                if c != 1 {
                    return Err(mismatch(1));
                }
                Ok((t.n_channels(), l))
            }
            Layer::Conv1d(conv) => {
                if c != conv.in_channels {
                    return Err(mismatch(conv.in_channels));
                }
                Ok((conv.out_channels, conv.output_len(l)?))
            }
            Layer::BatchNorm1d(bn) => {
                if c != bn.channels {
                    return Err(mismatch(bn.channels));
                }
                Ok((c, l))
            }
            Layer::Relu(_) => Ok((c, l)),
            Layer::MaxPool(p) => Ok((c, p.output_len(l)?)),
            Layer::AdaptiveAvgPool(p) => Ok((c, p.output_len(l)?)),
            Layer::Flatten(_) => Ok((c * l, 1)),
            Layer::Dense(d) => {
                if c != d.inputs || l != 1 {
                    return Err(invalid(format!("dense expects {} features, got {c}×{l}", d.inputs)));
                }
                Ok((d.outputs, 1))
            }
            Layer::Residual(r) => {
                let mut s = (c, l);
                for layer in &r.body {
                    s = layer.output_shape(s)?;
                }
                if s != (c, l) {
                    return Err(invalid("residual body must preserve shape"));
                }
                Ok(s)
            }
        }
    }

    pub fn visit_params(&mut self, f: &mut dyn FnMut(Param<'_>)) {
        match self {
            Layer::TfConv(t) => f(Param {
                value: &mut t.params.theta,
                grad: &mut t.grad_theta,
                constraint: Some(t.params.family),
            }),
            Layer::Conv1d(c) => {
                f(Param { value: &mut c.weight, grad: &mut c.grad_weight, constraint: None });
                f(Param { value: &mut c.bias, grad: &mut c.grad_bias, constraint: None });
            }
            Layer::BatchNorm1d(bn) => {
                f(Param { value: &mut bn.gamma, grad: &mut bn.grad_gamma, constraint: None });
                f(Param { value: &mut bn.beta, grad: &mut bn.grad_beta, constraint: None });
            }
            Layer::Dense(d) => {
                f(Param { value: &mut d.weight, grad: &mut d.grad_weight, constraint: None });
                f(Param { value: &mut d.bias, grad: &mut d.grad_bias, constraint: None });
            }
            Layer::Residual(r) => r.body.iter_mut().for_each(|l| l.visit_params(f)),
            Layer::Relu(_) | Layer::MaxPool(_) | Layer::AdaptiveAvgPool(_) | Layer::Flatten(_) => {}
        }
    }

    /// Every persisted buffer (parameters and running statistics), tagged.
    pub fn visit_state(&mut self, f: &mut dyn FnMut(&'static str, &mut Vec<f64>)) {
        match self {
            Layer::TfConv(t) => f("tfconv.theta", &mut t.params.theta),
            Layer::Conv1d(c) => {
                f("conv1d.weight", &mut c.weight);
                f("conv1d.bias", &mut c.bias);
            }
            Layer::BatchNorm1d(bn) => {
                f("batchnorm1d.gamma", &mut bn.gamma);
                f("batchnorm1d.beta", &mut bn.beta);
                f("batchnorm1d.running_mean", &mut bn.running_mean);
                f("batchnorm1d.running_var", &mut bn.running_var);
            }
            Layer::Dense(d) => {
                f("dense.weight", &mut d.weight);
                f("dense.bias", &mut d.bias);
            }
            Layer::Residual(r) => r.body.iter_mut().for_each(|l| l.visit_state(f)),
            Layer::Relu(_) | Layer::MaxPool(_) | Layer::AdaptiveAvgPool(_) | Layer::Flatten(_) => {}
        }
    }

    pub fn zero_grad(&mut self) {
        self.visit_params(&mut |p| p.grad.fill(0.0));
    }

    /// Drops cached activations.
    pub fn clear_cache(&mut self) {
        match self {
            Layer::TfConv(t) => t.clear_cache(),
            Layer::Conv1d(c) => c.clear_cache(),
            Layer::BatchNorm1d(bn) => bn.clear_cache(),
            Layer::Relu(r) => r.mask = Vec::new(),
            Layer::MaxPool(p) => p.clear_cache(),
            Layer::Dense(d) => d.clear_cache(),
            Layer::Residual(r) => r.body.iter_mut().for_each(Layer::clear_cache),
            Layer::AdaptiveAvgPool(_) | Layer::Flatten(_) => {}
        }
    }

    pub fn param_count(&mut self) -> usize {
        let mut n = 0;
        self.visit_params(&mut |p| n += p.value.len());
        n
    }
}
