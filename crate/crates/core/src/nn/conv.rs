//! Multi-channel 1D correlation layer, computed as im2col + GEMM per sample.

use rand::Rng;

use super::gemm::gemm;
use super::Tensor;
use crate::error::{invalid, Result};
use crate::math::same_padding;
use crate::par;

/// Shape bookkeeping for one correlation.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Geometry {
    pub in_ch: usize,
    pub out_ch: usize,
    pub k: usize,
    pub pad_l: usize,
    pub pad_r: usize,
    pub in_len: usize,
}

impl Geometry {
    pub fn out_len(&self) -> usize {
        (self.in_len + self.pad_l + self.pad_r + 1).saturating_sub(self.k)
    }

    fn patch(&self) -> usize {
        self.in_ch * self.k
    }
}

fn im2col(x: &[f64], g: &Geometry, col: &mut [f64]) {
    let out_len = g.out_len();
    for c in 0..g.in_ch {
        let src = &x[c * g.in_len..(c + 1) * g.in_len];
        for m in 0..g.k {
            let row = &mut col[(c * g.k + m) * out_len..(c * g.k + m + 1) * out_len];
            // input index for output t is t + m - pad_l
            let lo = g.pad_l.saturating_sub(m).min(out_len);
            let hi = (g.in_len + g.pad_l).saturating_sub(m).min(out_len).max(lo);
            row[..lo].fill(0.0);
            row[hi..].fill(0.0);
            if hi > lo {
                let s = lo + m - g.pad_l;
                row[lo..hi].copy_from_slice(&src[s..s + (hi - lo)]);
            }
        }
    }
}

fn col2im_add(col: &[f64], g: &Geometry, dx: &mut [f64]) {
    let out_len = g.out_len();
    for c in 0..g.in_ch {
        let dst = &mut dx[c * g.in_len..(c + 1) * g.in_len];
        for m in 0..g.k {
            let row = &col[(c * g.k + m) * out_len..(c * g.k + m + 1) * out_len];
            let lo = g.pad_l.saturating_sub(m).min(out_len);
            let hi = (g.in_len + g.pad_l).saturating_sub(m).min(out_len).max(lo);
            if hi > lo {
                let s = lo + m - g.pad_l;
                for (d, v) in dst[s..s + (hi - lo)].iter_mut().zip(&row[lo..hi]) {
                    *d += v;
                }
            }
        }
    }
}

fn forward_sample(x: &[f64], weight: &[f64], g: &Geometry, dst: &mut [f64]) {
    let out_len = g.out_len();
    let mut col = vec![0.0; g.patch() * out_len];
    im2col(x, g, &mut col);
    gemm(g.out_ch, g.patch(), out_len, 1.0, weight, false, &col, false, 0.0, dst);
}

/// Weight gradient of one sample, plus its input gradient if requested.
fn backward_sample(x: &[f64], weight: &[f64], dout: &[f64], g: &Geometry, want_input: bool) -> (Vec<f64>, Option<Vec<f64>>) {
    let out_len = g.out_len();
    let patch = g.patch();
    let mut dw = vec![0.0; g.out_ch * patch];
    let mut col = vec![0.0; patch * out_len];
    im2col(x, g, &mut col);
    gemm(g.out_ch, out_len, patch, 1.0, dout, false, &col, true, 0.0, &mut dw);
    let dx = want_input.then(|| {
        gemm(patch, g.out_ch, out_len, 1.0, weight, true, dout, false, 0.0, &mut col);
        let mut dx = vec![0.0; g.in_ch * g.in_len];
        col2im_add(&col, g, &mut dx);
        dx
    });
    (dw, dx)
}

/// `out[b, o, t] = bias[o] + Σ_{c,m} w[o, c, m]·x_pad[b, c, t+m]`.
pub(crate) fn correlate_forward(x: &Tensor, weight: &[f64], bias: Option<&[f64]>, g: &Geometry) -> Tensor {
    let out_len = g.out_len();
    let mut out = Tensor::zeros(x.batch, g.out_ch, out_len);
    par::for_each_chunk_mut(&mut out.data, g.out_ch * out_len, |b, dst| {
        forward_sample(x.sample(b), weight, g, dst);
        if let Some(bias) = bias {
            for (o, row) in dst.chunks_mut(out_len).enumerate() {
                row.iter_mut().for_each(|v| *v += bias[o]);
            }
        }
    });
    out
}

pub(crate) struct CorrelationGrads {
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
    pub input: Option<Tensor>,
}

pub(crate) fn correlate_backward(
    x: &Tensor,
    weight: &[f64],
    grad: &Tensor,
    g: &Geometry,
    want_input: bool,
) -> CorrelationGrads {
    let parts = par::map_indexed(x.batch, |b| backward_sample(x.sample(b), weight, grad.sample(b), g, want_input));
    let mut dws = Vec::with_capacity(parts.len());
    let mut dx_data = Vec::with_capacity(if want_input { x.data.len() } else { 0 });
    for (dw, dx) in parts {
        dws.push(dw);
        if let Some(dx) = dx {
            dx_data.extend(dx);
        }
    }
    let mut bias = vec![0.0; g.out_ch];
    for b in 0..grad.batch {
        for (o, acc) in bias.iter_mut().enumerate() {
            *acc += grad.row(b, o).iter().sum::<f64>();
        }
    }
    CorrelationGrads {
        weight: par::sum_in_order(dws, g.out_ch * g.patch()),
        bias,
        input: want_input.then(|| Tensor { batch: x.batch, channels: g.in_ch, len: g.in_len, data: dx_data }),
    }
}

/// Trainable 1D convolution (stride 1), `weight` laid out `out × in × k`.
#[derive(Debug, Clone)]
pub struct Conv1d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub pad_left: usize,
    pub pad_right: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
    pub grad_weight: Vec<f64>,
    pub grad_bias: Vec<f64>,
    input: Option<Tensor>,
}

impl Conv1d {
    /// Valid (unpadded) convolution with `±sqrt(6/fan_in)` uniform weights.
    pub fn new<R: Rng>(in_channels: usize, out_channels: usize, kernel: usize, rng: &mut R) -> Self {
        Self::with_padding(in_channels, out_channels, kernel, (0, 0), rng)
    }

    /// Zero-padded convolution whose output length equals its input length.
    pub fn same<R: Rng>(in_channels: usize, out_channels: usize, kernel: usize, rng: &mut R) -> Self {
        Self::with_padding(in_channels, out_channels, kernel, same_padding(kernel), rng)
    }

    fn with_padding<R: Rng>(in_channels: usize, out_channels: usize, kernel: usize, pad: (usize, usize), rng: &mut R) -> Self {
        let fan_in = (in_channels * kernel) as f64;
        let bound = (6.0 / fan_in).sqrt();
        let n = out_channels * in_channels * kernel;
        Self {
            in_channels,
            out_channels,
            kernel,
            pad_left: pad.0,
            pad_right: pad.1,
            weight: (0..n).map(|_| rng.random_range(-bound..bound)).collect(),
            bias: vec![0.0; out_channels],
            grad_weight: vec![0.0; n],
            grad_bias: vec![0.0; out_channels],
            input: None,
        }
    }

    fn geometry(&self, in_len: usize) -> Geometry {
        Geometry {
            in_ch: self.in_channels,
            out_ch: self.out_channels,
            k: self.kernel,
            pad_l: self.pad_left,
            pad_r: self.pad_right,
            in_len,
        }
    }

    pub fn output_len(&self, in_len: usize) -> Result<usize> {
        let padded = in_len + self.pad_left + self.pad_right;
        if padded < self.kernel {
            return Err(invalid(format!(
                "conv kernel {} longer than padded input {padded}",
                self.kernel
            )));
        }
        Ok(padded - self.kernel + 1)
    }

    pub fn forward(&mut self, x: &Tensor, train: bool) -> Result<Tensor> {
        x.expect_shape(self.in_channels, None, "conv1d")?;
        self.output_len(x.len)?;
        let out = correlate_forward(x, &self.weight, Some(&self.bias), &self.geometry(x.len));
        if train {
            self.input = Some(x.clone());
        }
        Ok(out)
    }

    /// Accumulates weight/bias gradients; returns the input gradient if asked.
    pub fn backward(&mut self, grad: &Tensor, want_input: bool) -> Result<Option<Tensor>> {
        let x = self
            .input
            .as_ref()
            .ok_or_else(|| invalid("conv1d backward called without a training forward pass"))?;
        let g = self.geometry(x.len);
        if grad.shape() != (x.batch, self.out_channels, g.out_len()) {
            return Err(invalid(format!(
                "conv1d gradient shape {:?} does not match output {:?}",
                grad.shape(),
                (x.batch, self.out_channels, g.out_len())
            )));
        }
        let grads = correlate_backward(x, &self.weight, grad, &g, want_input);
        self.grad_weight.iter_mut().zip(&grads.weight).for_each(|(a, b)| *a += b);
        self.grad_bias.iter_mut().zip(&grads.bias).for_each(|(a, b)| *a += b);
        Ok(grads.input)
    }

    pub fn clear_cache(&mut self) {
        self.input = None;
    }
}
