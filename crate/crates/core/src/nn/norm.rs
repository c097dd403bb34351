use super::Tensor;
use crate::error::{invalid, Result};

const MOMENTUM: f64 = 0.1;

/// Per-channel batch normalisation over `batch × length`, with learnable
/// scale/shift and running statistics for inference.
#[derive(Debug, Clone)]
pub struct BatchNorm1d {
    pub channels: usize,
    pub eps: f64,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub grad_gamma: Vec<f64>,
    pub grad_beta: Vec<f64>,
    cache: Option<Cache>,
}

#[derive(Debug, Clone)]
struct Cache {
    xhat: Tensor,
    inv_std: Vec<f64>,
}

impl BatchNorm1d {
    pub fn new(channels: usize) -> Self {
        Self {
            channels,
            eps: 1e-5,
            gamma: vec![1.0; channels],
            beta: vec![0.0; channels],
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
            grad_gamma: vec![0.0; channels],
            grad_beta: vec![0.0; channels],
            cache: None,
        }
    }

    pub fn forward(&mut self, x: &Tensor, train: bool) -> Result<Tensor> {
        x.expect_shape(self.channels, None, "batchnorm")?;
        let (batch, channels, len) = x.shape();
        if !train {
            let coeffs: Vec<(f64, f64)> = (0..channels)
                .map(|c| {
                    let scale = self.gamma[c] / (self.running_var[c] + self.eps).sqrt();
                    (scale, self.beta[c] - self.running_mean[c] * scale)
                })
                .collect();
            let mut data = Vec::with_capacity(x.data.len());
            for (r, row) in x.data.chunks(len).enumerate() {
                let (scale, shift) = coeffs[r % channels];
                data.extend(row.iter().map(|v| v * scale + shift));
            }
            return Tensor::from_vec(batch, channels, len, data);
        }
        if batch < 2 {
            return Err(invalid("batchnorm in training mode needs a batch of at least 2"));
        }
        let count = (batch * len) as f64;
        let mut mean = vec![0.0; channels];
        let mut inv_std = vec![0.0; channels];
        for c in 0..channels {
            let m = (0..batch).map(|b| x.row(b, c).iter().sum::<f64>()).sum::<f64>() / count;
            let var = (0..batch)
                .map(|b| x.row(b, c).iter().map(|v| (v - m) * (v - m)).sum::<f64>())
                .sum::<f64>()
                / count;
            mean[c] = m;
            inv_std[c] = 1.0 / (var + self.eps).sqrt();
            let unbiased = if count > 1.0 { var * count / (count - 1.0) } else { var };
            self.running_mean[c] = (1.0 - MOMENTUM) * self.running_mean[c] + MOMENTUM * m;
            self.running_var[c] = (1.0 - MOMENTUM) * self.running_var[c] + MOMENTUM * unbiased;
        }
        let mut xhat = Vec::with_capacity(x.data.len());
        let mut out = Vec::with_capacity(x.data.len());
        for (r, row) in x.data.chunks(len).enumerate() {
            let c = r % channels;
            let (m, s, g, b) = (mean[c], inv_std[c], self.gamma[c], self.beta[c]);
            let start = xhat.len();
            xhat.extend(row.iter().map(|v| (v - m) * s));
            out.extend(xhat[start..].iter().map(|v| g * v + b));
        }
        self.cache = Some(Cache { xhat: Tensor::from_vec(batch, channels, len, xhat)?, inv_std });
        Tensor::from_vec(batch, channels, len, out)
    }

    pub fn backward(&mut self, grad: &Tensor, want_input: bool) -> Result<Option<Tensor>> {
        let cache = self
            .cache
            .as_ref()
            .ok_or_else(|| invalid("batchnorm backward called without a training forward pass"))?;
        if grad.shape() != cache.xhat.shape() {
            return Err(invalid("batchnorm gradient shape does not match its output"));
        }
        let (batch, _, len) = grad.shape();
        let count = (batch * len) as f64;
        let mut sums = vec![(0.0, 0.0); self.channels];
        for (c, s) in sums.iter_mut().enumerate() {
            for b in 0..batch {
                for (dy, xh) in grad.row(b, c).iter().zip(cache.xhat.row(b, c)) {
                    s.0 += dy;
                    s.1 += dy * xh;
                }
            }
            self.grad_beta[c] += s.0;
            self.grad_gamma[c] += s.1;
        }
        if !want_input {
            return Ok(None);
        }
        let channels = self.channels;
        let coeffs: Vec<f64> = (0..channels).map(|c| self.gamma[c] * cache.inv_std[c] / count).collect();
        let mut data = Vec::with_capacity(grad.data.len());
        for (r, (g, xh)) in grad.data.chunks(len).zip(cache.xhat.data.chunks(len)).enumerate() {
            let c = r % channels;
            let (k, (sum_dy, sum_dy_xhat)) = (coeffs[c], sums[c]);
            data.extend(g.iter().zip(xh).map(|(g, xh)| k * (count * g - sum_dy - xh * sum_dy_xhat)));
        }
        Ok(Some(Tensor::from_vec(batch, channels, len, data)?))
    }

    pub fn clear_cache(&mut self) {
        self.cache = None;
    }
}
