use super::Tensor;
use crate::error::{invalid, Result};

/// Non-overlapping max pooling; output length is `floor(len / size)`.
#[derive(Debug, Clone)]
pub struct MaxPool1d {
    pub size: usize,
    // flat input index of each output's winner
    argmax: Vec<usize>,
    input_shape: (usize, usize, usize),
}

impl MaxPool1d {
    pub fn new(size: usize) -> Self {
        Self { size, argmax: Vec::new(), input_shape: (0, 0, 0) }
    }

    pub fn output_len(&self, len: usize) -> Result<usize> {
        if len < self.size {
            return Err(invalid(format!("max pool of {} over length {len}", self.size)));
        }
        Ok(len / self.size)
    }

    pub fn forward(&mut self, x: &Tensor, train: bool) -> Result<Tensor> {
        let out_len = self.output_len(x.len)?;
        let mut out = Tensor::zeros(x.batch, x.channels, out_len);
        let mut argmax = Vec::with_capacity(if train { out.data.len() } else { 0 });
        for row in 0..x.batch * x.channels {
            let src = &x.data[row * x.len..(row + 1) * x.len];
            for t in 0..out_len {
                let window = &src[t * self.size..(t + 1) * self.size];
                let (best, &v) = window
                    .iter()
                    .enumerate()
                    .fold((0, &window[0]), |acc, (i, v)| if *v > *acc.1 { (i, v) } else { acc });
                out.data[row * out_len + t] = v;
                if train {
                    argmax.push(row * x.len + t * self.size + best);
                }
            }
        }
        if train {
            self.argmax = argmax;
            self.input_shape = x.shape();
        }
        Ok(out)
    }

    pub fn backward(&mut self, grad: &Tensor) -> Result<Tensor> {
        if grad.data.len() != self.argmax.len() {
            return Err(invalid("max pool gradient does not match the cached forward pass"));
        }
        let (b, c, l) = self.input_shape;
        let mut dx = Tensor::zeros(b, c, l);
        for (g, &i) in grad.data.iter().zip(&self.argmax) {
            dx.data[i] += g;
        }
        Ok(dx)
    }

    pub fn clear_cache(&mut self) {
        self.argmax = Vec::new();
    }
}

/// Averages each row into exactly `bins` windows, bin `i` spanning
/// `[floor(i·L/bins), ceil((i+1)·L/bins))`.
#[derive(Debug, Clone)]
pub struct AdaptiveAvgPool1d {
    pub bins: usize,
    in_len: usize,
}

impl AdaptiveAvgPool1d {
    pub fn new(bins: usize) -> Self {
        Self { bins, in_len: 0 }
    }

    fn window(&self, i: usize, len: usize) -> (usize, usize) {
        let start = i * len / self.bins;
        let end = ((i + 1) * len).div_ceil(self.bins);
        (start, end)
    }

    pub fn output_len(&self, len: usize) -> Result<usize> {
        if len == 0 || self.bins == 0 {
            return Err(invalid(format!("adaptive pool to {} bins over length {len}", self.bins)));
        }
        Ok(self.bins)
    }

    pub fn forward(&mut self, x: &Tensor, train: bool) -> Result<Tensor> {
        self.output_len(x.len)?;
        let mut out = Tensor::zeros(x.batch, x.channels, self.bins);
        for row in 0..x.batch * x.channels {
            let src = &x.data[row * x.len..(row + 1) * x.len];
            for i in 0..self.bins {
                let (s, e) = self.window(i, x.len);
                out.data[row * self.bins + i] = src[s..e].iter().sum::<f64>() / (e - s) as f64;
            }
        }
        if train {
            self.in_len = x.len;
        }
        Ok(out)
    }

    pub fn backward(&mut self, grad: &Tensor) -> Result<Tensor> {
        if grad.len != self.bins || self.in_len == 0 {
            return Err(invalid("adaptive pool gradient does not match the cached forward pass"));
        }
        let mut dx = Tensor::zeros(grad.batch, grad.channels, self.in_len);
        for row in 0..grad.batch * grad.channels {
            for i in 0..self.bins {
                let (s, e) = self.window(i, self.in_len);
                let g = grad.data[row * self.bins + i] / (e - s) as f64;
                dx.data[row * self.in_len + s..row * self.in_len + e].iter_mut().for_each(|v| *v += g);
            }
        }
        Ok(dx)
    }
}
