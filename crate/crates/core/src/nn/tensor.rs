use crate::error::{invalid, Result};

/// Dense `(batch, channels, length)` array in row-major order.
///
/// Feature vectors (after `Flatten` or `Dense`) use `length == 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub batch: usize,
    pub channels: usize,
    pub len: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(batch: usize, channels: usize, len: usize) -> Self {
        Self { batch, channels, len, data: vec![0.0; batch * channels * len] }
    }

    pub fn from_vec(batch: usize, channels: usize, len: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != batch * channels * len {
            return Err(invalid(format!(
                "buffer of {} values does not fit shape {batch}×{channels}×{len}",
                data.len()
            )));
        }
        Ok(Self { batch, channels, len, data })
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.batch, self.channels, self.len)
    }

    /// Elements per batch item.
    pub fn sample_size(&self) -> usize {
        self.channels * self.len
    }

    pub fn sample(&self, b: usize) -> &[f64] {
        let n = self.sample_size();
        &self.data[b * n..(b + 1) * n]
    }

    pub fn sample_mut(&mut self, b: usize) -> &mut [f64] {
        let n = self.sample_size();
        &mut self.data[b * n..(b + 1) * n]
    }

    pub fn row(&self, b: usize, c: usize) -> &[f64] {
        let start = (b * self.channels + c) * self.len;
        &self.data[start..start + self.len]
    }

    /// Copies the listed batch items into a new tensor.
    pub fn select(&self, indices: &[usize]) -> Tensor {
        let n = self.sample_size();
        let mut data = Vec::with_capacity(indices.len() * n);
        for &i in indices {
            data.extend_from_slice(self.sample(i));
        }
        Tensor { batch: indices.len(), channels: self.channels, len: self.len, data }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub(crate) fn expect_shape(&self, channels: usize, len: Option<usize>, what: &str) -> Result<()> {
        if self.channels != channels || len.is_some_and(|l| l != self.len) {
            return Err(invalid(format!(
                "{what}: expected {channels}×{} input, got {}×{}",
                len.map_or("*".to_string(), |l| l.to_string()),
                self.channels,
                self.len
            )));
        }
        Ok(())
    }
}
