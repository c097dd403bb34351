use rand::Rng;

use super::gemm::gemm;
use super::Tensor;
use crate::error::{invalid, Result};

/// Affine map `y = W·x + b` on feature vectors (`len == 1` tensors).
#[derive(Debug, Clone)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    /// `outputs × inputs`
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
    pub grad_weight: Vec<f64>,
    pub grad_bias: Vec<f64>,
    input: Option<Tensor>,
}

impl Dense {
    pub fn new<R: Rng>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let bound = (6.0 / inputs as f64).sqrt();
        Self {
            inputs,
            outputs,
            weight: (0..inputs * outputs).map(|_| rng.random_range(-bound..bound)).collect(),
            bias: vec![0.0; outputs],
            grad_weight: vec![0.0; inputs * outputs],
            grad_bias: vec![0.0; outputs],
            input: None,
        }
    }

    pub fn forward(&mut self, x: &Tensor, train: bool) -> Result<Tensor> {
        x.expect_shape(self.inputs, Some(1), "dense")?;
        let mut out = Tensor::zeros(x.batch, self.outputs, 1);
        for b in 0..x.batch {
            out.sample_mut(b).copy_from_slice(&self.bias);
        }
        gemm(x.batch, self.inputs, self.outputs, 1.0, &x.data, false, &self.weight, true, 1.0, &mut out.data);
        if train {
            self.input = Some(x.clone());
        }
        Ok(out)
    }

    pub fn backward(&mut self, grad: &Tensor, want_input: bool) -> Result<Option<Tensor>> {
        let x = self
            .input
            .as_ref()
            .ok_or_else(|| invalid("dense backward called without a training forward pass"))?;
        if grad.shape() != (x.batch, self.outputs, 1) {
            return Err(invalid("dense gradient shape does not match its output"));
        }
        gemm(self.outputs, x.batch, self.inputs, 1.0, &grad.data, true, &x.data, false, 1.0, &mut self.grad_weight);
        for b in 0..grad.batch {
            self.grad_bias.iter_mut().zip(grad.sample(b)).for_each(|(a, g)| *a += g);
        }
        Ok(want_input.then(|| {
            let mut dx = Tensor::zeros(x.batch, self.inputs, 1);
            gemm(x.batch, self.outputs, self.inputs, 1.0, &grad.data, false, &self.weight, false, 0.0, &mut dx.data);
            dx
        }))
    }

    pub fn clear_cache(&mut self) {
        self.input = None;
    }
}
