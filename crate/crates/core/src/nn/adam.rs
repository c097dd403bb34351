use super::Layer;
use crate::kernels::clamp_theta;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Adam with bias correction. Moment buffers are matched to parameters by
/// visit order, which is fixed for a given model.
#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    pub step: u64,
    moments: Vec<(Vec<f64>, Vec<f64>)>,
}

/// One bias-corrected Adam update of `value` in place (`step` counts from 1).
pub fn adam_update(value: &mut [f64], grad: &[f64], m: &mut [f64], v: &mut [f64], step: u64, lr: f64, cfg: &AdamConfig) {
    let c1 = 1.0 - cfg.beta1.powi(step as i32);
    let c2 = 1.0 - cfg.beta2.powi(step as i32);
    for i in 0..value.len() {
        let g = grad[i];
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
        let m_hat = m[i] / c1;
        let v_hat = v[i] / c2;
        value[i] -= lr * m_hat / (v_hat.sqrt() + cfg.eps);
    }
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Self { config, step: 0, moments: Vec::new() }
    }

    /// Updates every parameter of `layers`, then projects kernel parameters
    /// back onto their limits.
    pub fn step(&mut self, layers: &mut [Layer], lr: f64) {
        self.step += 1;
        let step = self.step;
        let cfg = self.config;
        let moments = &mut self.moments;
        let mut idx = 0;
        for layer in layers.iter_mut() {
            layer.visit_params(&mut |p| {
                if moments.len() <= idx {
                    moments.push((vec![0.0; p.value.len()], vec![0.0; p.value.len()]));
                }
                let (m, v) = &mut moments[idx];
                adam_update(p.value, p.grad, m, v, step, lr, &cfg);
                if let Some(family) = p.constraint {
                    clamp_theta(family, p.value);
                }
                idx += 1;
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{KernelFamily, KernelParams, F_MAX};
    use crate::tfconv::{TfConvLayer, TfConvVariant};

    #[test]
    fn zero_gradient_leaves_parameters() {
        let cfg = AdamConfig::default();
        let mut x = vec![1.5, -2.0];
        let (mut m, mut v) = (vec![0.0; 2], vec![0.0; 2]);
        adam_update(&mut x, &[0.0, 0.0], &mut m, &mut v, 1, 0.001, &cfg);
        assert_eq!(x, vec![1.5, -2.0]);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let cfg = AdamConfig::default();
        let mut x = vec![0.0];
        let (mut m, mut v) = (vec![0.0], vec![0.0]);
        adam_update(&mut x, &[1.0], &mut m, &mut v, 1, 0.001, &cfg);
        assert!((x[0] + 0.001).abs() < 1e-10);
    }

    #[test]
    fn kernel_parameters_are_clamped_after_step() {
        let params = KernelParams::new(KernelFamily::Sttf, 1, vec![0.4999995]).unwrap();
        let tf = TfConvLayer::new(params, TfConvVariant::Modulus).unwrap();
        let mut layers = vec![Layer::TfConv(tf)];
        let mut adam = Adam::new(AdamConfig::default());
        for _ in 0..5 {
            if let Layer::TfConv(t) = &mut layers[0] {
                t.grad_theta = vec![-1.0];
            }
            adam.step(&mut layers, 0.01);
        }
        if let Layer::TfConv(t) = &layers[0] {
            assert_eq!(t.params.theta, vec![F_MAX]);
        }
    }
}
