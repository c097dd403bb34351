//! Time-frequency convolution layer.
//!
//! Each output channel correlates the input with the real and imaginary parts
//! of a parameterised complex kernel and returns the pointwise modulus
//!
//! ```text
//! h_re = Re(ψ_θ) ⋆ x,   h_im = Im(ψ_θ) ⋆ x,   h = sqrt(h_re² + h_im² + ε)
//! ```
//!
//! Only the control parameters θ are trained. Their gradient is the chain
//! rule through the kernel taps: the tap gradient of an ordinary correlation
//! is contracted with `∂ψ/∂θ` from [`crate::kernels::kernel_param_grad`].

use crate::error::{invalid, Result};
use crate::kernels::{self, evaluate_kernel, KernelFamily, KernelGrid, KernelParams};
use crate::math::{cross_correlate_same, same_padding, ComplexSeq, Signal};
use crate::nn::conv::{correlate_backward, correlate_forward, Geometry};
use crate::nn::Tensor;

pub const DEFAULT_EPS_MODULUS: f64 = 1e-12;

/// How the real/imaginary responses are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TfConvVariant {
    /// `sqrt(h_re² + h_im² + ε)`.
    Modulus,
    /// Real kernel only, output `h_re` with no modulus (wavelet-kernel-net style).
    RealOnly,
}

/// Activations kept from the forward pass.
#[derive(Debug, Clone)]
pub struct TfConvCache {
    pub input: Tensor,
    pub h_real: Tensor,
    /// Absent for [`TfConvVariant::RealOnly`].
    pub h_img: Option<Tensor>,
    pub h: Tensor,
}

#[derive(Debug, Clone)]
pub struct TfConvLayer {
    pub params: KernelParams,
    pub variant: TfConvVariant,
    pub eps_modulus: f64,
    pub grad_theta: Vec<f64>,
    cache: Option<TfConvCache>,
}

impl TfConvLayer {
    pub fn new(params: KernelParams, variant: TfConvVariant) -> Result<Self> {
        if params.n_channels == 0 {
            return Err(invalid("time-frequency layer needs at least one channel"));
        }
        let n = params.theta.len();
        Ok(Self { params, variant, eps_modulus: DEFAULT_EPS_MODULUS, grad_theta: vec![0.0; n], cache: None })
    }

    pub fn family(&self) -> KernelFamily {
        self.params.family
    }

    pub fn n_channels(&self) -> usize {
        self.params.n_channels
    }

    pub fn grid(&self) -> KernelGrid {
        self.params.family.grid()
    }

    /// Complex kernel of every channel.
    pub fn kernels(&self) -> Result<Vec<ComplexSeq>> {
        (0..self.n_channels())
            .map(|k| evaluate_kernel(self.family(), self.params.channel(k), self.grid()))
            .collect()
    }

    fn rows_per_channel(&self) -> usize {
        match self.variant {
            TfConvVariant::Modulus => 2,
            TfConvVariant::RealOnly => 1,
        }
    }

    fn weight_matrix(&self) -> Result<Vec<f64>> {
        let mut w = Vec::with_capacity(self.n_channels() * self.rows_per_channel() * self.grid().len);
        for kernel in self.kernels()? {
            w.extend(kernel.as_slice().iter().map(|c| c.re));
            if self.variant == TfConvVariant::Modulus {
                w.extend(kernel.as_slice().iter().map(|c| c.im));
            }
        }
        Ok(w)
    }

    fn geometry(&self, in_len: usize) -> Geometry {
        let k = self.grid().len;
        let (pad_l, pad_r) = same_padding(k);
        Geometry { in_ch: 1, out_ch: self.n_channels() * self.rows_per_channel(), k, pad_l, pad_r, in_len }
    }

    /// Output shape is `(batch, n_channels, input length)`.
    pub fn forward_with_cache(&self, x: &Tensor) -> Result<(Tensor, TfConvCache)> {
        x.expect_shape(1, None, "time-frequency layer")?;
        if !x.is_finite() {
            return Err(invalid("time-frequency layer input contains non-finite values"));
        }
        let g = self.geometry(x.len);
        let pre = correlate_forward(x, &self.weight_matrix()?, None, &g);
        let (b, n, l) = (x.batch, self.n_channels(), x.len);
        let mut h_real = Tensor::zeros(b, n, l);
        match self.variant {
            TfConvVariant::RealOnly => {
                h_real.data = pre.data;
                let h = h_real.clone();
                Ok((h.clone(), TfConvCache { input: x.clone(), h_real, h_img: None, h }))
            }
            TfConvVariant::Modulus => {
                let mut h_img = Tensor::zeros(b, n, l);
                let mut h = Tensor::zeros(b, n, l);
                for bi in 0..b {
                    for k in 0..n {
                        let re = pre.row(bi, 2 * k);
                        let im = pre.row(bi, 2 * k + 1);
                        let at = (bi * n + k) * l;
                        h_real.data[at..at + l].copy_from_slice(re);
                        h_img.data[at..at + l].copy_from_slice(im);
                        for t in 0..l {
                            h.data[at + t] = (re[t] * re[t] + im[t] * im[t] + self.eps_modulus).sqrt();
                        }
                    }
                }
                Ok((h.clone(), TfConvCache { input: x.clone(), h_real, h_img: Some(h_img), h }))
            }
        }
    }

    /// Returns the input gradient (when requested) and `∂L/∂θ` for every
    /// parameter, summed over batch and time.
    pub fn backward_with_cache(
        &self,
        cache: &TfConvCache,
        grad_out: &Tensor,
        want_input: bool,
    ) -> Result<(Option<Tensor>, Vec<f64>)> {
        if grad_out.shape() != cache.h.shape() {
            return Err(invalid(format!(
                "gradient shape {:?} does not match layer output {:?}",
                grad_out.shape(),
                cache.h.shape()
            )));
        }
        let (b, n, l) = grad_out.shape();
        let rows = self.rows_per_channel();
        let mut d_pre = Tensor::zeros(b, n * rows, l);
        match (&cache.h_img, self.variant) {
            (_, TfConvVariant::RealOnly) => d_pre.data.copy_from_slice(&grad_out.data),
            (Some(h_img), TfConvVariant::Modulus) => {
                for bi in 0..b {
                    for k in 0..n {
                        let at = (bi * n + k) * l;
                        let re_at = (bi * n * 2 + 2 * k) * l;
                        let im_at = re_at + l;
                        for t in 0..l {
                            let g = grad_out.data[at + t] / cache.h.data[at + t];
                            d_pre.data[re_at + t] = g * cache.h_real.data[at + t];
                            d_pre.data[im_at + t] = g * h_img.data[at + t];
                        }
                    }
                }
            }
            (None, TfConvVariant::Modulus) => return Err(invalid("cache lacks the imaginary response")),
        }
        let g = self.geometry(cache.input.len);
        let weight = self.weight_matrix()?;
        let grads = correlate_backward(&cache.input, &weight, &d_pre, &g, want_input);
        Ok((grads.input, self.theta_gradient(&grads.weight)))
    }

    /// Contracts per-tap gradients (`rows × K`) with `∂ψ/∂θ`.
    fn theta_gradient(&self, tap_grad: &[f64]) -> Vec<f64> {
        let fam = self.family();
        let k_len = self.grid().len;
        let rows = self.rows_per_channel();
        let per = fam.params_per_channel();
        let mut out = vec![0.0; self.params.theta.len()];
        for k in 0..self.n_channels() {
            let d_re = &tap_grad[(k * rows) * k_len..(k * rows + 1) * k_len];
            let d_im = (rows == 2).then(|| &tap_grad[(k * rows + 1) * k_len..(k * rows + 2) * k_len]);
            let dpsi = kernels::param_grad_unchecked(fam, self.params.channel(k), self.grid());
            for (p, dp) in dpsi.iter().enumerate() {
                let mut acc: f64 = d_re.iter().zip(dp).map(|(g, d)| g * d.re).sum();
                if let Some(d_im) = d_im {
                    acc += d_im.iter().zip(dp).map(|(g, d)| g * d.im).sum::<f64>();
                }
                out[k * per + p] = acc;
            }
        }
        out
    }

    pub fn forward(&mut self, x: &Tensor, train: bool) -> Result<Tensor> {
        let (h, cache) = self.forward_with_cache(x)?;
        if train {
            self.cache = Some(cache);
        }
        Ok(h)
    }

    pub fn backward(&mut self, grad: &Tensor, want_input: bool) -> Result<Option<Tensor>> {
        let cache = self
            .cache
            .as_ref()
            .ok_or_else(|| invalid("time-frequency backward called without a training forward pass"))?;
        let (dx, dtheta) = self.backward_with_cache(cache, grad, want_input)?;
        self.grad_theta.iter_mut().zip(&dtheta).for_each(|(a, b)| *a += b);
        Ok(dx)
    }

    pub fn clear_cache(&mut self) {
        self.cache = None;
    }
}

/// Inner-product time-frequency transform of `x`: row `i` is the same-length
/// correlation of `x` with `ψ_{θ_i}`. Its modulus is the time-frequency spectrum.
pub fn reference_tft(x: &Signal, family: KernelFamily, thetas: &[Vec<f64>], grid: KernelGrid) -> Result<Vec<ComplexSeq>> {
    if x.len() < grid.len {
        return Err(invalid(format!(
            "signal of length {} is shorter than the {}-tap kernel",
            x.len(),
            grid.len
        )));
    }
    thetas
        .iter()
        .map(|theta| cross_correlate_same(x, &evaluate_kernel(family, theta, grid)?))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::init_params;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn layer(family: KernelFamily, theta: Vec<f64>, variant: TfConvVariant) -> TfConvLayer {
        let n = theta.len() / family.params_per_channel();
        TfConvLayer::new(KernelParams::new(family, n, theta).unwrap(), variant).unwrap()
    }

    fn random_batch(rng: &mut ChaCha8Rng, b: usize, l: usize) -> Tensor {
        Tensor::from_vec(b, 1, l, (0..b * l).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    fn cosine(f: f64, l: usize) -> Tensor {
        let v = (0..l).map(|t| (2.0 * std::f64::consts::PI * f * t as f64).cos()).collect();
        Tensor::from_vec(1, 1, l, v).unwrap()
    }

    #[test]
    fn zero_input_gives_sqrt_eps() {
        let l = layer(KernelFamily::Sttf, vec![0.1, 0.3], TfConvVariant::Modulus);
        let (h, _) = l.forward_with_cache(&Tensor::zeros(2, 1, 64)).unwrap();
        assert_eq!(h.shape(), (2, 2, 64));
        assert!(h.data.iter().all(|&v| v == DEFAULT_EPS_MODULUS.sqrt()));
    }

    #[test]
    fn zero_frequency_channel_is_smoothed_magnitude() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = random_batch(&mut rng, 1, 200);
        let l = layer(KernelFamily::Sttf, vec![0.0], TfConvVariant::Modulus);
        let (h, cache) = l.forward_with_cache(&x).unwrap();
        assert!(cache.h_img.unwrap().data.iter().all(|&v| v == 0.0));
        let kernel = evaluate_kernel(KernelFamily::Sttf, &[0.0], KernelFamily::Sttf.grid()).unwrap();
        let smooth = cross_correlate_same(&Signal::new(x.data.clone()).unwrap(), &kernel).unwrap();
        for (a, s) in h.data.iter().zip(smooth.re()) {
            assert!(((a * a - DEFAULT_EPS_MODULUS).sqrt() - s.abs()).abs() < 1e-9);
        }
    }

    #[test]
    fn channel_tuned_to_tone_responds_most() {
        let l = layer(KernelFamily::Sttf, vec![0.1, 0.2, 0.3], TfConvVariant::Modulus);
        let (h, _) = l.forward_with_cache(&cosine(0.2, 1024)).unwrap();
        let mid = |k: usize| h.row(0, k)[100..924].iter().sum::<f64>() / 824.0;
        assert!(mid(1) > mid(0) && mid(1) > mid(2), "{} {} {}", mid(0), mid(1), mid(2));
    }

    #[test]
    fn initialised_layer_matches_reference_transform() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = random_batch(&mut rng, 1, 1024);
        let params = init_params(KernelFamily::Sttf, 8, 0).unwrap();
        let thetas: Vec<Vec<f64>> = (0..8).map(|k| params.channel(k).to_vec()).collect();
        let l = TfConvLayer::new(params, TfConvVariant::Modulus).unwrap();
        let (h, _) = l.forward_with_cache(&x).unwrap();
        let tft = reference_tft(&Signal::new(x.data.clone()).unwrap(), KernelFamily::Sttf, &thetas, KernelFamily::Sttf.grid()).unwrap();
        for (k, row) in tft.iter().enumerate() {
            for (t, c) in row.as_slice().iter().enumerate() {
                let ours = (h.row(0, k)[t].powi(2) - DEFAULT_EPS_MODULUS).max(0.0).sqrt();
                assert!((ours - c.norm()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn impulse_reproduces_kernel_envelope() {
        let mut v = vec![0.0; 201];
        v[100] = 1.0;
        let x = Signal::new(v).unwrap();
        let tft = reference_tft(&x, KernelFamily::Sttf, &[vec![0.2]], KernelFamily::Sttf.grid()).unwrap();
        for (t, c) in tft[0].as_slice().iter().enumerate() {
            let n = 100.0 - t as f64;
            let env = if n.abs() <= 25.0 { (-0.5 * (n / 10.0).powi(2)).exp() } else { 0.0 };
            assert!((c.norm() - env).abs() < 1e-12, "t={t}");
        }
    }

    #[test]
    fn reference_transform_selects_tone_band() {
        let x = Signal::new(cosine(0.2, 512).data).unwrap();
        let tft = reference_tft(&x, KernelFamily::Sttf, &[vec![0.1], vec![0.2], vec![0.3]], KernelFamily::Sttf.grid()).unwrap();
        let avg: Vec<f64> = tft.iter().map(|r| r.norms().iter().sum::<f64>() / 512.0).collect();
        assert!(avg[1] > avg[0] && avg[1] > avg[2]);
        let short = Signal::new(vec![0.0; 10]).unwrap();
        assert!(reference_tft(&short, KernelFamily::Sttf, &[vec![0.2]], KernelFamily::Sttf.grid()).is_err());
    }

    #[test]
    fn zero_upstream_gradient_gives_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random_batch(&mut rng, 2, 100);
        let l = layer(KernelFamily::Chirplet, vec![0.1, 0.001, 0.3, -0.002], TfConvVariant::Modulus);
        let (h, cache) = l.forward_with_cache(&x).unwrap();
        let zeros = Tensor::zeros(h.batch, h.channels, h.len);
        let (dx, dtheta) = l.backward_with_cache(&cache, &zeros, true).unwrap();
        assert!(dtheta.iter().all(|&v| v == 0.0));
        assert!(dx.unwrap().data.iter().all(|&v| v == 0.0));
        assert!(l.backward_with_cache(&cache, &Tensor::zeros(2, 2, 99), false).is_err());
    }

    fn sum_loss(l: &TfConvLayer, x: &Tensor) -> f64 {
        l.forward_with_cache(x).unwrap().0.data.iter().sum()
    }

    fn check_sum_gradient(family: KernelFamily, theta: f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_batch(&mut rng, 2, 400);
        let l = layer(family, vec![theta], TfConvVariant::Modulus);
        let (h, cache) = l.forward_with_cache(&x).unwrap();
        let ones = Tensor::from_vec(h.batch, h.channels, h.len, vec![1.0; h.data.len()]).unwrap();
        let (_, analytic) = l.backward_with_cache(&cache, &ones, false).unwrap();
        let step = 1e-6;
        let lp = sum_loss(&layer(family, vec![theta + step], TfConvVariant::Modulus), &x);
        let lm = sum_loss(&layer(family, vec![theta - step], TfConvVariant::Modulus), &x);
        let fd = (lp - lm) / (2.0 * step);
        let rel = (fd - analytic[0]).abs() / fd.abs().max(analytic[0].abs());
        assert!(rel < 1e-5, "{family}: fd {fd} analytic {} rel {rel}", analytic[0]);
    }

    #[test]
    fn sttf_theta_gradient_matches_finite_difference() {
        check_sum_gradient(KernelFamily::Sttf, 0.17);
    }

    #[test]
    fn morlet_theta_gradient_matches_finite_difference() {
        check_sum_gradient(KernelFamily::Morlet, 2.3);
    }

    #[test]
    fn modulus_is_scale_equivariant_and_positive() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = random_batch(&mut rng, 1, 300);
        for fam in KernelFamily::INTERPRETABLE {
            let l = TfConvLayer::new(init_params(fam, 3, 0).unwrap(), TfConvVariant::Modulus).unwrap();
            let (h, _) = l.forward_with_cache(&x).unwrap();
            assert_eq!(h.shape(), (1, 3, 300));
            assert!(h.data.iter().all(|&v| v >= DEFAULT_EPS_MODULUS.sqrt()));
            for c in [-2.0, 0.5] {
                let mut xc = x.clone();
                xc.data.iter_mut().for_each(|v| *v *= c);
                let (hc, _) = l.forward_with_cache(&xc).unwrap();
                for (a, b) in h.data.iter().zip(&hc.data) {
                    let a = (a * a - DEFAULT_EPS_MODULUS).max(0.0).sqrt();
                    let b = (b * b - DEFAULT_EPS_MODULUS).max(0.0).sqrt();
                    assert!((b - f64::abs(c) * a).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let l = layer(KernelFamily::Sttf, vec![0.1], TfConvVariant::Modulus);
        assert!(l.forward_with_cache(&Tensor::zeros(1, 2, 64)).is_err());
        let mut x = Tensor::zeros(1, 1, 64);
        x.data[3] = f64::INFINITY;
        assert!(l.forward_with_cache(&x).is_err());
    }

    #[test]
    fn real_only_variant_is_real_correlation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random_batch(&mut rng, 1, 120);
        let l = layer(KernelFamily::Morlet, vec![1.3], TfConvVariant::RealOnly);
        let (h, _) = l.forward_with_cache(&x).unwrap();
        let k = evaluate_kernel(KernelFamily::Morlet, &[1.3], KernelFamily::Morlet.grid()).unwrap();
        let real = ComplexSeq::from_real(&k.re()).unwrap();
        let want = cross_correlate_same(&Signal::new(x.data.clone()).unwrap(), &real).unwrap().re();
        for (a, b) in h.data.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
