//! Parameterised kernel functions for the time-frequency convolution layer.
//!
//! Each family maps a handful of control parameters to a complex kernel on a
//! fixed integer grid:
//!
//! | family   | parameters | grid         | kernel                                          |
//! |----------|------------|--------------|-------------------------------------------------|
//! | STTF     | `f`        | `-25..=25`   | `g(n)·e^{j2πfn}`                                |
//! | Chirplet | `f, α`     | `-25..=25`   | `g(n)·e^{j2π(α/2·n² + fn)}`                     |
//! | Morlet   | `s`        | `-150..=150` | `s^{-1/2}·Ψ(n/s)`                               |
//! | Laplace  | `s`        | `0..=150`    | `s^{-1/2}·Ψ(n/s)`                               |
//!
//! with `g(n) = e^{-(n/10)²/2}` and `Ψ(m) = g(m)·e^{j2π·0.2·m}`. The Random
//! family is a plain complex kernel on the STTF grid whose taps are trained
//! directly.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::math::ComplexSeq;
use crate::seed;

/// Largest admissible normalised frequency (the Nyquist limit itself is excluded).
pub const F_MAX: f64 = 0.5 - 1e-6;
pub const ALPHA_LIMIT: f64 = 0.005;
pub const S_MIN: f64 = 0.4;
pub const S_MAX: f64 = 10.0;

const ENVELOPE_WIDTH: f64 = 10.0;
const MOTHER_FREQ: f64 = 0.2;
/// Frequency range spanned by the wavelet families at `s ∈ [0.4, 10]`.
const WAVELET_F_LO: f64 = MOTHER_FREQ / S_MAX;
const WAVELET_F_HI: f64 = MOTHER_FREQ / S_MIN;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KernelFamily {
    Sttf,
    Chirplet,
    Morlet,
    Laplace,
    Random,
}

impl KernelFamily {
    pub const INTERPRETABLE: [KernelFamily; 4] = [Self::Sttf, Self::Chirplet, Self::Morlet, Self::Laplace];

    pub fn name(self) -> &'static str {
        match self {
            Self::Sttf => "sttf",
            Self::Chirplet => "chirplet",
            Self::Morlet => "morlet",
            Self::Laplace => "laplace",
            Self::Random => "random",
        }
    }

    pub fn grid(self) -> KernelGrid {
        match self {
            Self::Sttf | Self::Chirplet | Self::Random => KernelGrid { start: -25, len: 51 },
            Self::Morlet => KernelGrid { start: -150, len: 301 },
            Self::Laplace => KernelGrid { start: 0, len: 151 },
        }
    }

    /// Number of trainable scalars per channel.
    pub fn params_per_channel(self) -> usize {
        match self {
            Self::Sttf | Self::Morlet | Self::Laplace => 1,
            Self::Chirplet => 2,
            Self::Random => 2 * self.grid().len,
        }
    }

    pub fn param_names(self) -> Vec<String> {
        match self {
            Self::Sttf => vec!["f".into()],
            Self::Chirplet => vec!["f".into(), "alpha".into()],
            Self::Morlet | Self::Laplace => vec!["s".into()],
            Self::Random => {
                let k = self.grid().len;
                (0..k)
                    .map(|i| format!("re{i}"))
                    .chain((0..k).map(|i| format!("im{i}")))
                    .collect()
            }
        }
    }

    /// Closed box for parameter `index` within a channel, if bounded.
    pub fn limits(self, index: usize) -> Option<(f64, f64)> {
        match (self, index) {
            (Self::Sttf, 0) | (Self::Chirplet, 0) => Some((0.0, F_MAX)),
            (Self::Chirplet, 1) => Some((-ALPHA_LIMIT, ALPHA_LIMIT)),
            (Self::Morlet, 0) | (Self::Laplace, 0) => Some((S_MIN, S_MAX)),
            _ => None,
        }
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sttf" | "stft" => Ok(Self::Sttf),
            "chirplet" => Ok(Self::Chirplet),
            "morlet" => Ok(Self::Morlet),
            "laplace" => Ok(Self::Laplace),
            "random" => Ok(Self::Random),
            other => Err(invalid(format!("unknown kernel family `{other}`"))),
        }
    }
}

/// Integer sample positions `start, start+1, …, start+len-1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KernelGrid {
    pub start: i64,
    pub len: usize,
}

impl KernelGrid {
    pub fn indices(&self) -> impl Iterator<Item = i64> + '_ {
        (0..self.len as i64).map(move |i| self.start + i)
    }
}

/// Per-channel control parameters, stored channel-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub family: KernelFamily,
    pub n_channels: usize,
    pub theta: Vec<f64>,
}

impl KernelParams {
    pub fn new(family: KernelFamily, n_channels: usize, theta: Vec<f64>) -> Result<Self> {
        if theta.len() != n_channels * family.params_per_channel() {
            return Err(invalid(format!(
                "{family} kernel with {n_channels} channels needs {} parameters, got {}",
                n_channels * family.params_per_channel(),
                theta.len()
            )));
        }
        Ok(Self { family, n_channels, theta })
    }

    pub fn channel(&self, k: usize) -> &[f64] {
        let p = self.family.params_per_channel();
        &self.theta[k * p..(k + 1) * p]
    }

    /// Indices of parameters outside their limits or non-finite.
    pub fn violations(&self) -> Vec<usize> {
        let p = self.family.params_per_channel();
        self.theta
            .iter()
            .enumerate()
            .filter(|(i, &v)| match self.family.limits(i % p) {
                _ if !v.is_finite() => true,
                Some((lo, hi)) => v < lo || v > hi,
                None => false,
            })
            .map(|(i, _)| i)
            .collect()
    }
}

fn envelope(m: f64) -> f64 {
    (-0.5 * (m / ENVELOPE_WIDTH).powi(2)).exp()
}

fn mother(m: f64) -> Complex64 {
    Complex64::from_polar(envelope(m), 2.0 * PI * MOTHER_FREQ * m)
}

fn mother_derivative(m: f64) -> Complex64 {
    Complex64::new(-m / (ENVELOPE_WIDTH * ENVELOPE_WIDTH), 2.0 * PI * MOTHER_FREQ) * mother(m)
}

fn check(family: KernelFamily, theta: &[f64], grid: KernelGrid) -> Result<()> {
    if grid != family.grid() {
        return Err(invalid(format!(
            "grid (start {}, len {}) does not belong to the {family} family",
            grid.start, grid.len
        )));
    }
    if theta.len() != family.params_per_channel() {
        return Err(invalid(format!(
            "{family} kernel takes {} parameters, got {}",
            family.params_per_channel(),
            theta.len()
        )));
    }
    for (i, &v) in theta.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::ConstraintViolation(format!("{family} parameter {i} is not finite")));
        }
        if let Some((lo, hi)) = family.limits(i) {
            // f is half-open at the Nyquist end
            let above = if family.limits(i) == Some((0.0, F_MAX)) { v >= 0.5 } else { v > hi };
            if v < lo || above {
                return Err(Error::ConstraintViolation(format!(
                    "{family} parameter {} = {v} outside [{lo}, {hi}]",
                    family.param_names()[i]
                )));
            }
        }
    }
    Ok(())
}

/// Samples the kernel on `grid`.
pub fn evaluate_kernel(family: KernelFamily, theta: &[f64], grid: KernelGrid) -> Result<ComplexSeq> {
    check(family, theta, grid)?;
    Ok(ComplexSeq::from_vec_unchecked(evaluate_unchecked(family, theta, grid)))
}

pub(crate) fn evaluate_unchecked(family: KernelFamily, theta: &[f64], grid: KernelGrid) -> Vec<Complex64> {
    match family {
        KernelFamily::Sttf => chirp(theta[0], 0.0, grid),
        KernelFamily::Chirplet => chirp(theta[0], theta[1], grid),
        KernelFamily::Morlet | KernelFamily::Laplace => {
            let s = theta[0];
            let norm = 1.0 / s.sqrt();
            grid.indices().map(|n| mother(n as f64 / s) * norm).collect()
        }
        KernelFamily::Random => {
            let k = grid.len;
            (0..k).map(|i| Complex64::new(theta[i], theta[k + i])).collect()
        }
    }
}

fn chirp(f: f64, alpha: f64, grid: KernelGrid) -> Vec<Complex64> {
    grid.indices()
        .map(|n| {
            let n = n as f64;
            Complex64::from_polar(envelope(n), 2.0 * PI * (alpha / 2.0 * n * n + f * n))
        })
        .collect()
}

/// Analytic `∂ψ/∂θ_p` for every parameter `p` of one channel.
pub fn kernel_param_grad(family: KernelFamily, theta: &[f64], grid: KernelGrid) -> Result<Vec<ComplexSeq>> {
    check(family, theta, grid)?;
    Ok(param_grad_unchecked(family, theta, grid)
        .into_iter()
        .map(ComplexSeq::from_vec_unchecked)
        .collect())
}

pub(crate) fn param_grad_unchecked(family: KernelFamily, theta: &[f64], grid: KernelGrid) -> Vec<Vec<Complex64>> {
    match family {
        KernelFamily::Sttf | KernelFamily::Chirplet => {
            let psi = evaluate_unchecked(family, theta, grid);
            let d_f = grid
                .indices()
                .zip(&psi)
                .map(|(n, &p)| Complex64::new(0.0, 2.0 * PI * n as f64) * p)
                .collect();
            if family == KernelFamily::Sttf {
                vec![d_f]
            } else {
                let d_alpha = grid
                    .indices()
                    .zip(&psi)
                    .map(|(n, &p)| Complex64::new(0.0, PI * (n * n) as f64) * p)
                    .collect();
                vec![d_f, d_alpha]
            }
        }
        KernelFamily::Morlet | KernelFamily::Laplace => {
            let s = theta[0];
            let inv_sqrt = 1.0 / s.sqrt();
            let d_s = grid
                .indices()
                .map(|n| {
                    let n = n as f64;
                    let m = n / s;
                    mother(m) * (-0.5 * inv_sqrt / s) - mother_derivative(m) * (n / (s * s) * inv_sqrt)
                })
                .collect();
            vec![d_s]
        }
        KernelFamily::Random => {
            let k = grid.len;
            (0..2 * k)
                .map(|p| {
                    let mut v = vec![Complex64::new(0.0, 0.0); k];
                    v[p % k] = if p < k { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 1.0) };
                    v
                })
                .collect()
        }
    }
}

/// Projects a flat per-channel parameter vector onto its box in place.
pub fn clamp_theta(family: KernelFamily, theta: &mut [f64]) {
    let p = family.params_per_channel();
    for (i, v) in theta.iter_mut().enumerate() {
        if let Some((lo, hi)) = family.limits(i % p) {
            *v = if v.is_nan() { lo } else { v.clamp(lo, hi) };
        }
    }
}

pub fn clamp_params(params: &KernelParams) -> KernelParams {
    let mut out = params.clone();
    clamp_theta(out.family, &mut out.theta);
    out
}

/// Centre frequency of channel `i` out of `n` for the family's initial layout.
pub fn init_frequency(family: KernelFamily, i: usize, n: usize) -> f64 {
    let u = (i as f64 + 0.5) / n as f64;
    match family {
        KernelFamily::Morlet | KernelFamily::Laplace => WAVELET_F_LO + (WAVELET_F_HI - WAVELET_F_LO) * u,
        _ => 0.5 * u,
    }
}

/// Channels start with centre frequencies spread uniformly over the usable band.
pub fn init_params(family: KernelFamily, n_channels: usize, seed: u64) -> Result<KernelParams> {
    if n_channels < 1 {
        return Err(invalid("a kernel layer needs at least one channel"));
    }
    let theta = match family {
        KernelFamily::Sttf => (0..n_channels).map(|i| init_frequency(family, i, n_channels)).collect(),
        KernelFamily::Chirplet => (0..n_channels)
            .flat_map(|i| [init_frequency(family, i, n_channels), 0.0])
            .collect(),
        KernelFamily::Morlet | KernelFamily::Laplace => (0..n_channels)
            .map(|i| MOTHER_FREQ / init_frequency(family, i, n_channels))
            .collect(),
        KernelFamily::Random => {
            let k = family.grid().len;
            let bound = (6.0 / k as f64).sqrt();
            let mut rng = seed::rng(seed, "kernels.random");
            (0..n_channels * 2 * k).map(|_| rng.random_range(-bound..bound)).collect()
        }
    };
    let mut params = KernelParams::new(family, n_channels, theta)?;
    clamp_theta(family, &mut params.theta);
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{dft, zero_pad};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn spectrum_argmax(kernel: &ComplexSeq, l: usize) -> usize {
        let spec = dft(&zero_pad(kernel, l).unwrap()).unwrap();
        let mags = spec.norms();
        (0..l).max_by(|&a, &b| mags[a].total_cmp(&mags[b])).unwrap()
    }

    fn random_theta(family: KernelFamily, rng: &mut ChaCha8Rng) -> Vec<f64> {
        match family {
            KernelFamily::Sttf => vec![rng.random_range(0.0..0.5)],
            KernelFamily::Chirplet => vec![rng.random_range(0.0..0.5), rng.random_range(-0.005..=0.005)],
            KernelFamily::Morlet | KernelFamily::Laplace => vec![rng.random_range(0.4..=10.0)],
            KernelFamily::Random => (0..102).map(|_| rng.random_range(-1.0..1.0)).collect(),
        }
    }

    /// Central finite difference of the kernel w.r.t. parameter `p`.
    fn fd_grad(family: KernelFamily, theta: &[f64], p: usize, h: f64) -> Vec<Complex64> {
        let mut plus = theta.to_vec();
        let mut minus = theta.to_vec();
        plus[p] += h;
        minus[p] -= h;
        let a = evaluate_unchecked(family, &plus, family.grid());
        let b = evaluate_unchecked(family, &minus, family.grid());
        a.iter().zip(&b).map(|(x, y)| (x - y) / (2.0 * h)).collect()
    }

    #[test]
    fn grids_have_documented_lengths() {
        assert_eq!(KernelFamily::Sttf.grid().indices().collect::<Vec<_>>(), (-25..=25).collect::<Vec<_>>());
        assert_eq!(KernelFamily::Morlet.grid().len, 301);
        assert_eq!(KernelFamily::Morlet.grid().start, -150);
        assert_eq!(KernelFamily::Laplace.grid().indices().last(), Some(150));
        assert_eq!(KernelFamily::Laplace.grid().len, 151);
    }

    #[test]
    fn zero_frequency_sttf_is_real() {
        let k = evaluate_kernel(KernelFamily::Sttf, &[0.0], KernelFamily::Sttf.grid()).unwrap();
        assert_eq!(k.as_slice()[25], Complex64::new(1.0, 0.0));
        assert!(k.im().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn chirplet_without_sweep_is_sttf() {
        let g = KernelFamily::Sttf.grid();
        for f in [0.0, 0.2, 0.37, F_MAX] {
            let a = evaluate_kernel(KernelFamily::Chirplet, &[f, 0.0], g).unwrap();
            let b = evaluate_kernel(KernelFamily::Sttf, &[f], g).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn morlet_center_sample() {
        let k = evaluate_kernel(KernelFamily::Morlet, &[1.0], KernelFamily::Morlet.grid()).unwrap();
        assert_eq!(k.as_slice()[150], Complex64::new(1.0, 0.0));
    }

    #[test]
    fn doubling_scale_halves_peak_frequency() {
        let g = KernelFamily::Morlet.grid();
        let k1 = evaluate_kernel(KernelFamily::Morlet, &[1.0], g).unwrap();
        let k2 = evaluate_kernel(KernelFamily::Morlet, &[2.0], g).unwrap();
        let b1 = spectrum_argmax(&k1, 1024) as f64;
        let b2 = spectrum_argmax(&k2, 1024) as f64;
        assert!((b1 - 0.2 * 1024.0).abs() <= 1.0, "s=1 peak at bin {b1}");
        assert!((b2 - 0.1 * 1024.0).abs() <= 1.0, "s=2 peak at bin {b2}");
    }

    #[test]
    fn sttf_peak_tracks_frequency() {
        for f in [0.1, 0.2, 0.3, 0.4] {
            let k = evaluate_kernel(KernelFamily::Sttf, &[f], KernelFamily::Sttf.grid()).unwrap();
            let bin = spectrum_argmax(&k, 1024) as f64;
            assert!((bin - f * 1024.0).abs() <= 1.0, "f={f}: bin {bin}");
        }
    }

    #[test]
    fn limits_are_enforced() {
        let g = KernelFamily::Sttf.grid();
        for bad in [-0.01, 0.5, 0.7, f64::NAN] {
            assert!(matches!(
                evaluate_kernel(KernelFamily::Sttf, &[bad], g),
                Err(Error::ConstraintViolation(_))
            ));
        }
        assert!(matches!(
            evaluate_kernel(KernelFamily::Chirplet, &[0.1, 0.006], g),
            Err(Error::ConstraintViolation(_))
        ));
        assert!(matches!(
            evaluate_kernel(KernelFamily::Morlet, &[0.39], KernelFamily::Morlet.grid()),
            Err(Error::ConstraintViolation(_))
        ));
        assert!(matches!(
            evaluate_kernel(KernelFamily::Morlet, &[1.0], g),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn sttf_gradient_matches_finite_differences() {
        let fam = KernelFamily::Sttf;
        let analytic = kernel_param_grad(fam, &[0.1], fam.grid()).unwrap();
        let fd = fd_grad(fam, &[0.1], 0, 1e-6);
        for (i, (a, n)) in analytic[0].as_slice().iter().zip(&fd).enumerate() {
            if i == 25 {
                assert_eq!(*a, Complex64::new(0.0, 0.0));
                continue;
            }
            let rel = (a - n).norm() / a.norm();
            assert!(rel < 1e-7, "tap {i}: rel {rel}");
        }
    }

    #[test]
    fn sttf_gradient_vanishes_at_center_tap() {
        for f in [0.0, 0.13, 0.49] {
            let g = kernel_param_grad(KernelFamily::Sttf, &[f], KernelFamily::Sttf.grid()).unwrap();
            assert_eq!(g[0].as_slice()[25].norm(), 0.0);
        }
    }

    #[test]
    fn morlet_gradient_matches_finite_differences() {
        let fam = KernelFamily::Morlet;
        let analytic = kernel_param_grad(fam, &[1.5], fam.grid()).unwrap();
        let fd = fd_grad(fam, &[1.5], 0, 1e-6);
        for (i, (a, n)) in analytic[0].as_slice().iter().zip(&fd).enumerate() {
            let scale = a.norm().max(n.norm());
            if scale < 1e-12 {
                continue;
            }
            let rel = (a - n).norm() / scale;
            assert!(rel < 1e-6, "tap {i}: rel {rel}");
        }
    }

    #[test]
    fn clamp_examples() {
        let p = KernelParams::new(KernelFamily::Sttf, 2, vec![0.7, 0.3]).unwrap();
        let c = clamp_params(&p);
        assert_eq!(c.theta, vec![F_MAX, 0.3]);
        assert!((c.theta[0] - 0.499999).abs() < 1e-12);

        let p = KernelParams::new(KernelFamily::Morlet, 1, vec![0.1]).unwrap();
        assert_eq!(clamp_params(&p).theta, vec![0.4]);

        let p = KernelParams::new(KernelFamily::Chirplet, 1, vec![-0.2, -1.0]).unwrap();
        assert_eq!(clamp_params(&p).theta, vec![0.0, -0.005]);
    }

    #[test]
    fn init_grids() {
        let p = init_params(KernelFamily::Sttf, 8, 0).unwrap();
        let expected: Vec<f64> = (0..8).map(|i| 0.03125 + 0.0625 * i as f64).collect();
        for (a, e) in p.theta.iter().zip(&expected) {
            assert!((a - e).abs() < 1e-15);
        }

        let p = init_params(KernelFamily::Morlet, 1, 0).unwrap();
        assert!((p.theta[0] - 0.2 / 0.26).abs() < 1e-12);
        assert!((p.theta[0] - 0.769).abs() < 1e-3);

        let p = init_params(KernelFamily::Chirplet, 3, 0).unwrap();
        assert_eq!(p.theta.len(), 6);
        assert!(p.theta.iter().skip(1).step_by(2).all(|&a| a == 0.0));

        assert!(init_params(KernelFamily::Sttf, 0, 0).is_err());
    }

    #[test]
    fn init_is_deterministic() {
        for fam in [
            KernelFamily::Sttf,
            KernelFamily::Chirplet,
            KernelFamily::Morlet,
            KernelFamily::Laplace,
            KernelFamily::Random,
        ] {
            let a = init_params(fam, 8, 42).unwrap();
            let b = init_params(fam, 8, 42).unwrap();
            assert_eq!(a, b);
            assert!(a.violations().is_empty());
        }
        let r = init_params(KernelFamily::Random, 2, 1).unwrap();
        let bound = (6.0f64 / 51.0).sqrt();
        assert!(r.theta.iter().all(|v| v.abs() <= bound));
        assert_ne!(r, init_params(KernelFamily::Random, 2, 2).unwrap());
    }

    #[test]
    fn conjugated_kernel_gives_same_modulus() {
        use crate::math::{cross_correlate_same, Signal};
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for fam in KernelFamily::INTERPRETABLE {
            let theta = random_theta(fam, &mut rng);
            let k = evaluate_kernel(fam, &theta, fam.grid()).unwrap();
            let x = Signal::new((0..400).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
            let a = cross_correlate_same(&x, &k).unwrap().norms();
            let b = cross_correlate_same(&x, &k.conj()).unwrap().norms();
            for (p, q) in a.iter().zip(&b) {
                assert!((p - q).abs() < 1e-12);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn spectrum_peak_in_positive_half(seed in any::<u64>(), fam_idx in 0usize..4) {
            let fam = KernelFamily::INTERPRETABLE[fam_idx];
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let theta = random_theta(fam, &mut rng);
            let k = evaluate_kernel(fam, &theta, fam.grid()).unwrap();
            let bin = spectrum_argmax(&k, 1024);
            prop_assert!(bin <= 512, "{fam} {theta:?}: argmax bin {bin}");
        }

        #[test]
        fn clamp_is_idempotent(theta in proptest::collection::vec(-20.0f64..20.0, 6), fam_idx in 0usize..4) {
            let fam = KernelFamily::INTERPRETABLE[fam_idx];
            let n = 6 / fam.params_per_channel();
            let p = KernelParams::new(fam, n, theta[..n * fam.params_per_channel()].to_vec()).unwrap();
            let once = clamp_params(&p);
            prop_assert_eq!(clamp_params(&once), once.clone());
            prop_assert!(once.violations().is_empty());
        }
    }

    #[test]
    fn gradients_match_finite_differences_for_random_parameters() {
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        for fam in KernelFamily::INTERPRETABLE {
            for _ in 0..50 {
                let mut theta = random_theta(fam, &mut rng);
                // keep the ±h stencil inside the box
                clamp_theta(fam, &mut theta);
                for (i, v) in theta.iter_mut().enumerate() {
                    if let Some((lo, hi)) = fam.limits(i) {
                        *v = v.clamp(lo + 1e-5, hi - 1e-5);
                    }
                }
                let analytic = kernel_param_grad(fam, &theta, fam.grid()).unwrap();
                for (p, a) in analytic.iter().enumerate() {
                    let fd = fd_grad(fam, &theta, p, 1e-6);
                    let diff: f64 = a.as_slice().iter().zip(&fd).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
                    let norm: f64 = a.as_slice().iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
                    assert!(diff / norm < 1e-6, "{fam} θ={theta:?} p={p}: rel {}", diff / norm);
                }
            }
        }
    }
}
