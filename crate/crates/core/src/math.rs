//! Numerical primitives: complex sequences, DFT, and sliding inner products.
//!
//! "Correlation" here is the deep-learning convolution: the kernel slides over
//! the signal without being flipped, `out[t] = Σ_m x[t+m]·k[m]`.

use std::cell::RefCell;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{invalid, Result};

/// A finite complex sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSeq(Vec<Complex64>);

impl ComplexSeq {
    pub fn new(values: Vec<Complex64>) -> Result<Self> {
        if values.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(invalid("complex sequence contains non-finite values"));
        }
        Ok(Self(values))
    }

    pub fn from_parts(re: &[f64], im: &[f64]) -> Result<Self> {
        if re.len() != im.len() {
            return Err(invalid(format!(
                "real and imaginary parts differ in length ({} vs {})",
                re.len(),
                im.len()
            )));
        }
        Self::new(re.iter().zip(im).map(|(&a, &b)| Complex64::new(a, b)).collect())
    }

    pub fn from_real(re: &[f64]) -> Result<Self> {
        Self::new(re.iter().map(|&a| Complex64::new(a, 0.0)).collect())
    }

    pub(crate) fn from_vec_unchecked(values: Vec<Complex64>) -> Self {
        Self(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.0
    }

    pub fn re(&self) -> Vec<f64> {
        self.0.iter().map(|c| c.re).collect()
    }

    pub fn im(&self) -> Vec<f64> {
        self.0.iter().map(|c| c.im).collect()
    }

    pub fn norms(&self) -> Vec<f64> {
        self.0.iter().map(|c| c.norm()).collect()
    }

    pub fn conj(&self) -> Self {
        Self(self.0.iter().map(|c| c.conj()).collect())
    }
}

/// A finite, non-empty real signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal(Vec<f64>);

impl Signal {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid("signal must contain at least one sample"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("signal sample {i} is not finite")));
        }
        Ok(Self(values))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// In-place forward FFT (`X[k] = Σ x[n]·e^{-j2πkn/N}`), any length.
pub fn fft_in_place(buf: &mut [Complex64]) {
    if buf.len() <= 1 {
        return;
    }
    let plan = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(buf.len()));
    plan.process(buf);
}

fn ifft_in_place(buf: &mut [Complex64]) {
    if buf.len() <= 1 {
        return;
    }
    let plan = PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(buf.len()));
    plan.process(buf);
    let scale = 1.0 / buf.len() as f64;
    buf.iter_mut().for_each(|c| *c *= scale);
}

pub fn dft(x: &ComplexSeq) -> Result<ComplexSeq> {
    if x.is_empty() {
        return Err(invalid("dft of an empty sequence"));
    }
    let mut buf = x.0.clone();
    fft_in_place(&mut buf);
    Ok(ComplexSeq(buf))
}

pub fn idft(x: &ComplexSeq) -> Result<ComplexSeq> {
    if x.is_empty() {
        return Err(invalid("inverse dft of an empty sequence"));
    }
    let mut buf = x.0.clone();
    ifft_in_place(&mut buf);
    Ok(ComplexSeq(buf))
}

/// Direct O(N²) evaluation of the DFT sum. Kept as a reference for the FFT.
pub fn naive_dft(x: &ComplexSeq) -> Result<ComplexSeq> {
    let n = x.len();
    if n == 0 {
        return Err(invalid("dft of an empty sequence"));
    }
    let out = (0..n)
        .map(|k| {
            x.0.iter()
                .enumerate()
                .map(|(t, &v)| {
                    // reduce k·t mod n before scaling to keep the phase exact
                    let phase = -2.0 * std::f64::consts::PI * ((k * t) % n) as f64 / n as f64;
                    v * Complex64::from_polar(1.0, phase)
                })
                .sum()
        })
        .collect();
    Ok(ComplexSeq(out))
}

/// Magnitude of the non-negative-frequency half of a real signal's DFT
/// (`n/2 + 1` bins).
pub fn half_spectrum_magnitude(x: &[f64]) -> Vec<f64> {
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_in_place(&mut buf);
    buf.truncate(x.len() / 2 + 1);
    buf.iter().map(|c| c.norm()).collect()
}

pub fn cross_correlate_valid(x: &Signal, k: &ComplexSeq) -> Result<ComplexSeq> {
    if k.is_empty() {
        return Err(invalid("correlation kernel is empty"));
    }
    if k.len() > x.len() {
        return Err(invalid(format!(
            "kernel of length {} is longer than signal of length {}",
            k.len(),
            x.len()
        )));
    }
    Ok(ComplexSeq(correlate_valid_raw(x.values(), k.as_slice())))
}

pub(crate) fn correlate_valid_raw(x: &[f64], k: &[Complex64]) -> Vec<Complex64> {
    let out_len = x.len() + 1 - k.len();
    (0..out_len)
        .map(|t| {
            x[t..t + k.len()]
                .iter()
                .zip(k)
                .map(|(&xv, &kv)| kv * xv)
                .sum()
        })
        .collect()
}

/// Left/right zero padding that keeps a correlation the same length as its input.
pub fn same_padding(kernel_len: usize) -> (usize, usize) {
    let total = kernel_len.saturating_sub(1);
    (total / 2, total - total / 2)
}

pub fn cross_correlate_same(x: &Signal, k: &ComplexSeq) -> Result<ComplexSeq> {
    if k.is_empty() {
        return Err(invalid("correlation kernel is empty"));
    }
    let (left, right) = same_padding(k.len());
    let mut padded = vec![0.0; left];
    padded.extend_from_slice(x.values());
    padded.extend(std::iter::repeat(0.0).take(right));
    Ok(ComplexSeq(correlate_valid_raw(&padded, k.as_slice())))
}

pub fn zero_pad(x: &ComplexSeq, target_len: usize) -> Result<ComplexSeq> {
    if target_len < x.len() {
        return Err(invalid(format!(
            "cannot zero-pad a length-{} sequence to {target_len}",
            x.len()
        )));
    }
    let mut v = x.0.clone();
    v.resize(target_len, Complex64::new(0.0, 0.0));
    Ok(ComplexSeq(v))
}
