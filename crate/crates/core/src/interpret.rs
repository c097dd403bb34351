//! Frequency-response interpretation of the first layer, dataset spectra,
//! band coverage scoring, and representation export.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;

use crate::data::{validate_bands, Band, Dataset};
use crate::error::{invalid, Result};
use crate::math::{fft_in_place, half_spectrum_magnitude};
use crate::nn::{standardize, Conv1d, Layer, Model, Tensor};
use crate::par;
use crate::tfconv::{TfConvLayer, TfConvVariant};

pub const DEFAULT_L_FFT: usize = 1024;
pub const DEFAULT_HIT_THRESHOLD: f64 = 1.5;

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyResponse {
    /// `L/2 + 1` normalised frequencies from 0 to 0.5.
    pub freqs: Vec<f64>,
    /// Per-channel magnitude response.
    pub cfr: Vec<Vec<f64>>,
    /// Channel mean of `cfr`.
    pub ofr: Vec<f64>,
}

pub fn frequency_axis(l_fft: usize) -> Vec<f64> {
    (0..=l_fft / 2).map(|k| k as f64 / l_fft as f64).collect()
}

/// Magnitude spectrum of a kernel zero-padded to `l_fft`, folded onto
/// `[0, 0.5]`: bin `k` keeps the larger of `|W[k]|` and `|W[L-k]|`, so a
/// kernel and its conjugate give the same curve.
pub fn kernel_response(taps: &[Complex64], l_fft: usize) -> Result<Vec<f64>> {
    if taps.is_empty() {
        return Err(invalid("kernel is empty"));
    }
    if l_fft < taps.len() {
        return Err(invalid(format!("FFT length {l_fft} is shorter than the {}-tap kernel", taps.len())));
    }
    let mut buf = taps.to_vec();
    buf.resize(l_fft, Complex64::new(0.0, 0.0));
    fft_in_place(&mut buf);
    Ok((0..=l_fft / 2)
        .map(|k| {
            let mirror = (l_fft - k) % l_fft;
            buf[k].norm().max(buf[mirror].norm())
        })
        .collect())
}

/// C-FR of a time-frequency layer. The modulus variant uses the complex
/// kernel; the real-only variant uses the real kernel it applies.
pub fn tfconv_cfr(layer: &TfConvLayer, l_fft: usize) -> Result<Vec<Vec<f64>>> {
    layer
        .kernels()?
        .iter()
        .map(|k| {
            let taps: Vec<Complex64> = match layer.variant {
                TfConvVariant::Modulus => k.as_slice().to_vec(),
                TfConvVariant::RealOnly => k.as_slice().iter().map(|c| Complex64::new(c.re, 0.0)).collect(),
            };
            kernel_response(&taps, l_fft)
        })
        .collect()
}

/// C-FR of a plain convolution, kernels summed over input channels.
pub fn conv_cfr(conv: &Conv1d, l_fft: usize) -> Result<Vec<Vec<f64>>> {
    let k = conv.kernel;
    (0..conv.out_channels)
        .map(|o| {
            let mut taps = vec![Complex64::new(0.0, 0.0); k];
            for c in 0..conv.in_channels {
                let w = &conv.weight[(o * conv.in_channels + c) * k..(o * conv.in_channels + c + 1) * k];
                taps.iter_mut().zip(w).for_each(|(t, v)| t.re += v);
            }
            kernel_response(&taps, l_fft)
        })
        .collect()
}

/// C-FR/O-FR of the model's first layer (time-frequency or convolution).
pub fn channel_frequency_response(model: &Model, l_fft: usize) -> Result<FrequencyResponse> {
    let cfr = match model.layers.first() {
        Some(Layer::TfConv(t)) => tfconv_cfr(t, l_fft)?,
        Some(Layer::Conv1d(c)) => conv_cfr(c, l_fft)?,
        _ => return Err(invalid("the first layer has no convolution kernels")),
    };
    let ofr = overall_frequency_response(&cfr)?;
    Ok(FrequencyResponse { freqs: frequency_axis(l_fft), cfr, ofr })
}

pub fn overall_frequency_response(cfr: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = cfr.first().ok_or_else(|| invalid("no channels to average"))?;
    if cfr.iter().any(|c| c.len() != first.len()) {
        return Err(invalid("channel responses differ in length"));
    }
    let n = cfr.len() as f64;
    Ok((0..first.len()).map(|k| cfr.iter().map(|c| c[k]).sum::<f64>() / n).collect())
}

/// Mean half-spectrum magnitude of the per-sample standardised dataset.
pub fn dataset_spectrum(ds: &Dataset) -> Result<Vec<f64>> {
    if ds.is_empty() {
        return Err(invalid("dataset is empty"));
    }
    let z = standardize(&ds.samples);
    let bins = ds.samples.len / 2 + 1;
    let parts = par::map_indexed(ds.len(), |i| half_spectrum_magnitude(z.sample(i)));
    let n = ds.len() as f64;
    Ok(par::sum_in_order(parts, bins).into_iter().map(|v| v / n).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandHit {
    pub band: Band,
    pub peak_frequency: f64,
    pub peak_magnitude: f64,
    pub hit: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandReport {
    pub threshold: f64,
    pub ofr_median: f64,
    pub bands: Vec<BandHit>,
}

impl BandReport {
    pub fn hits(&self) -> usize {
        self.bands.iter().filter(|b| b.hit).count()
    }

    /// Plain-text manifest.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "threshold = {:?}", self.threshold);
        let _ = writeln!(s, "ofr_median = {:?}", self.ofr_median);
        let _ = writeln!(s, "hits = {}/{}", self.hits(), self.bands.len());
        for b in &self.bands {
            let _ = writeln!(
                s,
                "band [{:?}, {:?}] peak_frequency = {:?} peak_magnitude = {:?} hit = {}",
                b.band.0, b.band.1, b.peak_frequency, b.peak_magnitude, b.hit
            );
        }
        s
    }
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// A band is hit when a local maximum of `ofr` (strictly above its left
/// neighbour, at least its right one) inside the band reaches
/// `threshold × median(ofr)`.
pub fn band_coverage(ofr: &[f64], freqs: &[f64], bands: &[Band], threshold: f64) -> Result<BandReport> {
    if ofr.len() != freqs.len() || ofr.is_empty() {
        return Err(invalid("ofr and freqs must be non-empty and equally long"));
    }
    validate_bands(bands)?;
    let med = median(ofr);
    let is_peak = |k: usize| {
        let left = k == 0 || ofr[k] > ofr[k - 1];
        let right = k + 1 == ofr.len() || ofr[k] >= ofr[k + 1];
        left && right
    };
    let report = bands
        .iter()
        .map(|&(lo, hi)| {
            let inside: Vec<usize> = (0..ofr.len()).filter(|&k| freqs[k] >= lo && freqs[k] <= hi).collect();
            let best = |ks: &mut dyn Iterator<Item = usize>| ks.max_by(|&a, &b| ofr[a].total_cmp(&ofr[b]));
            let peak = best(&mut inside.iter().copied().filter(|&k| is_peak(k)));
            let top = peak.or_else(|| best(&mut inside.iter().copied()));
            BandHit {
                band: (lo, hi),
                peak_frequency: top.map_or(f64::NAN, |k| freqs[k]),
                peak_magnitude: top.map_or(f64::NAN, |k| ofr[k]),
                hit: peak.is_some_and(|k| ofr[k] >= threshold * med),
            }
        })
        .collect();
    Ok(BandReport { threshold, ofr_median: med, bands: report })
}

/// Inference-mode Flatten activations, one row per sample.
pub fn export_representations(model: &mut Model, ds: &Dataset) -> Result<Tensor> {
    const CHUNK: usize = 128;
    let all: Vec<usize> = (0..ds.len()).collect();
    let mut out: Option<Tensor> = None;
    for chunk in all.chunks(CHUNK) {
        let r = model.representations(&ds.samples.select(chunk))?;
        match &mut out {
            None => out = Some(r),
            Some(t) => {
                t.batch += r.batch;
                t.data.extend(r.data);
            }
        }
    }
    match out {
        Some(t) => Ok(t),
        None => {
            // still validate that the model can produce representations
            model.representations(&Tensor::zeros(0, 1, ds.samples.len))
        }
    }
}

/// Mean distance between class centroids over mean distance of samples to
/// their own centroid.
pub fn separability_ratio(reps: &Tensor, labels: &[usize]) -> Result<f64> {
    if reps.batch != labels.len() || labels.is_empty() {
        return Err(invalid("representations and labels must be non-empty and aligned"));
    }
    let d = reps.sample_size();
    let n_classes = labels.iter().max().unwrap() + 1;
    let mut centroids = vec![vec![0.0; d]; n_classes];
    let mut counts = vec![0usize; n_classes];
    for (i, &l) in labels.iter().enumerate() {
        counts[l] += 1;
        centroids[l].iter_mut().zip(reps.sample(i)).for_each(|(c, v)| *c += v);
    }
    let present: Vec<usize> = (0..n_classes).filter(|&c| counts[c] > 0).collect();
    if present.len() < 2 {
        return Err(invalid("separability needs at least two classes"));
    }
    for &c in &present {
        centroids[c].iter_mut().for_each(|v| *v /= counts[c] as f64);
    }
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let intra = labels.iter().enumerate().map(|(i, &l)| dist(reps.sample(i), &centroids[l])).sum::<f64>() / labels.len() as f64;
    let mut inter = 0.0;
    let mut pairs = 0;
    for (i, &a) in present.iter().enumerate() {
        for &b in &present[i + 1..] {
            inter += dist(&centroids[a], &centroids[b]);
            pairs += 1;
        }
    }
    Ok(inter / pairs as f64 / intra.max(f64::MIN_POSITIVE))
}

/// `freq,ofr`
pub fn ofr_csv(fr: &FrequencyResponse) -> String {
    let mut s = String::from("freq,ofr\n");
    for (f, v) in fr.freqs.iter().zip(&fr.ofr) {
        let _ = writeln!(s, "{f:?},{v:?}");
    }
    s
}

/// `channel,freq,magnitude`
pub fn cfr_csv(fr: &FrequencyResponse) -> String {
    let mut s = String::from("channel,freq,magnitude\n");
    for (c, row) in fr.cfr.iter().enumerate() {
        for (f, v) in fr.freqs.iter().zip(row) {
            let _ = writeln!(s, "{c},{f:?},{v:?}");
        }
    }
    s
}

/// `label,f1,…,fD`
pub fn representations_csv(reps: &Tensor, labels: &[usize]) -> String {
    let mut s = String::from("label");
    for j in 1..=reps.sample_size() {
        let _ = write!(s, ",f{j}");
    }
    s.push('\n');
    for (i, l) in labels.iter().enumerate() {
        s.push_str(&l.to_string());
        for v in reps.sample(i) {
            let _ = write!(s, ",{v:?}");
        }
        s.push('\n');
    }
    s
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text)?;
    Ok(())
}
