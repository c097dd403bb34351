//! Datasets: synthetic fault signals with known information bands, raw signal
//! ingestion, windowing, stratified splitting, and the on-disk container.
//!
//! Container layout (one directory per dataset):
//!
//! ```text
//! meta.json       counts, length, bands, seed, generator spec
//! samples.f64le   count × length little-endian f64, row-major
//! labels.u32le    count little-endian u32
//! ```

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::math::Signal;
use crate::nn::Tensor;
use crate::par;
use crate::seed;

/// A closed normalised-frequency interval `[lo, hi]`.
pub type Band = (f64, f64);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Component {
    /// `amp·cos(2πft + φ)`.
    Tone { freq: f64, amp: f64 },
    /// `amp·(1 + depth·cos(2π·rate·t + φ₁))·cos(2π·carrier·t + φ₂)`.
    Am { carrier: f64, rate: f64, amp: f64, depth: f64 },
    /// Periodic impulses (random offset) each ringing as
    /// `amp·e^{-damping·τ}·cos(2π·resonance·τ)`.
    Impulses { period: usize, resonance: f64, damping: f64, amp: f64 },
}

impl Component {
    /// Frequencies that carry this component's energy.
    pub fn frequencies(&self) -> Vec<f64> {
        match *self {
            Component::Tone { freq, .. } => vec![freq],
            Component::Am { carrier, rate, .. } => vec![carrier - rate, carrier, carrier + rate],
            Component::Impulses { resonance, .. } => vec![resonance],
        }
    }

    fn validate(&self) -> Result<()> {
        for f in self.frequencies() {
            if !(f > 0.0 && f < 0.5) {
                return Err(invalid(format!("component frequency {f} outside (0, 0.5)")));
            }
        }
        let ok = match *self {
            Component::Tone { amp, .. } => amp.is_finite(),
            Component::Am { amp, depth, rate, .. } => amp.is_finite() && depth.is_finite() && rate > 0.0,
            Component::Impulses { period, damping, amp, .. } => period > 0 && damping > 0.0 && amp.is_finite(),
        };
        if !ok {
            return Err(invalid(format!("malformed component {self:?}")));
        }
        Ok(())
    }

    fn render<R: Rng>(&self, out: &mut [f64], rng: &mut R) {
        match *self {
            Component::Tone { freq, amp } => {
                let phase = rng.random_range(0.0..2.0 * PI);
                for (t, v) in out.iter_mut().enumerate() {
                    *v += amp * (2.0 * PI * freq * t as f64 + phase).cos();
                }
            }
            Component::Am { carrier, rate, amp, depth } => {
                let pm = rng.random_range(0.0..2.0 * PI);
                let pc = rng.random_range(0.0..2.0 * PI);
                for (t, v) in out.iter_mut().enumerate() {
                    let t = t as f64;
                    *v += amp * (1.0 + depth * (2.0 * PI * rate * t + pm).cos()) * (2.0 * PI * carrier * t + pc).cos();
                }
            }
            Component::Impulses { period, resonance, damping, amp } => {
                let offset = rng.random_range(0..period) as i64;
                // start early enough that ringing from earlier impulses is present
                let ring = (7.0 / damping).ceil() as i64;
                let first = offset - (ring / period as i64 + 1) * period as i64;
                let mut start = first;
                while start < out.len() as i64 {
                    let lo = start.max(0);
                    let hi = (start + ring).min(out.len() as i64);
                    for t in lo..hi {
                        let tau = (t - start) as f64;
                        out[t as usize] += amp * (-damping * tau).exp() * (2.0 * PI * resonance * tau).cos();
                    }
                    start += period as i64;
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSpec {
    pub name: String,
    pub components: Vec<Component>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub classes: Vec<ClassSpec>,
    pub samples_per_class: usize,
    pub sample_length: usize,
    pub noise_sigma: f64,
    pub information_bands: Vec<Band>,
}

impl SynthSpec {
    /// Five bearing-like classes over four information bands.
    pub fn synth_bearing5(samples_per_class: usize) -> Self {
        let tone = |freq, amp| Component::Tone { freq, amp };
        let impulses = |period, resonance| Component::Impulses { period, resonance, damping: 0.02, amp: 1.0 };
        Self {
            classes: vec![
                ClassSpec { name: "N".into(), components: vec![tone(0.05, 0.5)] },
                ClassSpec {
                    name: "A".into(),
                    components: vec![Component::Am { carrier: 0.08, rate: 0.004, amp: 1.0, depth: 0.5 }],
                },
                ClassSpec { name: "B".into(), components: vec![impulses(64, 0.18)] },
                ClassSpec { name: "C".into(), components: vec![impulses(100, 0.30)] },
                ClassSpec {
                    name: "D".into(),
                    components: vec![impulses(80, 0.18), impulses(80, 0.30), tone(0.08, 0.5)],
                },
            ],
            samples_per_class,
            sample_length: 1024,
            noise_sigma: 1.0,
            information_bands: vec![(0.04, 0.06), (0.07, 0.09), (0.16, 0.20), (0.28, 0.32)],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.classes.is_empty() {
            return Err(invalid("synthetic spec has no classes"));
        }
        if self.samples_per_class == 0 || self.sample_length == 0 {
            return Err(invalid("samples_per_class and sample_length must be positive"));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(invalid(format!("noise_sigma {} must be finite and ≥ 0", self.noise_sigma)));
        }
        validate_bands(&self.information_bands)?;
        for class in &self.classes {
            for c in &class.components {
                c.validate()?;
                for f in c.frequencies() {
                    if !self.information_bands.iter().any(|&(lo, hi)| f >= lo && f <= hi) {
                        return Err(invalid(format!(
                            "class {} component at frequency {f} lies outside every information band",
                            class.name
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Bands must lie in `[0, 0.5]`, have `lo < hi`, and not overlap.
pub fn validate_bands(bands: &[Band]) -> Result<()> {
    for &(lo, hi) in bands {
        if !(lo >= 0.0 && hi <= 0.5 && lo < hi) {
            return Err(invalid(format!("band [{lo}, {hi}] must satisfy 0 ≤ lo < hi ≤ 0.5")));
        }
    }
    let mut sorted = bands.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    for w in sorted.windows(2) {
        if w[1].0 <= w[0].1 {
            return Err(invalid(format!("bands [{}, {}] and [{}, {}] overlap", w[0].0, w[0].1, w[1].0, w[1].1)));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub count: usize,
    pub length: usize,
    pub n_classes: usize,
    /// Normalised; physical rates are not modelled.
    pub sample_rate: f64,
    #[serde(default)]
    pub information_bands: Option<Vec<Band>>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub spec: Option<SynthSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// `count × 1 × length`
    pub samples: Tensor,
    pub labels: Vec<usize>,
    pub meta: DatasetMeta,
}

impl Dataset {
    pub fn new(samples: Tensor, labels: Vec<usize>, n_classes: usize, bands: Option<Vec<Band>>) -> Result<Self> {
        if samples.channels != 1 {
            return Err(invalid("datasets hold single-channel samples"));
        }
        if samples.batch != labels.len() {
            return Err(invalid(format!("{} samples but {} labels", samples.batch, labels.len())));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(invalid(format!("label {bad} outside [0, {n_classes})")));
        }
        if !samples.is_finite() {
            return Err(invalid("dataset contains non-finite samples"));
        }
        let meta = DatasetMeta {
            count: samples.batch,
            length: samples.len,
            n_classes,
            sample_rate: 1.0,
            information_bands: bands,
            seed: None,
            spec: None,
        };
        Ok(Self { samples, labels, meta })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.meta.n_classes
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        self.labels.iter().for_each(|&l| counts[l] += 1);
        counts
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut meta = self.meta.clone();
        meta.count = indices.len();
        Dataset {
            samples: self.samples.select(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            meta,
        }
    }
}

/// Generates `samples_per_class` samples for every class, class-major.
/// Each sample draws from its own stream keyed by `(seed, index)`.
pub fn synth_generate(spec: &SynthSpec, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    let n_classes = spec.classes.len();
    let count = n_classes * spec.samples_per_class;
    let len = spec.sample_length;
    let noise = Normal::new(0.0, 1.0).map_err(|e| invalid(e.to_string()))?;
    let mut data = vec![0.0; count * len];
    par::for_each_chunk_mut(&mut data, len, |i, out| {
        let mut rng = seed::rng_indexed(seed, "synth.sample", i as u64);
        let class = &spec.classes[i / spec.samples_per_class];
        for c in &class.components {
            c.render(out, &mut rng);
        }
        if spec.noise_sigma > 0.0 {
            for v in out.iter_mut() {
                *v += spec.noise_sigma * noise.sample(&mut rng);
            }
        }
    });
    let labels = (0..count).map(|i| i / spec.samples_per_class).collect();
    let mut ds = Dataset::new(Tensor::from_vec(count, 1, len, data)?, labels, n_classes, Some(spec.information_bands.clone()))?;
    ds.meta.seed = Some(seed);
    ds.meta.spec = Some(spec.clone());
    Ok(ds)
}

/// Cuts `raw` into windows of `length` advancing by `length - overlap`.
pub fn window_signal(raw: &Signal, length: usize, overlap: usize) -> Result<Vec<Vec<f64>>> {
    if length == 0 || overlap >= length {
        return Err(invalid(format!("window length {length} with overlap {overlap}")));
    }
    if raw.len() < length {
        return Err(invalid(format!("signal of length {} is shorter than the {length}-sample window", raw.len())));
    }
    let step = length - overlap;
    let n = (raw.len() - length) / step + 1;
    Ok((0..n).map(|i| raw.values()[i * step..i * step + length].to_vec()).collect())
}

/// Stratified random split; every class contributes `round(n·fraction)`
/// samples (at least one, at most `n - 1`) to the training side.
pub fn split(ds: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(invalid(format!("train fraction {train_fraction} outside (0, 1)")));
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in 0..ds.n_classes() {
        let mut idx: Vec<usize> = (0..ds.len()).filter(|&i| ds.labels[i] == class).collect();
        if idx.is_empty() {
            continue;
        }
        if idx.len() < 2 {
            return Err(invalid(format!("class {class} has fewer than 2 samples and cannot be split")));
        }
        let mut rng = seed::rng_indexed(seed, "split", class as u64);
        idx.shuffle(&mut rng);
        let n_train = ((idx.len() as f64 * train_fraction).round() as usize).clamp(1, idx.len() - 1);
        train.extend_from_slice(&idx[..n_train]);
        test.extend_from_slice(&idx[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((ds.subset(&train), ds.subset(&test)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignalFormat {
    /// One value per line.
    Csv,
    /// Raw little-endian f64.
    F64Le,
}

impl std::str::FromStr for SignalFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "f64le" => Ok(Self::F64Le),
            other => Err(invalid(format!("unknown signal format `{other}` (csv | f64le)"))),
        }
    }
}

pub fn parse_signal_csv(text: &str, source: &str) -> Result<Signal> {
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        // accept a typographic minus as well as ASCII
        let v: f64 = line.replace('\u{2212}', "-").parse().map_err(|e| Error::Parse {
            source_name: source.to_string(),
            location: format!("line {}", i + 1),
            message: format!("`{line}`: {e}"),
        })?;
        values.push(v);
    }
    Signal::new(values)
}

pub fn parse_signal_f64le(bytes: &[u8], source: &str) -> Result<Signal> {
    if bytes.len() % 8 != 0 {
        return Err(Error::Parse {
            source_name: source.to_string(),
            location: format!("byte offset {}", bytes.len() - bytes.len() % 8),
            message: format!("{} trailing bytes do not form a 64-bit float", bytes.len() % 8),
        });
    }
    Signal::new(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
}

pub fn load_signal_file(path: &Path, format: SignalFormat) -> Result<Signal> {
    let name = path.display().to_string();
    match format {
        SignalFormat::Csv => parse_signal_csv(&fs::read_to_string(path)?, &name),
        SignalFormat::F64Le => parse_signal_f64le(&fs::read(path)?, &name),
    }
}

pub fn save_dataset(ds: &Dataset, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut meta = ds.meta.clone();
    meta.count = ds.len();
    meta.length = ds.samples.len;
    fs::write(dir.join("meta.json"), serde_json::to_string_pretty(&meta)? + "\n")?;
    let mut bytes = Vec::with_capacity(ds.samples.data.len() * 8);
    for v in &ds.samples.data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(dir.join("samples.f64le"), bytes)?;
    let mut labels = Vec::with_capacity(ds.len() * 4);
    for &l in &ds.labels {
        labels.extend_from_slice(&(l as u32).to_le_bytes());
    }
    fs::write(dir.join("labels.u32le"), labels)?;
    Ok(())
}

pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let meta_path = dir.join("meta.json");
    let meta: DatasetMeta = serde_json::from_str(&fs::read_to_string(&meta_path)?).map_err(|e| Error::Parse {
        source_name: meta_path.display().to_string(),
        location: format!("line {}", e.line()),
        message: e.to_string(),
    })?;
    let samples_path = dir.join("samples.f64le");
    let signal = parse_signal_f64le(&fs::read(&samples_path)?, &samples_path.display().to_string())?;
    if signal.len() != meta.count * meta.length {
        return Err(Error::Parse {
            source_name: samples_path.display().to_string(),
            location: "end of file".into(),
            message: format!("expected {}×{} values, found {}", meta.count, meta.length, signal.len()),
        });
    }
    let labels_path = dir.join("labels.u32le");
    let raw = fs::read(&labels_path)?;
    if raw.len() != meta.count * 4 {
        return Err(Error::Parse {
            source_name: labels_path.display().to_string(),
            location: format!("byte offset {}", raw.len().min(meta.count * 4)),
            message: format!("expected {} labels", meta.count),
        });
    }
    let labels = raw.chunks_exact(4).map(|c| u32::from_le_bytes(c.try_into().unwrap()) as usize).collect();
    let samples = Tensor::from_vec(meta.count, 1, meta.length, signal.into_vec())?;
    let mut ds = Dataset::new(samples, labels, meta.n_classes, meta.information_bands.clone())?;
    ds.meta = meta;
    Ok(ds)
}

/// Writes `label,v0,v1,…` rows.
pub fn export_csv(ds: &Dataset, path: &Path) -> Result<()> {
    let mut out = String::new();
    for (i, &label) in ds.labels.iter().enumerate() {
        out.push_str(&label.to_string());
        for v in ds.samples.sample(i) {
            out.push(',');
            out.push_str(&format!("{v:?}"));
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads rows written by [`export_csv`]; the class count is `max label + 1`.
pub fn import_csv(path: &Path) -> Result<Dataset> {
    let name = path.display().to_string();
    let text = fs::read_to_string(path)?;
    let mut labels = Vec::new();
    let mut data = Vec::new();
    let mut length = None;
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let err = |msg: String| Error::Parse { source_name: name.clone(), location: format!("line {}", i + 1), message: msg };
        let mut fields = line.split(',');
        let label: usize = fields
            .next()
            .unwrap_or("")
            .trim()
            .parse()
            .map_err(|e| err(format!("label: {e}")))?;
        let row = fields
            .map(|f| f.trim().parse::<f64>().map_err(|e| err(format!("`{f}`: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        if *length.get_or_insert(row.len()) != row.len() {
            return Err(err(format!("row has {} values, expected {}", row.len(), length.unwrap())));
        }
        labels.push(label);
        data.extend(row);
    }
    let length = length.ok_or_else(|| invalid(format!("{name} contains no samples")))?;
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    Dataset::new(Tensor::from_vec(labels.len(), 1, length, data)?, labels, n_classes, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::half_spectrum_magnitude;

    #[test]
    fn default_spec_is_balanced() {
        let ds = synth_generate(&SynthSpec::synth_bearing5(200), 1).unwrap();
        assert_eq!(ds.len(), 1000);
        assert_eq!(ds.class_counts(), vec![200; 5]);
        assert_eq!(ds.samples.shape(), (1000, 1, 1024));
    }

    #[test]
    fn generation_is_reproducible() {
        let spec = SynthSpec::synth_bearing5(3);
        assert_eq!(synth_generate(&spec, 9).unwrap(), synth_generate(&spec, 9).unwrap());
        assert_ne!(synth_generate(&spec, 9).unwrap().samples, synth_generate(&spec, 10).unwrap().samples);
    }

    #[test]
    fn pure_tone_peaks_at_its_bin() {
        let spec = SynthSpec {
            classes: vec![ClassSpec { name: "t".into(), components: vec![Component::Tone { freq: 100.0 / 1024.0, amp: 1.0 }] }],
            samples_per_class: 2,
            sample_length: 1024,
            noise_sigma: 0.0,
            information_bands: vec![(0.09, 0.11)],
        };
        let ds = synth_generate(&spec, 0).unwrap();
        for i in 0..2 {
            let mag = half_spectrum_magnitude(ds.samples.sample(i));
            let arg = (0..mag.len()).max_by(|&a, &b| mag[a].total_cmp(&mag[b])).unwrap();
            assert_eq!(arg, 100);
        }
    }

    #[test]
    fn samples_are_finite_and_vary() {
        let ds = synth_generate(&SynthSpec::synth_bearing5(4), 2).unwrap();
        for i in 0..ds.len() {
            let s = ds.samples.sample(i);
            let mean = s.iter().sum::<f64>() / s.len() as f64;
            let var = s.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
            assert!(s.iter().all(|v| v.is_finite()) && var > 0.0);
        }
    }

    /// Mean magnitude spectrum of one class, via the FFT.
    fn class_spectrum(ds: &Dataset, class: usize) -> Vec<f64> {
        let idx: Vec<usize> = (0..ds.len()).filter(|&i| ds.labels[i] == class).collect();
        let mut acc = vec![0.0; 513];
        for &i in &idx {
            for (a, m) in acc.iter_mut().zip(half_spectrum_magnitude(ds.samples.sample(i))) {
                *a += m / idx.len() as f64;
            }
        }
        acc
    }

    #[test]
    fn impulse_class_energy_sits_in_its_band() {
        let ds = synth_generate(&SynthSpec::synth_bearing5(60), 3).unwrap();
        let spec = class_spectrum(&ds, 2);
        // noise floor: expected |X|² of unit white noise is N per bin
        let floor = 1024.0;
        let excess: Vec<f64> = spec.iter().map(|m| (m * m - floor).max(0.0)).collect();
        let total: f64 = excess.iter().sum();
        let in_band: f64 = excess
            .iter()
            .enumerate()
            .filter(|(k, _)| (0.16..=0.20).contains(&(*k as f64 / 1024.0)))
            .map(|(_, e)| e)
            .sum();
        assert!(in_band / total >= 0.6, "ratio {}", in_band / total);
    }

    #[test]
    fn class_spectra_peak_inside_component_bands() {
        let spec = SynthSpec::synth_bearing5(40);
        let ds = synth_generate(&spec, 4).unwrap();
        for (c, class) in spec.classes.iter().enumerate() {
            let s = class_spectrum(&ds, c);
            let arg = (1..s.len()).max_by(|&a, &b| s[a].total_cmp(&s[b])).unwrap() as f64 / 1024.0;
            let bands: Vec<Band> = spec
                .information_bands
                .iter()
                .copied()
                .filter(|&(lo, hi)| class.components.iter().flat_map(|c| c.frequencies()).any(|f| f >= lo && f <= hi))
                .collect();
            assert!(bands.iter().any(|&(lo, hi)| arg >= lo && arg <= hi), "class {} argmax {arg}", class.name);
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut spec = SynthSpec::synth_bearing5(2);
        spec.information_bands[0] = (0.06, 0.04);
        assert!(synth_generate(&spec, 0).is_err());
        let mut spec = SynthSpec::synth_bearing5(2);
        spec.information_bands[1] = (0.05, 0.09);
        assert!(spec.validate().is_err());
        let mut spec = SynthSpec::synth_bearing5(2);
        spec.information_bands.remove(0);
        assert!(spec.validate().is_err());
        let mut spec = SynthSpec::synth_bearing5(2);
        spec.classes[0].components[0] = Component::Tone { freq: 0.6, amp: 1.0 };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn windowing() {
        let sig = |n: usize| Signal::new((0..n).map(|i| i as f64).collect()).unwrap();
        let w = window_signal(&sig(4096), 1024, 0).unwrap();
        assert_eq!(w.len(), 4);
        assert!(w.iter().all(|x| x.len() == 1024));
        assert_eq!(w[1][0], 1024.0);
        assert!(window_signal(&sig(1023), 1024, 0).is_err());
        let w = window_signal(&sig(2500), 1024, 0).unwrap();
        assert_eq!(w.len(), 2);
        assert_eq!(*w[1].last().unwrap(), 2047.0);
    }

    #[test]
    fn stratified_split() {
        let ds = synth_generate(&SynthSpec::synth_bearing5(200), 5).unwrap();
        let (train, test) = split(&ds, 0.6, 1).unwrap();
        assert_eq!((train.len(), test.len()), (600, 400));
        assert_eq!(train.class_counts(), vec![120; 5]);
        assert_eq!(test.class_counts(), vec![80; 5]);
        let (again, _) = split(&ds, 0.6, 1).unwrap();
        assert_eq!(train, again);

        let small = synth_generate(&SynthSpec::synth_bearing5(2), 5).unwrap();
        let (a, b) = split(&small, 0.5, 3).unwrap();
        assert_eq!(a.class_counts(), vec![1; 5]);
        assert_eq!(b.class_counts(), vec![1; 5]);

        let one = synth_generate(&SynthSpec::synth_bearing5(1), 5).unwrap();
        assert!(split(&one, 0.5, 0).is_err());
        assert!(split(&small, 1.0, 0).is_err());
    }

    #[test]
    fn split_sides_are_disjoint() {
        let mut ds = synth_generate(&SynthSpec::synth_bearing5(10), 6).unwrap();
        // tag every sample with its index so membership can be traced
        for i in 0..ds.len() {
            ds.samples.sample_mut(i)[0] = i as f64;
        }
        let (a, b) = split(&ds, 0.6, 2).unwrap();
        let ids = |d: &Dataset| (0..d.len()).map(|i| d.samples.sample(i)[0] as usize).collect::<Vec<_>>();
        let (ia, ib) = (ids(&a), ids(&b));
        assert!(ia.iter().all(|i| !ib.contains(i)));
        assert_eq!(ia.len() + ib.len(), 50);
    }

    #[test]
    fn signal_parsing() {
        let s = parse_signal_csv("1.0\n\u{2212}2.5\n", "mem").unwrap();
        assert_eq!(s.values(), &[1.0, -2.5]);
        let s = parse_signal_csv("1.0\n-2.5\n", "mem").unwrap();
        assert_eq!(s.values(), &[1.0, -2.5]);
        match parse_signal_csv("1.0\nabc\n", "mem") {
            Err(Error::Parse { location, .. }) => assert_eq!(location, "line 2"),
            other => panic!("{other:?}"),
        }
        let mut bytes = 1.5f64.to_le_bytes().to_vec();
        assert_eq!(parse_signal_f64le(&bytes, "mem").unwrap().values(), &[1.5]);
        bytes.push(0);
        assert!(matches!(parse_signal_f64le(&bytes, "mem"), Err(Error::Parse { .. })));
    }

    #[test]
    fn container_roundtrip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let ds = synth_generate(&SynthSpec::synth_bearing5(3), 7).unwrap();
        save_dataset(&ds, dir.path()).unwrap();
        let back = load_dataset(dir.path()).unwrap();
        assert_eq!(back, ds);
        assert!(back.samples.data.iter().zip(&ds.samples.data).all(|(a, b)| a.to_bits() == b.to_bits()));

        let csv = dir.path().join("ds.csv");
        export_csv(&ds, &csv).unwrap();
        let imported = import_csv(&csv).unwrap();
        assert_eq!(imported.samples, ds.samples);
        assert_eq!(imported.labels, ds.labels);
    }
}
