//! Flat `key = value` run configuration.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use tfn_core::data::{validate_bands, Band, SynthSpec};
use tfn_core::interpret::{DEFAULT_HIT_THRESHOLD, DEFAULT_L_FFT};
use tfn_core::nn::{AdamConfig, Backbone, ModelMode, TrainConfig};
use tfn_core::KernelFamily;

use crate::CliError;

pub const KEYS: &[&str] = &[
    "adam_eps",
    "backbone",
    "bands",
    "batch_size",
    "beta1",
    "beta2",
    "channels",
    "checkpoint",
    "checkpoint_before",
    "data",
    "epochs",
    "families",
    "family",
    "l_fft",
    "lr",
    "lr_decay",
    "mode",
    "modes",
    "n_classes",
    "noise_sigma",
    "out",
    "representations",
    "resume",
    "sample_length",
    "samples_per_class",
    "seed",
    "threshold",
    "train_fraction",
];

pub const ABLATION_MODES: [ModelMode; 5] = [
    ModelMode::BackboneOnly,
    ModelMode::TfnAdd,
    ModelMode::TfnReplace,
    ModelMode::WknAdd,
    ModelMode::WknReplace,
];

/// Raw settings; later insertions override earlier ones.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings(BTreeMap<String, String>);

impl Settings {
    pub fn parse(text: &str, source: &str) -> Result<Self, CliError> {
        let mut s = Settings::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("{source} line {}: expected `key = value`", i + 1)))?;
            s.set(k.trim(), v.trim())?;
        }
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        if !KEYS.contains(&key) {
            return Err(CliError::Config(format!("unknown config key `{key}`")));
        }
        self.0.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    pub fn merge(&mut self, other: &Settings) {
        for (k, v) in &other.0 {
            self.0.insert(k.clone(), v.clone());
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seeds: Vec<u64>,
    pub samples_per_class: usize,
    pub sample_length: usize,
    pub noise_sigma: f64,
    pub train_fraction: f64,
    pub bands: Vec<Band>,
    pub mode: ModelMode,
    pub backbone: Backbone,
    pub family: KernelFamily,
    pub channels: usize,
    pub n_classes: Option<usize>,
    pub train: TrainConfig,
    pub checkpoint: Option<PathBuf>,
    pub checkpoint_before: Option<PathBuf>,
    pub l_fft: usize,
    pub threshold: f64,
    pub modes: Vec<ModelMode>,
    pub families: Vec<KernelFamily>,
    pub representations: bool,
    pub resume: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let synth = SynthSpec::synth_bearing5(200);
        Self {
            data: None,
            out: None,
            seeds: vec![0],
            samples_per_class: synth.samples_per_class,
            sample_length: synth.sample_length,
            noise_sigma: synth.noise_sigma,
            train_fraction: 0.6,
            bands: synth.information_bands,
            mode: ModelMode::TfnAdd,
            backbone: Backbone::PaperCnn,
            family: KernelFamily::Sttf,
            channels: 8,
            n_classes: None,
            train: TrainConfig::default(),
            checkpoint: None,
            checkpoint_before: None,
            l_fft: DEFAULT_L_FFT,
            threshold: DEFAULT_HIT_THRESHOLD,
            modes: ABLATION_MODES.to_vec(),
            families: vec![KernelFamily::Sttf],
            representations: false,
            resume: false,
        }
    }
}

fn bad(key: &str, value: &str, why: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("config key `{key}` = `{value}`: {why}"))
}

fn parse_with<T>(s: &Settings, key: &str, f: impl Fn(&str) -> Result<T, String>) -> Result<Option<T>, CliError> {
    s.get(key).map(|v| f(v).map_err(|e| bad(key, v, e))).transpose()
}

fn num<T: std::str::FromStr>(v: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| e.to_string())
}

fn list<T>(v: &str, f: impl Fn(&str) -> Result<T, String>) -> Result<Vec<T>, String> {
    let items: Vec<T> = v.split(',').map(str::trim).filter(|x| !x.is_empty()).map(f).collect::<Result<_, _>>()?;
    if items.is_empty() {
        return Err("list is empty".into());
    }
    Ok(items)
}

fn band(v: &str) -> Result<Band, String> {
    let (lo, hi) = v.split_once(':').ok_or("bands are written lo:hi")?;
    Ok((num(lo.trim())?, num(hi.trim())?))
}

fn flag(v: &str) -> Result<bool, String> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err("expected true or false".into()),
    }
}

fn existing(key: &str, v: &str) -> Result<PathBuf, CliError> {
    let p = PathBuf::from(v);
    if !p.exists() {
        return Err(bad(key, v, "path does not exist"));
    }
    Ok(p)
}

impl RunConfig {
    pub fn from_settings(s: &Settings) -> Result<Self, CliError> {
        let mut c = RunConfig::default();
        if let Some(v) = s.get("data") {
            c.data = Some(existing("data", v)?);
        }
        if let Some(v) = s.get("checkpoint") {
            c.checkpoint = Some(existing("checkpoint", v)?);
        }
        if let Some(v) = s.get("checkpoint_before") {
            c.checkpoint_before = Some(existing("checkpoint_before", v)?);
        }
        c.out = s.get("out").map(PathBuf::from);
        if let Some(v) = parse_with(s, "seed", |v| list(v, num::<u64>))? {
            c.seeds = v;
        }
        if let Some(v) = parse_with(s, "samples_per_class", num)? {
            c.samples_per_class = v;
        }
        if let Some(v) = parse_with(s, "sample_length", num)? {
            c.sample_length = v;
        }
        if let Some(v) = parse_with(s, "noise_sigma", num)? {
            c.noise_sigma = v;
        }
        if let Some(v) = parse_with(s, "train_fraction", num)? {
            c.train_fraction = v;
        }
        if let Some(v) = parse_with(s, "bands", |v| {
            let b = list(v, band)?;
            validate_bands(&b).map_err(|e| e.to_string())?;
            Ok(b)
        })? {
            c.bands = v;
        }
        let str_err = |e: tfn_core::Error| e.to_string();
        if let Some(v) = parse_with(s, "mode", |v| v.parse::<ModelMode>().map_err(str_err))? {
            c.mode = v;
        }
        if let Some(v) = parse_with(s, "backbone", |v| v.parse::<Backbone>().map_err(str_err))? {
            c.backbone = v;
        }
        if let Some(v) = parse_with(s, "family", |v| v.parse::<KernelFamily>().map_err(str_err))? {
            c.family = v;
        }
        if let Some(v) = parse_with(s, "channels", num)? {
            c.channels = v;
        }
        c.n_classes = parse_with(s, "n_classes", num)?;
        if let Some(v) = parse_with(s, "epochs", num)? {
            c.train.epochs = v;
        }
        if let Some(v) = parse_with(s, "lr", num)? {
            c.train.initial_lr = v;
        }
        if let Some(v) = parse_with(s, "lr_decay", num)? {
            c.train.lr_decay = v;
        }
        if let Some(v) = parse_with(s, "beta1", num)? {
            c.train.adam.beta1 = v;
        }
        if let Some(v) = parse_with(s, "beta2", num)? {
            c.train.adam.beta2 = v;
        }
        if let Some(v) = parse_with(s, "adam_eps", num)? {
            c.train.adam.eps = v;
        }
        if let Some(v) = parse_with(s, "batch_size", num)? {
            c.train.batch_size = v;
        }
        if let Some(v) = parse_with(s, "l_fft", num)? {
            c.l_fft = v;
        }
        if let Some(v) = parse_with(s, "threshold", num)? {
            c.threshold = v;
        }
        if let Some(v) = parse_with(s, "modes", |v| list(v, |m| m.parse::<ModelMode>().map_err(str_err)))? {
            c.modes = v;
        }
        if let Some(v) = parse_with(s, "families", |v| list(v, |f| f.parse::<KernelFamily>().map_err(str_err)))? {
            c.families = v;
        }
        if let Some(v) = parse_with(s, "representations", flag)? {
            c.representations = v;
        }
        if let Some(v) = parse_with(s, "resume", flag)? {
            c.resume = v;
        }
        c.validate()?;
        Ok(c)
    }

    fn validate(&self) -> Result<(), CliError> {
        let fail = |key: &str, why: &str| Err(CliError::Config(format!("config key `{key}`: {why}")));
        if self.samples_per_class < 2 {
            return fail("samples_per_class", "needs at least 2 samples per class to split");
        }
        if self.sample_length == 0 {
            return fail("sample_length", "must be positive");
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return fail("noise_sigma", "must be finite and non-negative");
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return fail("train_fraction", "must lie in (0, 1)");
        }
        if self.channels == 0 {
            return fail("channels", "must be positive");
        }
        if self.n_classes == Some(0) {
            return fail("n_classes", "must be positive");
        }
        if self.l_fft < 2 {
            return fail("l_fft", "must be at least 2");
        }
        if !(self.threshold > 0.0 && self.threshold.is_finite()) {
            return fail("threshold", "must be positive");
        }
        if self.family == KernelFamily::Random && self.mode != ModelMode::RandomTfn {
            return fail("family", "the random family is only used by mode random-tfn");
        }
        if self.families.contains(&KernelFamily::Random) {
            return fail("families", "use mode random-tfn for random kernels");
        }
        self.train.validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.synth_spec().validate().map_err(|e| CliError::Config(format!("config key `bands`: {e}")))?;
        Ok(())
    }

    pub fn synth_spec(&self) -> SynthSpec {
        let mut spec = SynthSpec::synth_bearing5(self.samples_per_class);
        spec.sample_length = self.sample_length;
        spec.noise_sigma = self.noise_sigma;
        spec.information_bands = self.bands.clone();
        spec
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig { seed, ..self.train }
    }

    /// Effective configuration, one `key = value` per line; parsing it back
    /// yields an equal config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let join = |v: Vec<String>| v.join(",");
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        let AdamConfig { beta1, beta2, eps } = self.train.adam;
        put("adam_eps", format!("{eps:?}"));
        put("backbone", self.backbone.to_string());
        put("bands", join(self.bands.iter().map(|(a, b)| format!("{a:?}:{b:?}")).collect()));
        put("batch_size", self.train.batch_size.to_string());
        put("beta1", format!("{beta1:?}"));
        put("beta2", format!("{beta2:?}"));
        put("channels", self.channels.to_string());
        if let Some(p) = &self.checkpoint {
            put("checkpoint", p.display().to_string());
        }
        if let Some(p) = &self.checkpoint_before {
            put("checkpoint_before", p.display().to_string());
        }
        if let Some(p) = &self.data {
            put("data", p.display().to_string());
        }
        put("epochs", self.train.epochs.to_string());
        put("families", join(self.families.iter().map(|f| f.to_string()).collect()));
        put("family", self.family.to_string());
        put("l_fft", self.l_fft.to_string());
        put("lr", format!("{:?}", self.train.initial_lr));
        put("lr_decay", format!("{:?}", self.train.lr_decay));
        put("mode", self.mode.to_string());
        put("modes", join(self.modes.iter().map(|m| m.to_string()).collect()));
        if let Some(n) = self.n_classes {
            put("n_classes", n.to_string());
        }
        put("noise_sigma", format!("{:?}", self.noise_sigma));
        if let Some(p) = &self.out {
            put("out", p.display().to_string());
        }
        put("representations", self.representations.to_string());
        put("resume", self.resume.to_string());
        put("sample_length", self.sample_length.to_string());
        put("samples_per_class", self.samples_per_class.to_string());
        put("seed", join(self.seeds.iter().map(u64::to_string).collect()));
        put("threshold", format!("{:?}", self.threshold));
        put("train_fraction", format!("{:?}", self.train_fraction));
        s
    }
}
