use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use tfn_core::data::{load_dataset, save_dataset, split, synth_generate, Band, Dataset};
use tfn_core::interpret::{
    band_coverage, cfr_csv, channel_frequency_response, dataset_spectrum, export_representations, frequency_axis, ofr_csv,
    representations_csv, separability_ratio, tfconv_cfr,
};
use tfn_core::nn::{
    assemble_model, evaluate, load_checkpoint, save_checkpoint, train, Layer, ModelMode, TfConvConfig,
};
use tfn_core::{seed, KernelFamily, Model};

use crate::config::{RunConfig, Settings};
use crate::{io_err, CliError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    GenData,
    Train,
    Eval,
    FreqResponse,
    Ablate,
    ExportKernels,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::GenData => "gen-data",
            Command::Train => "train",
            Command::Eval => "eval",
            Command::FreqResponse => "freq-response",
            Command::Ablate => "ablate",
            Command::ExportKernels => "export-kernels",
        }
    }
}

pub fn run(command: Command, settings: &Settings, force: bool) -> Result<(), CliError> {
    let cfg = RunConfig::from_settings(settings)?;
    match command {
        Command::GenData => gen_data(&cfg, force).map(|_| ()),
        Command::Train => train_cmd(&cfg, force).map(|_| ()),
        Command::Eval => eval_cmd(&cfg, force).map(|_| ()),
        Command::FreqResponse => freq_response(&cfg, force).map(|_| ()),
        Command::Ablate => ablate(&cfg, force).map(|_| ()),
        Command::ExportKernels => export_kernels(&cfg, force),
    }
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(io_err(format!("cannot write {}", path.display())))
}

fn remove_stale(path: &Path) -> Result<(), CliError> {
    match fs::remove_file(path) {
        Err(e) if e.kind() != std::io::ErrorKind::NotFound => Err(io_err(format!("cannot remove {}", path.display()))(e)),
        _ => Ok(()),
    }
}

/// Creates the output directory, refusing a non-empty one unless forced.
fn prepare_out(cfg: &RunConfig, force: bool) -> Result<PathBuf, CliError> {
    let out = cfg.out.clone().ok_or_else(|| CliError::Config("no output directory; pass --out or set `out`".into()))?;
    let occupied = fs::read_dir(&out).map(|mut d| d.next().is_some()).unwrap_or(false);
    if occupied && !force && !cfg.resume {
        return Err(CliError::Config(format!("output directory {} is not empty; pass --force to overwrite", out.display())));
    }
    fs::create_dir_all(&out).map_err(io_err(format!("cannot create {}", out.display())))?;
    write(&out.join("config.txt"), &cfg.to_text())?;
    Ok(out)
}

fn single_seed(cfg: &RunConfig) -> u64 {
    cfg.seeds[0]
}

/// Train/test sets: a generated directory, a single dataset split by the
/// configured fraction, or a synthetic set generated from `seed`.
pub fn load_splits(cfg: &RunConfig, seed: u64) -> Result<(Dataset, Dataset), CliError> {
    let split_seed = seed::derive(seed, "data.split");
    let (train, test) = match &cfg.data {
        Some(dir) if dir.join("train").join("meta.json").exists() => {
            (load_dataset(&dir.join("train"))?, load_dataset(&dir.join("test"))?)
        }
        Some(dir) if dir.join("meta.json").exists() => split(&load_dataset(dir)?, cfg.train_fraction, split_seed)?,
        Some(dir) => {
            return Err(CliError::Config(format!(
                "config key `data`: {} holds neither a dataset nor train/ and test/ datasets",
                dir.display()
            )))
        }
        None => split(&synth_generate(&cfg.synth_spec(), seed::derive(seed, "data"))?, cfg.train_fraction, split_seed)?,
    };
    if let Some(n) = cfg.n_classes {
        if n != train.n_classes() || n != test.n_classes() {
            return Err(CliError::Config(format!(
                "config key `n_classes`: {n} does not match the dataset's {} classes",
                train.n_classes()
            )));
        }
    }
    Ok((train, test))
}

fn eval_set(cfg: &RunConfig) -> Result<Dataset, CliError> {
    match &cfg.data {
        Some(dir) if !dir.join("train").join("meta.json").exists() && dir.join("meta.json").exists() => {
            Ok(load_dataset(dir)?)
        }
        _ => Ok(load_splits(cfg, single_seed(cfg))?.1),
    }
}

pub struct GenDataSummary {
    pub train_count: usize,
    pub test_count: usize,
}

pub fn gen_data(cfg: &RunConfig, force: bool) -> Result<GenDataSummary, CliError> {
    if cfg.data.is_some() {
        return Err(CliError::Config("config key `data`: gen-data synthesises its own dataset".into()));
    }
    let out = prepare_out(cfg, force)?;
    let seed = single_seed(cfg);
    let (train, test) = load_splits(cfg, seed)?;
    save_dataset(&train, &out.join("train"))?;
    save_dataset(&test, &out.join("test"))?;
    let mut m = String::new();
    let _ = writeln!(m, "seed = {seed}");
    let _ = writeln!(m, "n_classes = {}", train.n_classes());
    let _ = writeln!(m, "sample_length = {}", train.samples.len);
    let _ = writeln!(m, "train_count = {}", train.len());
    let _ = writeln!(m, "test_count = {}", test.len());
    let counts = |d: &Dataset| d.class_counts().iter().map(usize::to_string).collect::<Vec<_>>().join(",");
    let _ = writeln!(m, "train_class_counts = {}", counts(&train));
    let _ = writeln!(m, "test_class_counts = {}", counts(&test));
    write(&out.join("manifest.txt"), &m)?;
    println!("wrote {} training and {} test samples to {}", train.len(), test.len(), out.display());
    Ok(GenDataSummary { train_count: train.len(), test_count: test.len() })
}

/// Kernel label used in result tables: `-` without a time-frequency layer.
pub fn kernel_label(mode: ModelMode, family: KernelFamily) -> &'static str {
    match mode {
        ModelMode::BackboneOnly => "-",
        ModelMode::RandomTfn => KernelFamily::Random.name(),
        _ => family.name(),
    }
}

fn cell_name(mode: ModelMode, family: KernelFamily, seed: u64) -> String {
    let kernel = match kernel_label(mode, family) {
        "-" => "none",
        k => k,
    };
    format!("{mode}-{kernel}-seed{seed}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub mode: ModelMode,
    pub kernel: String,
    pub seed: u64,
    pub test_acc: f64,
    pub dir: PathBuf,
}

fn theta_names(model: &Model) -> Vec<String> {
    let Some(t) = model.tfconv_layer() else { return Vec::new() };
    let names = t.family().param_names();
    (0..t.n_channels()).flat_map(|c| names.iter().map(move |n| format!("c{c}_{n}"))).collect()
}

fn read_metric(path: &Path) -> Option<f64> {
    let text = fs::read_to_string(path).ok()?;
    text.lines().find_map(|l| l.strip_prefix("final_test_acc = ")?.trim().parse().ok())
}

/// Trains one (mode, family, seed) cell into `dir`: `config.txt`,
/// `init.tfn`, `model.tfn`, `history.csv`, `theta.csv`, `metrics.txt`.
pub fn run_cell(
    cfg: &RunConfig,
    mode: ModelMode,
    family: KernelFamily,
    seed: u64,
    dir: &Path,
    data: &(Dataset, Dataset),
) -> Result<CellResult, CliError> {
    let mut cell = cfg.clone();
    cell.mode = mode;
    cell.family = if mode == ModelMode::RandomTfn { KernelFamily::Random } else { family };
    cell.seeds = vec![seed];
    cell.modes = vec![mode];
    cell.families = vec![family];
    cell.resume = false;
    cell.out = Some(dir.to_path_buf());
    let echo = cell.to_text();
    let result = |test_acc| CellResult {
        mode,
        kernel: kernel_label(mode, family).to_string(),
        seed,
        test_acc,
        dir: dir.to_path_buf(),
    };
    if cfg.resume && fs::read_to_string(dir.join("config.txt")).is_ok_and(|t| t == echo) {
        if let Some(acc) = read_metric(&dir.join("metrics.txt")) {
            return Ok(result(acc));
        }
    }
    fs::create_dir_all(dir).map_err(io_err(format!("cannot create {}", dir.display())))?;
    remove_stale(&dir.join("metrics.txt"))?;
    write(&dir.join("config.txt"), &echo)?;
    let (train_set, test_set) = data;
    let tf = TfConvConfig { family: cell.family, channels: cfg.channels };
    let mut model = assemble_model(mode, cfg.backbone, tf, train_set.n_classes(), seed)?;
    save_checkpoint(&mut model, &dir.join("init.tfn"))?;
    let started = Instant::now();
    let history = train(&mut model, train_set, test_set, &cfg.train_config(seed))?;
    save_checkpoint(&mut model, &dir.join("model.tfn"))?;
    write(&dir.join("history.csv"), &history.to_csv())?;
    match history.theta_csv(&theta_names(&model)) {
        Some(csv) => write(&dir.join("theta.csv"), &csv)?,
        None => remove_stale(&dir.join("theta.csv"))?,
    }
    let eval = evaluate(&mut model, test_set)?;
    let acc = history.final_test_acc().unwrap_or(eval.accuracy);
    let mut m = format!("final_test_acc = {acc:?}\n");
    for row in &eval.confusion {
        let _ = writeln!(m, "confusion = {}", row.iter().map(usize::to_string).collect::<Vec<_>>().join(","));
    }
    write(&dir.join("metrics.txt"), &m)?;
    eprintln!(
        "{}: test accuracy {acc:.4} after {} epochs ({:.1} s)",
        cell_name(mode, family, seed),
        history.epochs.len(),
        started.elapsed().as_secs_f64()
    );
    Ok(result(acc))
}

pub fn train_cmd(cfg: &RunConfig, force: bool) -> Result<Vec<CellResult>, CliError> {
    let out = prepare_out(cfg, force)?;
    let mut results = Vec::new();
    for &seed in &cfg.seeds {
        let data = load_splits(cfg, seed)?;
        let dir = if cfg.seeds.len() == 1 { out.clone() } else { out.join(format!("seed{seed}")) };
        let r = run_cell(cfg, cfg.mode, cfg.family, seed, &dir, &data)?;
        println!("seed {seed}: final test accuracy {:?}", r.test_acc);
        results.push(r);
    }
    if cfg.seeds.len() == 1 {
        // the cell echo carries the single seed; restore the command echo
        write(&out.join("config.txt"), &cfg.to_text())?;
    }
    Ok(results)
}

pub fn eval_cmd(cfg: &RunConfig, force: bool) -> Result<f64, CliError> {
    let ckpt = cfg.checkpoint.as_ref().ok_or_else(|| CliError::Config("config key `checkpoint` is required".into()))?;
    let mut model = load_checkpoint(ckpt)?;
    let ds = eval_set(cfg)?;
    if ds.n_classes() != model.n_classes {
        return Err(CliError::Config(format!(
            "dataset has {} classes but the checkpoint predicts {}",
            ds.n_classes(),
            model.n_classes
        )));
    }
    let out = prepare_out(cfg, force)?;
    let eval = evaluate(&mut model, &ds)?;
    let mut csv = String::from("true_class");
    (0..model.n_classes).for_each(|c| {
        let _ = write!(csv, ",pred_{c}");
    });
    csv.push('\n');
    for (t, row) in eval.confusion.iter().enumerate() {
        let _ = writeln!(csv, "{t},{}", row.iter().map(usize::to_string).collect::<Vec<_>>().join(","));
    }
    write(&out.join("confusion.csv"), &csv)?;
    let mut m = format!("accuracy = {:?}\n", eval.accuracy);
    if cfg.representations {
        let reps = export_representations(&mut model, &ds)?;
        write(&out.join("representations.csv"), &representations_csv(&reps, &ds.labels))?;
        let _ = writeln!(m, "separability = {:?}", separability_ratio(&reps, &ds.labels)?);
    }
    write(&out.join("metrics.txt"), &m)?;
    println!("accuracy {:?} on {} samples", eval.accuracy, ds.len());
    Ok(eval.accuracy)
}

fn first_kernel_len(model: &Model) -> Option<usize> {
    match model.layers.first() {
        Some(Layer::TfConv(t)) => Some(t.grid().len),
        Some(Layer::Conv1d(c)) => Some(c.kernel),
        _ => None,
    }
}

fn load_for_spectrum(path: &Path, l_fft: usize) -> Result<Model, CliError> {
    let model = load_checkpoint(path)?;
    if let Some(k) = first_kernel_len(&model) {
        if l_fft < k {
            return Err(CliError::Config(format!(
                "config key `l_fft`: {l_fft} is shorter than the {k}-tap first-layer kernel"
            )));
        }
    }
    Ok(model)
}

pub fn freq_response(cfg: &RunConfig, force: bool) -> Result<usize, CliError> {
    let ckpt = cfg.checkpoint.as_ref().ok_or_else(|| CliError::Config("config key `checkpoint` is required".into()))?;
    let model = load_for_spectrum(ckpt, cfg.l_fft)?;
    let fr = channel_frequency_response(&model, cfg.l_fft)?;
    let out = prepare_out(cfg, force)?;
    write(&out.join("cfr.csv"), &cfr_csv(&fr))?;
    write(&out.join("ofr.csv"), &ofr_csv(&fr))?;
    let mut bands: Vec<Band> = cfg.bands.clone();
    if cfg.data.is_some() {
        let ds = eval_set(cfg)?;
        if let Some(b) = &ds.meta.information_bands {
            bands = b.clone();
        }
        let spectrum = dataset_spectrum(&ds)?;
        let freqs = frequency_axis(ds.samples.len);
        let mut csv = String::from("freq,magnitude\n");
        for (f, v) in freqs.iter().zip(&spectrum) {
            let _ = writeln!(csv, "{f:?},{v:?}");
        }
        write(&out.join("spectrum.csv"), &csv)?;
    }
    let report = band_coverage(&fr.ofr, &fr.freqs, &bands, cfg.threshold)?;
    write(&out.join("band_report.txt"), &report.to_text())?;
    println!("{} of {} information bands hit", report.hits(), report.bands.len());
    Ok(report.hits())
}

pub fn export_kernels(cfg: &RunConfig, force: bool) -> Result<(), CliError> {
    let ckpt = cfg.checkpoint.as_ref().ok_or_else(|| CliError::Config("config key `checkpoint` is required".into()))?;
    let mut stages = Vec::new();
    if let Some(before) = &cfg.checkpoint_before {
        stages.push(("before", load_for_spectrum(before, cfg.l_fft)?));
    }
    stages.push(("after", load_for_spectrum(ckpt, cfg.l_fft)?));
    let out = prepare_out(cfg, force)?;
    let mut taps = String::from("stage,channel,n,re,im\n");
    let mut spectrum = String::from("stage,channel,freq,magnitude\n");
    let freqs = frequency_axis(cfg.l_fft);
    for (stage, model) in &stages {
        let layer = model
            .tfconv_layer()
            .ok_or_else(|| CliError::Config(format!("checkpoint for stage {stage} has no time-frequency layer")))?;
        let grid = layer.grid();
        for (c, k) in layer.kernels()?.iter().enumerate() {
            for (n, z) in grid.indices().zip(k.as_slice()) {
                let _ = writeln!(taps, "{stage},{c},{n},{:?},{:?}", z.re, z.im);
            }
        }
        for (c, row) in tfconv_cfr(layer, cfg.l_fft)?.iter().enumerate() {
            for (f, v) in freqs.iter().zip(row) {
                let _ = writeln!(spectrum, "{stage},{c},{f:?},{v:?}");
            }
        }
    }
    write(&out.join("kernels.csv"), &taps)?;
    write(&out.join("kernel_spectrum.csv"), &spectrum)?;
    println!("exported kernels of {} checkpoint(s) to {}", stages.len(), out.display());
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub model: String,
    pub kernel: String,
    pub mean_acc: f64,
    pub variance: f64,
    pub accuracies: Vec<f64>,
}

/// Population mean and variance.
pub fn mean_variance(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (mean, xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n)
}

/// Grid groups in table order; modes without a configurable kernel appear once.
pub fn ablation_groups(cfg: &RunConfig) -> Vec<(ModelMode, KernelFamily)> {
    let mut groups = Vec::new();
    for &mode in &cfg.modes {
        match mode {
            ModelMode::BackboneOnly | ModelMode::RandomTfn => groups.push((mode, KernelFamily::Sttf)),
            _ => groups.extend(cfg.families.iter().map(|&f| (mode, f))),
        }
    }
    groups
}

fn results_csv(rows: &[AblationRow]) -> String {
    let mut s = String::from("model,kernel,mean_acc,variance\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{:?},{:?}", r.model, r.kernel, r.mean_acc, r.variance);
    }
    s
}

fn cells_csv(cells: &[CellResult]) -> String {
    let mut s = String::from("model,kernel,seed,test_acc\n");
    for c in cells {
        let _ = writeln!(s, "{},{},{},{:?}", c.mode, c.kernel, c.seed, c.test_acc);
    }
    s
}

fn threads() -> Result<usize, CliError> {
    match std::env::var("TFN_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::Config(format!("TFN_THREADS = `{v}` is not a positive integer"))),
        Err(_) => Ok(1),
    }
}

/// Runs every (mode, family, seed) cell under `out/cells/` and writes
/// `results.csv` and `cells.csv`. On failure, rows for completed groups are
/// still written before the error is returned.
pub fn ablate(cfg: &RunConfig, force: bool) -> Result<Vec<AblationRow>, CliError> {
    let out = prepare_out(cfg, force)?;
    let groups = ablation_groups(cfg);
    let jobs: Vec<(ModelMode, KernelFamily, u64)> =
        groups.iter().flat_map(|&(m, f)| cfg.seeds.iter().map(move |&s| (m, f, s))).collect();
    let datasets: Vec<(Dataset, Dataset)> = cfg.seeds.iter().map(|&s| load_splits(cfg, s)).collect::<Result<_, _>>()?;
    let data_for = |s: u64| &datasets[cfg.seeds.iter().position(|&x| x == s).unwrap()];
    let run_job = |&(m, f, s): &(ModelMode, KernelFamily, u64)| {
        run_cell(cfg, m, f, s, &out.join("cells").join(cell_name(m, f, s)), data_for(s))
    };
    let n_threads = threads()?;
    let outcomes: Vec<Result<CellResult, CliError>> = if n_threads <= 1 {
        let mut v = Vec::new();
        for job in &jobs {
            let r = run_job(job);
            let failed = r.is_err();
            v.push(r);
            if failed {
                break;
            }
        }
        v
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(n_threads)
            .build()
            .map_err(|e| CliError::Config(format!("TFN_THREADS: {e}")))?;
        pool.install(|| jobs.par_iter().map(run_job).collect())
    };
    let mut done = Vec::new();
    let mut first_err = None;
    for o in outcomes {
        match o {
            Ok(c) => done.push(c),
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    let mut rows = Vec::new();
    for &(m, f) in &groups {
        let accs: Vec<f64> = done
            .iter()
            .filter(|c| c.mode == m && c.kernel == kernel_label(m, f))
            .map(|c| c.test_acc)
            .collect();
        if accs.len() == cfg.seeds.len() {
            let (mean_acc, variance) = mean_variance(&accs);
            rows.push(AblationRow {
                model: m.to_string(),
                kernel: kernel_label(m, f).to_string(),
                mean_acc,
                variance,
                accuracies: accs,
            });
        }
    }
    write(&out.join("results.csv"), &results_csv(&rows))?;
    write(&out.join("cells.csv"), &cells_csv(&done))?;
    if let Some(e) = first_err {
        return Err(e);
    }
    println!("{}", results_csv(&rows).trim_end());
    Ok(rows)
}
