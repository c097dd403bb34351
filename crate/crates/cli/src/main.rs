use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tfn_cli::{run, CliError, Command, Settings};

/// Train and interpret time-frequency convolution networks.
#[derive(Debug, Parser)]
#[command(name = "tfn", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Seed list, e.g. `1` or `1,2,3`.
    #[arg(long, global = true)]
    seed: Option<String>,

    /// Overwrite a non-empty output directory.
    #[arg(long, global = true)]
    force: bool,

    /// Override any config key; may be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Generate a SynthBearing-5 train/test dataset directory.
    GenData,
    /// Train one model per seed and save checkpoints and histories.
    Train,
    /// Evaluate a checkpoint on a dataset.
    Eval,
    /// Channel and overall frequency responses of a checkpoint's first layer.
    FreqResponse,
    /// Run the mode × kernel × seed grid and tabulate accuracies.
    Ablate,
    /// Export kernel taps and spectra for one or two checkpoints.
    ExportKernels,
}

fn settings(cli: &Cli) -> Result<Settings, CliError> {
    let mut s = match &cli.config {
        Some(path) => Settings::load(path)?,
        None => Settings::default(),
    };
    let mut flags = Settings::default();
    for kv in &cli.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        flags.set(k.trim(), v.trim())?;
    }
    if let Some(out) = &cli.out {
        flags.set("out", &out.display().to_string())?;
    }
    if let Some(seed) = &cli.seed {
        flags.set("seed", seed)?;
    }
    s.merge(&flags);
    Ok(s)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = match cli.command {
        Cmd::GenData => Command::GenData,
        Cmd::Train => Command::Train,
        Cmd::Eval => Command::Eval,
        Cmd::FreqResponse => Command::FreqResponse,
        Cmd::Ablate => Command::Ablate,
        Cmd::ExportKernels => Command::ExportKernels,
    };
    match settings(&cli).and_then(|s| run(command, &s, cli.force)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tfn {}: {e}", command.name());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
