//! Command-line front end. [`main`] is what the `chemtab` binary calls.

mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use commands::{cmd_ablate, cmd_baseline, cmd_evaluate, cmd_generate, cmd_report, cmd_train, summarize};
pub use config::{DerivedSeeds, RunConfig};

use crate::dataset::SplitMode;
use crate::Result;

#[derive(Debug, Parser)]
#[command(name = "chemtab", version, about = "Flamelet data generation and constrained progress-variable training")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the strain sweep and write the dataset CSV.
    Generate(RunArgs),
    /// Train one variant and write its checkpoint.
    Train(RunArgs),
    /// Score a checkpoint on both sides of the configured split.
    Evaluate(RunArgs),
    /// Constraint subsets under both splits plus the PV-count sweep.
    Ablate(RunArgs),
    /// Baseline encoders and the lookup table against CT(ALL).
    Baseline(RunArgs),
    /// Summarize ablation and baseline results.
    Report(RunArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Generate(_) => "generate",
            Command::Train(_) => "train",
            Command::Evaluate(_) => "evaluate",
            Command::Ablate(_) => "ablate",
            Command::Baseline(_) => "baseline",
            Command::Report(_) => "report",
        }
    }

    pub fn args(&self) -> &RunArgs {
        match self {
            Command::Generate(a)
            | Command::Train(a)
            | Command::Evaluate(a)
            | Command::Ablate(a)
            | Command::Baseline(a)
            | Command::Report(a) => a,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Point,
    Flamelet,
}

impl From<SplitArg> for SplitMode {
    fn from(s: SplitArg) -> Self {
        match s {
            SplitArg::Point => SplitMode::ByPoint,
            SplitArg::Flamelet => SplitMode::ByFlamelet,
        }
    }
}

/// Flags shared by every subcommand. Anything else goes in the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// key = value config file; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Mechanism file; the bundled methane mechanism when omitted.
    #[arg(long)]
    pub mechanism: Option<PathBuf>,
    #[arg(long)]
    pub flames: Option<usize>,
    /// Grid points per flamelet.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Domain-length factor between consecutive flames.
    #[arg(long)]
    pub shrink: Option<f64>,
    #[arg(long, value_enum)]
    pub split: Option<SplitArg>,
    /// Share of flames or rows on the training side.
    #[arg(long)]
    pub fraction: Option<f64>,
    /// CT-ALL, CT(UN+WO), PCA_PVG, UL_ENC, NL_ENC or FGM_CPVG.
    #[arg(long)]
    pub variant: Option<String>,
    /// Number of learned progress variables.
    #[arg(long)]
    pub cpv: Option<usize>,
    #[arg(long, conflicts_with = "long_run")]
    pub epochs: Option<usize>,
    /// Train for 20000 epochs.
    #[arg(long)]
    pub long_run: bool,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl RunArgs {
    /// Defaults, then the config file, then flags.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut c = RunConfig::default();
        if let Some(path) = &self.config {
            c.apply_file(path)?;
        }
        if let Some(v) = &self.mechanism {
            c.mechanism = Some(v.clone());
        }
        if let Some(v) = self.flames {
            c.flames = v;
        }
        if let Some(v) = self.grid {
            c.grid = v;
        }
        if let Some(v) = self.shrink {
            c.shrink = v;
        }
        if let Some(v) = self.split {
            c.split = v.into();
        }
        if let Some(v) = self.fraction {
            c.fraction = v;
        }
        if let Some(v) = &self.variant {
            c.variant = v.parse()?;
        }
        if let Some(v) = self.cpv {
            c.cpv = v;
        }
        if let Some(v) = self.epochs {
            c.epochs = v;
        }
        if self.long_run {
            c.set_long_run();
        }
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = &self.out {
            c.out = v.clone();
        }
        c.validate()?;
        Ok(c)
    }
}

/// Resolves the config, writes the manifest and runs the command.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>> {
    let config = cli.command.args().resolve()?;
    let name = cli.command.name();
    config.write_manifest(name)?;
    let written = match &cli.command {
        Command::Generate(_) => cmd_generate(&config),
        Command::Train(_) => cmd_train(&config),
        Command::Evaluate(_) => cmd_evaluate(&config),
        Command::Ablate(_) => cmd_ablate(&config),
        Command::Baseline(_) => cmd_baseline(&config),
        Command::Report(_) => cmd_report(&config),
    }?;
    Ok(written)
}

/// Parses `args` and runs; errors go to standard error with exit code 1.
pub fn main<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("chemtab {}: {e}", cli.command.name());
            ExitCode::FAILURE
        }
    }
}
