use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pbl::pipeline::{
    cmd_evaluate, cmd_pretrain, cmd_report, cmd_tune, init_example, ExperimentConfig, InitOptions,
};
use pbl::{Error, Result};

/// Soft-prompt tuning of a small frozen language model and group-fairness
/// gap reports.
#[derive(Parser)]
#[command(name = "pbl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train (or import) the frozen model and vocabulary.
    Pretrain(RunArgs),
    /// Sweep prompt seeds and keep the top-k prompts.
    Tune(RunArgs),
    /// Classify the task test split and the template corpus.
    Evaluate(RunArgs),
    /// Write the gap report, net counts and charts.
    Report(RunArgs),
    /// Write an example experiment on generated data.
    Init {
        #[arg(long)]
        output_dir: PathBuf,
        /// Seconds-scale sizes instead of the desk-scale default.
        #[arg(long)]
        tiny: bool,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `output_dir` from the config.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Overrides the root seed from the config.
    #[arg(long)]
    seed: Option<u64>,
}

impl RunArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(dir) = &self.output_dir {
            cfg.output_dir = std::path::absolute(dir).map_err(|e| Error::io(dir, e))?;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Pretrain(a) => cmd_pretrain(&a.load()?).map(drop),
        Command::Tune(a) => cmd_tune(&a.load()?).map(drop),
        Command::Evaluate(a) => cmd_evaluate(&a.load()?).map(drop),
        Command::Report(a) => cmd_report(&a.load()?).map(drop),
        Command::Init { output_dir, tiny } => {
            let opts = if tiny { InitOptions::tiny() } else { InitOptions::desk() };
            init_example(&output_dir, &opts)?;
            println!("wrote {}", output_dir.join("experiment.toml").display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
