use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use matchange::commands::{cmd_render, cmd_simulate, cmd_sweep, Overrides};

#[derive(Parser)]
#[command(name = "matchange", version, about = "Material change detection in simulated SLC radar pairs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sampled Monte Carlo campaign.
    Simulate(RunArgs),
    /// Run the one-factor sweep described in the config.
    Sweep(RunArgs),
    /// Export ROC/PR points and greyscale maps of a trial directory.
    Render {
        trial_dir: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    /// Campaign seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated detector names.
    #[arg(long, value_delimiter = ',')]
    detectors: Option<Vec<String>>,
}

impl RunArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            out: self.out.clone(),
            workers: self.workers,
            seed: self.seed,
            detectors: self.detectors.clone(),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let code = match &cli.command {
        Command::Simulate(a) => cmd_simulate(&a.config, &a.overrides()),
        Command::Sweep(a) => cmd_sweep(&a.config, &a.overrides()),
        Command::Render { trial_dir, out } => cmd_render(trial_dir, out.as_deref()),
    };
    ExitCode::from(code as u8)
}
