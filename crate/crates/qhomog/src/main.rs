use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qhomog::commands::{self, Options};

#[derive(Parser)]
#[command(
    name = "qhomog",
    version,
    about = "Colored-noise stochastic Schrodinger experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a config and its model without running anything.
    Validate(Common),
    /// Run one ensemble in the configured regime.
    Run(Common),
    /// Sweep the colored-noise correlation time at fixed diffusion.
    Sweep(Common),
    /// Run several regimes on shared seeds and compare them.
    Compare(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `ensemble.master_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Caps the number of worker threads.
    #[arg(long)]
    workers: Option<usize>,
}

impl From<Common> for Options {
    fn from(c: Common) -> Self {
        Options {
            config: c.config,
            out: c.out,
            seed: c.seed,
            workers: c.workers,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut stdout = std::io::stdout();
    let outcome = match cli.command {
        Command::Validate(c) => commands::cmd_validate(&c.into(), &mut stdout).map(|_| ()),
        Command::Run(c) => commands::cmd_run(&c.into(), &mut stdout).map(|_| ()),
        Command::Sweep(c) => commands::cmd_sweep(&c.into(), &mut stdout).map(|_| ()),
        Command::Compare(c) => commands::cmd_compare(&c.into(), &mut stdout).map(|_| ()),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qhomog: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
