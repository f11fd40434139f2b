use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fdrt_cli::commands;
use fdrt_cli::{CliResult, Context};

#[derive(Parser)]
#[command(name = "fdrt", version, about = "Frequency-domain transport tomography experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment configuration (JSON); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config's output_dir).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Base seed (overrides the config's seed).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 picks the number of cores.
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Subcommand)]
enum Cmd {
    /// Synthesize boundary data and its components for every frequency.
    Synth(Common),
    /// Direct band-limited reconstruction from one sinogram.
    Invert {
        #[command(flatten)]
        common: Common,
        /// Sinogram file (HRTS).
        input: PathBuf,
    },
    /// Fixed-point refinement of the direct reconstruction.
    Iterate {
        #[command(flatten)]
        common: Common,
        input: PathBuf,
    },
    /// Error scaling over the frequency and bandwidth lists.
    Sweep(Common),
    /// Check the oscillatory-phase bounds and rates.
    Verify(Common),
}

fn run(cli: Cli) -> CliResult<bool> {
    let (common, input) = match &cli.cmd {
        Cmd::Synth(c) | Cmd::Sweep(c) | Cmd::Verify(c) => (c.clone(), None),
        Cmd::Invert { common, input } | Cmd::Iterate { common, input } => (common.clone(), Some(input.clone())),
    };
    fdrt_core::exec::init_threads(common.threads);
    let ctx = Context::new(common.config.as_deref(), common.out.as_deref(), common.seed)?;
    match cli.cmd {
        Cmd::Synth(_) => commands::synth(&ctx).map(|_| true),
        Cmd::Invert { .. } => commands::invert(&ctx, input.as_deref().unwrap()).map(|_| true),
        Cmd::Iterate { .. } => commands::iterate_cmd(&ctx, input.as_deref().unwrap()).map(|_| true),
        Cmd::Sweep(_) => commands::sweep(&ctx).map(|_| true),
        Cmd::Verify(_) => commands::verify_cmd(&ctx),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("fdrt: verification failed; see verify_report.json");
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("fdrt: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
