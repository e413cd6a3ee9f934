use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use heatlmi_cli::{cmd_design, cmd_halanay, cmd_simulate, cmd_sweep, cmd_verify, Overrides, RunConfig};

/// Observer-based boundary control of the 1D heat equation.
///
/// Settings come from `--config` (TOML, or JSON when the name ends in .json), then
/// `HEATLMI_<SECTION>__<KEY>` environment variables, then the flags below.
#[derive(Parser)]
#[command(name = "heatlmi", version)]
struct Cli {
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Sweep workers (0 = all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Seed for jittered sampling.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Design L0 and K0 and write gains.json.
    Design,
    /// Solve the continuous or sampled-data stability LMIs.
    Verify,
    /// Tabulate the largest feasible tau_mu over N and tau_my.
    Sweep,
    /// Simulate the closed loop and fit the decay rate.
    Simulate,
    /// Print the Halanay rate.
    Halanay {
        /// Delay bound (defaults to system.tau_my).
        #[arg(long)]
        h: Option<f64>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let flags = Overrides {
        out: cli.out,
        jobs: cli.jobs,
        seed: cli.seed,
    };
    let result = RunConfig::load(cli.config.as_deref(), std::env::vars(), &flags).and_then(|cfg| {
        match cli.command {
            Command::Design => cmd_design(&cfg),
            Command::Verify => cmd_verify(&cfg),
            Command::Sweep => cmd_sweep(&cfg),
            Command::Simulate => cmd_simulate(&cfg),
            Command::Halanay { h } => cmd_halanay(&cfg, h),
        }
    });
    match result {
        Ok(out) => {
            print!("{}", out.summary);
            ExitCode::from(out.code as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code() as u8)
        }
    }
}
