use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cli::{run, CliError, Command, RunConfig};

#[derive(Parser)]
#[command(name = "podctl", version, about = "Simulation, model reduction and optimal control experiments")]
struct Args {
    #[command(subcommand)]
    command: Cmd,
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding the configuration.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Random seed, overriding the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Forward solves for the reference inputs.
    Simulate,
    /// Eigenvalue decay of snapshot sets.
    Pod,
    /// Reduced-model errors and bounds against the rank.
    Rom,
    /// Full and certified reduced optimal control.
    Control,
    /// Receding-horizon control with and without surrogate updates.
    Mpc,
    /// Pareto front of tracking against control cost.
    Pareto,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Simulate => Command::Simulate,
            Cmd::Pod => Command::Pod,
            Cmd::Rom => Command::Rom,
            Cmd::Control => Command::Control,
            Cmd::Mpc => Command::Mpc,
            Cmd::Pareto => Command::Pareto,
        }
    }
}

fn execute(args: &Args) -> Result<cli::Outcome, CliError> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &args.out {
        cfg.out_dir = out.clone();
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    run(args.command.into(), &cfg)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(outcome) => {
            for f in &outcome.files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("podctl: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
