use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rotsmag::{execute, parse_config, Command, RunError};

#[derive(Parser)]
#[command(name = "rotsmag", version, about = "Rotational Smagorinsky model: time integration, operator checks and weighted-inequality sweeps")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(clap::Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output` in the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for sweeps (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Sub {
    /// Integrate in time and write the energy ledger.
    Simulate(Common),
    /// Estimate the boundedness and coercivity constants.
    Check(Common),
    /// Run an inequality or A_p campaign over a (p, alpha) grid.
    Sweep(Common),
    /// Manufactured-solution spatial study and temporal Richardson study.
    Convergence(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Sub::Simulate(a) => (Command::Simulate, a),
        Sub::Check(a) => (Command::Check, a),
        Sub::Sweep(a) => (Command::Sweep, a),
        Sub::Convergence(a) => (Command::Convergence, a),
    };
    match run(command, &args) {
        Ok(out) => {
            eprintln!("wrote {}", out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("rotsmag {}: {e}", command.name());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(command: Command, args: &Common) -> Result<PathBuf, RunError> {
    let text = std::fs::read_to_string(&args.config)?;
    let mut cfg = parse_config(&text, command)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    let out = args.out.clone().or_else(|| cfg.output.as_ref().map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("rotsmag-out"));
    execute(&cfg, &out, args.threads)?;
    Ok(out)
}
