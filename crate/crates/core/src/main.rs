use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sadbc::io::{run_oracle, run_region, run_verify, Exit, OracleArgs, RunArgs};

/// Secrecy capacity region solver for aligned degraded broadcast channels.
#[derive(Parser)]
#[command(name = "sadbc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Trace the region boundary; writes boundary.csv, certificates.json, plot.gp.
    Region {
        spec: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve each mu > 1 and certify the enhanced channel; writes verification.json.
    Verify {
        spec: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Brute-force grid over diagonal splits (t = 1 or diagonal t = 2) against the traced boundary.
    Oracle {
        spec: PathBuf,
        #[arg(long)]
        step: f64,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { Exit::InputError as u8 } else { Exit::Success as u8 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Region { spec, config, seed, out } => run_region(&RunArgs { spec, config, seed, out }),
        Command::Verify { spec, config, seed, out } => run_verify(&RunArgs { spec, config, seed, out }),
        Command::Oracle { spec, step, seed, out } => run_oracle(&OracleArgs { spec, step, seed, out }),
    };
    match result {
        Ok(exit) => ExitCode::from(exit as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(Exit::InputError as u8)
        }
    }
}
