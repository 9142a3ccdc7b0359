use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use maxreg_lab::{exit_status, resolve, run, Overrides};

#[derive(Parser)]
#[command(name = "maxreg-lab", version, about = "Run maxreg-core experiments from a config file")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment, or all of them.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (default `results`).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        experiment: Option<String>,
    },
}

fn main() -> ExitCode {
    let Command::Run { config, out, seed, experiment } = Cli::parse().command;
    let overrides = Overrides { out, seed, experiment };
    let result = resolve(&config, &overrides).and_then(|cfg| run(&cfg, &mut std::io::stdout()));
    let code = match result {
        Ok(outcomes) => exit_status(&outcomes),
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
