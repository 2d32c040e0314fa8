//! `offload run <experiment>`: reproduce a table or figure as CSV.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mmwave_offload::experiments::{run_and_write, validate_config, ExperimentError, ExperimentId, Overrides};

#[derive(Parser)]
#[command(name = "offload", version, about = "Power-optimal mmWave offloading experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and print or write its CSV.
    Run {
        /// table1, table2, fig3 ... fig11
        experiment: String,
        /// TOML file with parameter overrides.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<u64>,
        /// Write the CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Use full-scale trial counts.
        #[arg(long)]
        full: bool,
        /// Worker threads (output does not depend on this).
        #[arg(long)]
        workers: Option<usize>,
    },
}

fn run(cmd: Command) -> Result<(), ExperimentError> {
    let Command::Run { experiment, config, seed, trials, out, full, workers } = cmd;
    let id: ExperimentId = experiment.parse()?;
    let raw = match &config {
        Some(path) => std::fs::read_to_string(path)
            .map_err(|e| ExperimentError::Config(mmwave_offload::experiments::ConfigError::single("config", format!("{}: {e}", path.display()))))?,
        None => String::new(),
    };
    let cfg = validate_config(&raw, Some(id), &Overrides { seed, trials, workers, out, full })?;
    let text = run_and_write(&cfg)?;
    if cfg.out.is_none() {
        print!("{text}");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("offload: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
