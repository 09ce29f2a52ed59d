use std::path::PathBuf;

use clap::{Parser, Subcommand};
use tfpack_cli::{compare_runs, run_experiment, RunOptions};

#[derive(Parser)]
#[command(name = "tfpack", version, about = "Time-frequency packing experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file.
    Run {
        config: PathBuf,
        /// Use the full Monte Carlo profile instead of the desk one.
        #[arg(long)]
        full: bool,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Spectral efficiency gain of a candidate run over a baseline run.
    Compare {
        baseline: PathBuf,
        candidate: PathBuf,
        /// Compare only the per-SNR best curve of each run.
        #[arg(long)]
        envelope: bool,
    },
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Run { config, full, seed, out } => {
            let summary = run_experiment(&config, &RunOptions { full, seed, out })?;
            for f in &summary.manifest.files {
                println!("{}/{} ({} rows)", summary.out_dir.display(), f.name, f.rows);
            }
            println!("config hash {}", summary.manifest.config_hash);
        }
        Command::Compare {
            baseline,
            candidate,
            envelope,
        } => compare_runs(&baseline, &candidate, envelope)?.write_csv(std::io::stdout().lock())?,
    }
    Ok(())
}
