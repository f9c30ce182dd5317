use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use stable_fields_cli::run::{run, RunOptions};
use stable_fields_cli::{report, CliError};

/// Simulation and verification of symmetric alpha-stable random fields.
#[derive(Parser)]
#[command(name = "stable-fields", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON configuration.
    Run {
        config: PathBuf,
        /// Output directory (overrides the configuration and STABLE_FIELDS_OUTPUT).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads, 0 for all cores.
        #[arg(long)]
        threads: Option<usize>,
        /// Seed override.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Tabulate predicted against fitted values over a directory of runs.
    Report {
        dir: PathBuf,
        /// Where to write report.md and report.svg (default: DIR).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run {
            config,
            out,
            threads,
            seed,
        } => {
            let outcome = run(&config, &RunOptions { out, threads, seed })?;
            if let Some(r) = &outcome.report {
                let fitted = r.fitted.map_or("n/a".to_string(), |f| format!("{f:.4}"));
                println!(
                    "{} | {} | predicted {:.4} | fitted {fitted} | {}",
                    r.model,
                    r.theorem,
                    r.predicted,
                    if r.verdict.passed() { "pass" } else { "fail" }
                );
            }
            println!("wrote {} files to {}", outcome.manifest.outputs.len(), outcome.directory.display());
        }
        Command::Report { dir, out } => {
            let dest = out.unwrap_or_else(|| dir.clone());
            report::report(&dir, &dest)?;
            println!("wrote {}", dest.join("report.md").display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
