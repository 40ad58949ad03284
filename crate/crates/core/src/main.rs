use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use negsim::scenario::{
    check_scenario, delta_star_for, load_config, run_scenario, sweep, SweepGrid, PRESET_NAMES,
};
use negsim::Error;

/// Simulator and verifier for distributed Nash equilibrium seeking in
/// aggregative games over switching communication graphs.
#[derive(Parser)]
#[command(name = "negsim", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario end to end; writes assumptions.json, report.json and
    /// trajectory.csv into the output directory
    Run {
        /// Config file path or preset name
        config: String,
        /// Output directory (overrides config and NEGSIM_OUT)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Validate the game and communication assumptions only
    Check {
        config: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the sufficient gain bound and the quantities it was derived from
    DeltaStar { config: String },
    /// Run a parameter grid; one isolated sub-run per grid point plus a
    /// summary CSV
    Sweep {
        config: String,
        /// Grid JSON with optional arrays: delta, alpha, beta, segment_len
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List built-in scenario presets
    Presets,
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Run { config, out } => {
            let cfg = load_config(&config)?;
            let outcome = run_scenario(cfg, out.as_deref())?;
            for check in &outcome.report.convergence.checks {
                println!(
                    "[{}] {}: {:.3e} (threshold {:.3e})",
                    if check.pass { "PASS" } else { "FAIL" },
                    check.name,
                    check.value,
                    check.threshold
                );
            }
            println!(
                "delta = {:.6} (delta* = {:.6}), artifacts in {}",
                outcome.report.delta,
                outcome.report.delta_star,
                outcome.out_dir.display()
            );
            Ok(if outcome.pass { 0 } else { 1 })
        }
        Command::Check { config, out } => {
            let cfg = load_config(&config)?;
            let report = check_scenario(cfg, out.as_deref())?;
            println!("{}", serde_json::to_string_pretty(&report).map_err(Error::from)?);
            Ok(0)
        }
        Command::DeltaStar { config } => {
            let cfg = load_config(&config)?;
            let bound = delta_star_for(cfg)?;
            println!("{}", serde_json::to_string_pretty(&bound).map_err(Error::from)?);
            Ok(0)
        }
        Command::Sweep { config, grid, out } => {
            let cfg = load_config(&config)?;
            let text = std::fs::read_to_string(&grid)?;
            let grid: SweepGrid = serde_json::from_str(&text)
                .map_err(|e| Error::Schema(format!("{}: {e}", grid.display())))?;
            let outcome = sweep(cfg, &grid, out.as_deref())?;
            println!(
                "{} runs, summary at {}",
                outcome.runs,
                outcome.summary_path.display()
            );
            Ok(0)
        }
        Command::Presets => {
            for name in PRESET_NAMES {
                println!("{name}");
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
