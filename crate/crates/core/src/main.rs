use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sam_balance::error::Result;
use sam_balance::harness::{self, csv, RunConfig, SweepAxis, SweepConfig};
use sam_balance::verification;

/// Balancedness experiments for SGD, SAM and BAR on scale-invariant problems.
#[derive(Parser)]
#[command(name = "sam-balance", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one config and write its trajectory CSV.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output CSV. Defaults to `$SAM_BALANCE_OUT/run.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Vary one field of a config and write one CSV per value plus summary.csv.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// snr_alpha, rho, eta, m, alpha0 or seed.
        #[arg(long)]
        axis: String,
        /// Comma-separated values.
        #[arg(long)]
        values: String,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run members one after another instead of concurrently.
        #[arg(long)]
        sequential: bool,
    },
    /// Run a built-in preset: fig1a, fig1b, fig2a, fig2b, msharp, multilayer, saddle.
    Preset {
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run verification suites and print one line per check.
    Verify {
        /// all, gradients, identities, dynamics, snr, saddle or calibration.
        #[arg(long, default_value = "all")]
        suite: String,
    },
}

fn default_out() -> PathBuf {
    std::env::var_os("SAM_BALANCE_OUT").map(PathBuf::from).unwrap_or_else(|| PathBuf::from("out"))
}

/// Ok(true) when everything succeeded, Ok(false) on a check or run failure.
fn execute(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { config, out, seed } => {
            let mut config = RunConfig::load(&config)?;
            if let Some(s) = seed {
                config.seed = s;
            }
            let run = harness::run_experiment(&config)?;
            let out = out.unwrap_or_else(|| default_out().join("run.csv"));
            csv::write_atomic(&out, &csv::to_csv(&run.records))?;
            println!("wrote {} rows to {}", run.records.len(), out.display());
            Ok(true)
        }
        Command::Sweep { config, axis, values, out, sequential } => {
            let base = RunConfig::load(&config)?;
            let axis: SweepAxis = axis.parse()?;
            let sweep = SweepConfig::new(base, axis, &values)?;
            let members = harness::run_sweep(&sweep, !sequential);
            let out = out.unwrap_or_else(|| default_out().join(format!("sweep_{}", axis.name())));
            let failed = harness::write_sweep(&out, &sweep, &members)?;
            for m in &members {
                if let Err(e) = &m.result {
                    eprintln!("{}={}: {e}", axis.name(), m.value.label());
                }
            }
            println!("wrote {} runs to {} ({failed} failed)", members.len(), out.display());
            Ok(failed == 0)
        }
        Command::Preset { name, out } => {
            harness::preset(&name)?;
            let out = out.unwrap_or_else(|| default_out().join(&name));
            let files = harness::run_preset(&name, &out, true)?;
            println!("wrote {} to {}", files.join(", "), out.display());
            Ok(true)
        }
        Command::Verify { suite } => {
            let reports = verification::run_suite(&suite)?;
            for r in &reports {
                println!("{r}");
            }
            Ok(reports.iter().all(|r| r.passed))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 1 })
        }
    }
}
