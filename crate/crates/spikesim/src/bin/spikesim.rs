//! Command-line front end: run experiments, compare schemes, sweep errors,
//! classify spike trains, and benchmark configs.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use spikesim::harness::{
    load_config, read_spikes_csv, run_comparison, run_error_sweep, run_experiment, write_output,
    DEFAULT_MAX_PERIOD,
};
use spikesim::integrate::{SpikeTrain, Termination};
use spikesim::spiketrain::{
    classify_pattern, default_tolerance, default_transient_skip, reset_histogram, reset_sequence,
};
use spikesim::Result;

#[derive(Parser)]
#[command(
    name = "spikesim",
    version,
    about = "Hybrid time/phase-plane solvers for adaptive spiking neuron models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment config, write its files, print the report.
    Simulate { config: PathBuf },
    /// Run several configs on the same problem and tabulate them against the
    /// oracle row (or the first row when no oracle is configured).
    Compare {
        #[arg(required = true, num_args = 2..)]
        configs: Vec<PathBuf>,
        /// Comparison CSV path.
        #[arg(long, default_value = "comparison.csv")]
        out: PathBuf,
    },
    /// Sweep first-spike errors of the configured scheme over cutoff and
    /// resolution grids.
    ErrorSweep {
        config: PathBuf,
        /// Resolutions (dt, dv or epsilon per the scheme), comma-separated.
        #[arg(long, value_delimiter = ',', required = true)]
        taus: Vec<f64>,
        /// Cutoffs, comma-separated.
        #[arg(long, value_delimiter = ',', required = true)]
        thetas: Vec<f64>,
        /// Sweep CSV path.
        #[arg(long, default_value = "error_sweep.csv")]
        out: PathBuf,
    },
    /// Classify the firing pattern recorded in a spike CSV.
    Classify {
        spikes: PathBuf,
        /// Periodicity tolerance; defaults to 2% of the reset-value range.
        #[arg(long)]
        tol: Option<f64>,
        /// Spikes to drop as transient; defaults to max(10, 20%).
        #[arg(long)]
        skip: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_MAX_PERIOD)]
        max_period: u32,
        /// Also write a reset-value histogram CSV here.
        #[arg(long)]
        histogram: Option<PathBuf>,
        /// Histogram bins.
        #[arg(long, default_value_t = 20)]
        bins: usize,
    },
    /// Time a config (median of its repeat runs) and print the report.
    Bench { config: PathBuf },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Simulate { config } | Command::Bench { config } => {
            let config = load_config(&config)?;
            let report = run_experiment(&config)?;
            println!(
                "{}",
                serde_json::to_string_pretty(&report).expect("report serializes")
            );
            Ok(())
        }
        Command::Compare { configs, out } => {
            let configs = configs
                .iter()
                .map(|p| load_config(p))
                .collect::<Result<Vec<_>>>()?;
            let rows = run_comparison(&configs, Some(&out))?;
            println!(
                "{}",
                serde_json::to_string_pretty(&rows).expect("rows serialize")
            );
            Ok(())
        }
        Command::ErrorSweep {
            config,
            taus,
            thetas,
            out,
        } => {
            let base = load_config(&config)?;
            let rows = run_error_sweep(&base, &taus, &thetas, Some(&out))?;
            println!(
                "{}",
                serde_json::to_string_pretty(&rows).expect("rows serialize")
            );
            Ok(())
        }
        Command::Classify {
            spikes,
            tol,
            skip,
            max_period,
            histogram,
            bins,
        } => {
            let events = read_spikes_csv(&spikes)?;
            let train = SpikeTrain {
                events,
                step_count: 0,
                terminated_by: Termination::Horizon,
            };
            let skip = skip.unwrap_or_else(|| default_transient_skip(train.events.len()));
            let seq = reset_sequence(&train, skip)?;
            let tol = tol.unwrap_or_else(|| default_tolerance(&seq));
            let class = classify_pattern(&seq, tol, max_period)?;
            let summary = serde_json::json!({
                "label": class.label.name(),
                "period": class.period,
                "residual": class.residual,
                "tolerance": tol,
                "transient_skip": skip,
                "events": train.events.len(),
            });
            println!(
                "{}",
                serde_json::to_string_pretty(&summary).expect("summary serializes")
            );
            if let Some(path) = histogram {
                let hist = reset_histogram(&seq, bins)?;
                let mut out = String::from("bin_center,count\n");
                for (center, count) in hist.centered() {
                    let _ = writeln!(out, "{center},{count}");
                }
                write_output(&path, &out)?;
            }
            Ok(())
        }
    }
}
