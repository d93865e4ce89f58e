//! `smoothalm` binary: a thin argument parser over the shared command
//! implementations in `smoothalm_cli::commands`.

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use smoothalm::diagnostics::DEFAULT_INNER_TOL;
use smoothalm_cli::commands::{cmd_gen, cmd_run, cmd_summarize, cmd_verify, verify_report_path};
use smoothalm_cli::config::{ExperimentConfig, Overrides};

#[derive(Parser)]
#[command(
    name = "smoothalm",
    about = "Experiment harness for the smoothed proximal ALM/ADMM solver toolkit",
    version
)]
struct Cli {
    /// Experiment config file (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the base seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the artifact directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Comparison tolerance for `verify` (default 1e-8).
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Override the β sweep (comma separated).
    #[arg(long, global = true, value_delimiter = ',')]
    beta: Option<Vec<f64>>,
    /// Evaluate the merit function along traces.
    #[arg(long, global = true)]
    phi: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the per-trial instance files.
    Gen,
    /// Run the (trial × β) sweep and write one trace CSV per run.
    Run,
    /// Re-run each trajectory and check the inequality suite on sampled pairs.
    Verify,
    /// Aggregate traces into quantile curves and convergence-rate fits.
    Summarize {
        /// Slope-fit window over iterations, as `t_lo,t_hi`.
        #[arg(long, value_delimiter = ',', num_args = 1..=2, default_values_t = [100.0, 10000.0])]
        window: Vec<f64>,
    },
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let config_path = cli.config.context("--config <path.json> is required")?;
    let overrides = Overrides {
        seed: cli.seed,
        out: cli.out,
        betas: cli.beta,
        phi: cli.phi,
    };
    let cfg = overrides.apply(ExperimentConfig::load(&config_path)?)?;
    match cli.command {
        Command::Gen => {
            let paths = cmd_gen(&cfg)?;
            println!(
                "wrote {} instance files under {}",
                paths.len(),
                cfg.output.display()
            );
        }
        Command::Run => {
            let artifacts = cmd_run(&cfg)?;
            for a in &artifacts {
                let last = a.result.trace.last().expect("nonempty trace");
                println!(
                    "trial {:03} beta {}: {} iterations, final gap {:.3e}{} -> {}",
                    a.trial,
                    a.beta,
                    a.result.final_state.t,
                    last.gap,
                    if a.result.stopped_early {
                        " (early stop)"
                    } else {
                        ""
                    },
                    a.path.display()
                );
            }
        }
        Command::Verify => {
            let report = cmd_verify(&cfg, cli.tol.unwrap_or(DEFAULT_INNER_TOL))?;
            for run in &report.runs {
                println!(
                    "trial {:03} beta {} ({} iterations):",
                    run.trial, run.beta, run.iterations
                );
                for agg in &run.aggregates {
                    let worst = agg
                        .worst_margin
                        .map(|m| format!(", worst margin {m:.3e}"))
                        .unwrap_or_default();
                    println!(
                        "  {:<22} {:>4}/{:<4} pass rate {:.3}{}",
                        agg.name, agg.passes, agg.samples, agg.pass_rate, worst
                    );
                }
                for e in &run.errors {
                    eprintln!("  error: {e}");
                }
            }
            println!("report: {}", verify_report_path(&cfg.output).display());
        }
        Command::Summarize { window } => {
            let (lo, hi) = match window.as_slice() {
                [lo, hi] => (*lo, *hi),
                [hi] => (100.0, *hi),
                _ => (100.0, 10000.0),
            };
            let table = cmd_summarize(&cfg.output, (lo, hi))?;
            for r in &table.slope_rows {
                match r.slope {
                    Some(s) => println!(
                        "beta {}: slope {:.4} over [{}, {}] ({} points)",
                        r.beta, s, r.t_lo, r.t_hi, r.points
                    ),
                    None => println!(
                        "beta {}: no usable points in [{}, {}]",
                        r.beta, r.t_lo, r.t_hi
                    ),
                }
            }
            println!(
                "tables: {} and {}",
                table.summary_path.display(),
                table.slopes_path.display()
            );
        }
    }
    Ok(())
}
