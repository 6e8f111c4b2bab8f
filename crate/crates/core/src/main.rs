use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};

use switchpred::harness::{self, reference, ConfigFile, Scenario};
use switchpred::margins::{rate_pipeline, MarginConstants, Mismatch};
use switchpred::Error;

#[derive(Parser)]
#[command(
    name = "switchpred",
    version,
    about = "Predictor feedback for delayed switched linear systems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MismatchLevel {
    /// Zero-mismatch limit.
    Zero,
    /// The design's own eps and eps_bar.
    Actual,
}

#[derive(Subcommand)]
enum Command {
    /// Run one closed loop; prints a JSON summary and writes the trajectory CSV.
    Simulate {
        config: PathBuf,
        /// Trajectory CSV (overrides `run.output`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the summary JSON here.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Synthesize gains, certificates and representative matrices.
    Design {
        config: PathBuf,
        /// Write the design as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Evaluate the stability margins of the configured design.
    Margins {
        config: PathBuf,
        #[arg(long, value_enum, default_value = "zero")]
        eps_used: MismatchLevel,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Run with and without dwell-time knowledge on one realization.
    Ablate { config: PathBuf },
    /// Perturb the delay assumed by the controller.
    Sweep {
        config: PathBuf,
        /// Relative perturbations, comma separated.
        #[arg(
            long,
            value_delimiter = ',',
            allow_hyphen_values = true,
            required = true
        )]
        deltas: Vec<f64>,
    },
    /// Rebuild the three-mode reference example and check it.
    #[command(name = "reproduce-paper")]
    Reproduce {
        #[arg(long, default_value_t = 5)]
        seeds: usize,
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

const EXIT_CONFIG: u8 = 2;
const EXIT_CHECK_FAILED: u8 = 3;

fn load(path: &Path) -> anyhow::Result<Scenario> {
    let cfg = ConfigFile::load(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(Scenario::from_config(&cfg)?)
}

fn write(path: &Option<PathBuf>, text: &str) -> anyhow::Result<()> {
    if let Some(p) = path {
        std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn execute(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Simulate {
            config,
            out,
            summary,
        } => {
            let mut sc = load(&config)?;
            if out.is_some() {
                sc.output = out;
            }
            let (s, _) = harness::run(&sc)?;
            let json = serde_json::to_string_pretty(&s)?;
            println!("{json}");
            write(&summary, &json)?;
        }
        Command::Design { config, json } => {
            let sc = load(&config)?;
            print!("{}", sc.design.report());
            write(&json, &sc.design.to_json())?;
        }
        Command::Margins {
            config,
            eps_used,
            json,
        } => {
            let sc = load(&config)?;
            let consts = MarginConstants::from_design(&sc.plant, &sc.design)?;
            let used = match eps_used {
                MismatchLevel::Zero => Mismatch::zero(),
                MismatchLevel::Actual => Mismatch::actual(&sc.design),
            };
            let report = rate_pipeline(
                &sc.design,
                &consts,
                used,
                sc.dwell.tau_d,
                sc.dwell.tau_bar_d,
            )?;
            print!("{}", report.text());
            write(&json, &report.to_json())?;
        }
        Command::Ablate { config } => {
            let sc = load(&config)?;
            let (with, without) = harness::ablate_dwell(&sc)?;
            println!(
                "{}",
                serde_json::to_string_pretty(
                    &serde_json::json!({ "with_dwell": with, "without_dwell": without })
                )?
            );
        }
        Command::Sweep { config, deltas } => {
            let sc = load(&config)?;
            let rows = harness::mismatch_sweep(&sc, &deltas)?;
            println!(
                "{:>8} {:>10} {:>11} {:>12} {:>7}",
                "delta", "delay", "snap", "J", "stable"
            );
            for r in &rows {
                println!(
                    "{:>8.3} {:>10.4} {:>11.2e} {:>12.2} {:>7}",
                    r.delta, r.controller_delay, r.snap_error, r.summary.cost, r.summary.stable
                );
            }
        }
        Command::Reproduce { seeds, json } => {
            let report = reference::reproduce(seeds)?;
            print!("{}", report.text());
            write(&json, &serde_json::to_string_pretty(&report)?)?;
            return Ok(report.all_pass());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_CHECK_FAILED),
        Err(e) => {
            eprintln!("error: {e:#}");
            let config_error = e.chain().any(|c| {
                matches!(
                    c.downcast_ref::<Error>(),
                    Some(
                        Error::Config(_)
                            | Error::OffGrid { .. }
                            | Error::Dimension(_)
                            | Error::InvalidDwell(_)
                            | Error::Io(_)
                    )
                )
            });
            ExitCode::from(if config_error { EXIT_CONFIG } else { 1 })
        }
    }
}
