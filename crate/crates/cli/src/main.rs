//! Command-line driver: single recovery runs, phase-transition grid sweeps,
//! and the statistical check suite.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use erspud_core::metrics::MatchReport;
use erspud_core::phase::{run_grid, run_trial_detailed, samples_for, Algorithm, PhaseConfig, TrialConfig};
use erspud_core::randmodel::{DictKind, ValueDist};
use erspud_core::theory::{run_check, CHECK_NAMES};

#[derive(Parser)]
#[command(
    name = "erspud",
    version,
    about = "Dictionary recovery via sequences of l1-minimizing linear programs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one seeded recovery trial and print a JSON result line.
    Run {
        /// JSON file with the run configuration.
        #[arg(long)]
        config: PathBuf,
    },
    /// Sweep a phase-transition grid and write grid.csv, summary.csv,
    /// phase.pgm and meta.json into the configured output directory.
    Phase {
        /// JSON file with the grid configuration.
        #[arg(long)]
        config: PathBuf,
    },
    /// Run statistical checks; prints one JSON report per check. Exits
    /// nonzero if any check fails.
    Theory {
        /// Check name; all checks run when omitted.
        #[arg(long)]
        check: Option<String>,
        /// Inline JSON parameter overrides, e.g. '{"trials": 100}'.
        #[arg(long)]
        params: Option<String>,
        /// JSON file with parameter overrides (alternative to --params).
        #[arg(long)]
        params_file: Option<PathBuf>,
    },
}

/// Single-run configuration; `p` falls back to `ceil(p_rule * n * ln n)`.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunConfig {
    n: usize,
    k: usize,
    #[serde(default)]
    p: Option<usize>,
    #[serde(default = "default_p_rule")]
    p_rule: f64,
    algorithm: Algorithm,
    #[serde(default)]
    dict_kind: DictKind,
    #[serde(default)]
    dist: ValueDist,
    #[serde(default = "default_true")]
    precondition: bool,
    #[serde(default)]
    proj_cols_per_round: Option<usize>,
    seed: u64,
    #[serde(default = "default_success_threshold")]
    success_threshold: f64,
}

fn default_p_rule() -> f64 {
    5.0
}
fn default_true() -> bool {
    true
}
fn default_success_threshold() -> f64 {
    1e-4
}

#[derive(Serialize)]
struct RunOutput {
    n: usize,
    k: usize,
    p: usize,
    algorithm: Algorithm,
    seed: u64,
    rel_error: f64,
    success: bool,
    /// Full permutation-scale match against the true dictionary.
    matching: MatchReport,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config } => {
            let text = std::fs::read_to_string(&config)
                .with_context(|| format!("reading {}", config.display()))?;
            let cfg: RunConfig = serde_json::from_str(&text)
                .with_context(|| format!("parsing {}", config.display()))?;
            let p = cfg.p.unwrap_or_else(|| samples_for(cfg.n, cfg.p_rule));
            let trial = TrialConfig {
                n: cfg.n,
                k: cfg.k,
                p,
                algorithm: cfg.algorithm,
                dict_kind: cfg.dict_kind,
                dist: cfg.dist,
                precondition: cfg.precondition,
                proj_cols_per_round: cfg.proj_cols_per_round,
            };
            let report = run_trial_detailed(&trial, cfg.seed)?;
            let out = RunOutput {
                n: cfg.n,
                k: cfg.k,
                p,
                algorithm: cfg.algorithm,
                seed: cfg.seed,
                rel_error: report.rel_error,
                success: report.rel_error < cfg.success_threshold,
                matching: report,
            };
            println!("{}", serde_json::to_string(&out)?);
        }
        Command::Phase { config } => {
            let text = std::fs::read_to_string(&config)
                .with_context(|| format!("reading {}", config.display()))?;
            let cfg: PhaseConfig = serde_json::from_str(&text)
                .with_context(|| format!("parsing {}", config.display()))?;
            let cells = run_grid(&cfg)?;
            eprintln!(
                "wrote {} cells ({} trials each) to {}",
                cells.len(),
                cfg.trials,
                cfg.output_dir.display()
            );
        }
        Command::Theory { check, params, params_file } => {
            let overrides = match (params, params_file) {
                (Some(_), Some(_)) => bail!("use either --params or --params-file, not both"),
                (Some(inline), None) => Some(inline),
                (None, Some(path)) => Some(
                    std::fs::read_to_string(&path)
                        .with_context(|| format!("reading {}", path.display()))?,
                ),
                (None, None) => None,
            };
            if overrides.is_some() && check.is_none() {
                bail!("parameter overrides require --check");
            }
            let names: Vec<&str> = match &check {
                Some(name) => {
                    if !CHECK_NAMES.contains(&name.as_str()) {
                        bail!("unknown check `{name}`; available: {}", CHECK_NAMES.join(", "));
                    }
                    vec![name.as_str()]
                }
                None => CHECK_NAMES.to_vec(),
            };
            let mut all_pass = true;
            for name in names {
                let report = run_check(name, overrides.as_deref())?;
                all_pass &= report.pass;
                println!("{}", serde_json::to_string(&report)?);
            }
            if !all_pass {
                std::process::exit(1);
            }
        }
    }
    Ok(())
}
