//! `twostate run <config> --out <dir>` and `twostate validate <config>`.
//!
//! Exit codes: 0 when every assertion passes, 2 when some assertion
//! fails, 1 on configuration or runtime errors.

mod config;
mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde_json::Value;
use twostate::scenarios::{
    collapse_detector, custom_query, epr_scenario, repeated_measurements, spin_intermediate,
    ScenarioResult,
};

use config::{Kind, ScenarioConfig};

#[derive(Parser)]
#[command(
    name = "twostate",
    version,
    about = "Run two-state scenarios and write reports"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a scenario and write result.json and summary.txt.
    Run {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
        /// Override a config value, e.g. `--set params.n=40`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
    },
    /// Check schema and physics preconditions without running.
    Validate { config: PathBuf },
}

fn load(
    path: &Path,
    seed: Option<u64>,
    trials: Option<usize>,
    sets: &[String],
) -> Result<ScenarioConfig> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut raw: Value =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    config::apply_overrides(&mut raw, seed, trials, sets)?;
    Ok(config::parse(raw)?)
}

fn execute(cfg: &ScenarioConfig) -> twostate::Result<ScenarioResult> {
    match &cfg.kind {
        Kind::Epr { n1, n2, s1 } => epr_scenario(*n1, *n2, *s1),
        Kind::Collapse(c) => collapse_detector(c),
        Kind::Repeated(r) => repeated_measurements(r),
        Kind::Spin(s) => spin_intermediate(s),
        Kind::Custom { pre, post, op } => custom_query(pre, post, op),
    }
}

fn run(
    config: &Path,
    out: &Path,
    seed: Option<u64>,
    trials: Option<usize>,
    sets: &[String],
) -> Result<bool> {
    let cfg = load(config, seed, trials, sets)?;
    let mut result = execute(&cfg).context("running scenario")?;
    report::apply_tolerances(&mut result, &cfg.tolerances);
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let json = report::to_json(&result, &cfg.raw, cfg.seed)?;
    let result_path = out.join("result.json");
    std::fs::write(&result_path, &json)
        .with_context(|| format!("writing {}", result_path.display()))?;
    let written: Value = serde_json::from_str(&std::fs::read_to_string(&result_path)?)?;
    let summary = report::summary(&written);
    std::fs::write(out.join("summary.txt"), &summary).context("writing summary.txt")?;
    print!("{summary}");
    Ok(result.all_pass())
}

fn main() -> ExitCode {
    env_logger::Builder::new()
        .filter_level(log::LevelFilter::Warn)
        .init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run {
            config,
            out,
            seed,
            trials,
            sets,
        } => run(config, out, *seed, *trials, sets),
        Command::Validate { config } => load(config, None, None, &[]).map(|_| {
            println!("{}: ok", config.display());
            true
        }),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
