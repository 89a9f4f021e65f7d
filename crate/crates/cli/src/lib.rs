//! Scenario runner for the `occupied` library.
//!
//! A run reads one TOML config, executes its job and writes a JSON summary
//! plus CSV tables into the output directory. Reports depend only on the
//! effective config and seed, never on the number of worker threads.

pub mod config;
pub mod report;
pub mod scenarios;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::config::{read_header, JobKind, Overrides};
use crate::report::RunOutput;
use crate::scenarios::{catalog, find, Family};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "OCCUPIED_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "occupied-out";

/// Exit code of a verify job whose assertions failed.
pub const EXIT_VERIFY_FAILED: u8 = 2;
pub const EXIT_ERROR: u8 = 1;

#[derive(Debug, Parser)]
#[command(name = "occupied", version, about = "Simulate, price and verify occupied-process scenarios")]
pub struct Cli {
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a simulate job.
    Simulate(RunArgs),
    /// Run a price job.
    Price(RunArgs),
    /// Run a verify job; exits with status 2 when an assertion fails.
    Verify(RunArgs),
    /// Run a diagnose job.
    Diagnose(RunArgs),
    /// Run whatever job the config names.
    Run(RunArgs),
    /// List the builtin scenarios.
    List(ListArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Override the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the number of Monte Carlo paths.
    #[arg(long)]
    pub paths: Option<usize>,
    /// Override the time step.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Output directory; falls back to the config, then $OCCUPIED_OUT_DIR.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ListArgs {
    /// Print the catalog with a JSON schema per scenario.
    #[arg(long)]
    pub json: bool,
    /// Print a complete config template for one scenario.
    #[arg(long, value_name = "SCENARIO")]
    pub template: Option<String>,
}

/// Runs a config text in memory. Nothing is written.
pub fn execute_config(text: &str, overrides: &Overrides) -> Result<(RunOutput, Option<PathBuf>)> {
    let (_, scenario) = read_header(text)?;
    find(&scenario)?.execute(text, overrides)
}

/// One catalog entry as listed by `list --json`.
pub fn catalog_json() -> Result<Value> {
    let mut entries = Vec::new();
    for e in catalog() {
        entries.push(json!({
            "name": e.name,
            "family": e.family.as_str(),
            "job": e.job.as_str(),
            "summary": e.summary,
            "schema": e.schema()?,
        }));
    }
    Ok(json!({ "families": Family::ALL.map(Family::as_str), "scenarios": entries }))
}

fn catalog_text() -> String {
    let mut s = String::new();
    for f in Family::ALL {
        s.push_str(f.as_str());
        s.push('\n');
        for e in catalog().iter().filter(|e| e.family == f) {
            s.push_str(&format!("  {:<20} {:<9} {}\n", e.name, e.job.as_str(), e.summary));
        }
    }
    s
}

fn out_dir(args: &RunArgs, from_config: Option<PathBuf>) -> PathBuf {
    args.out
        .clone()
        .or(from_config)
        .or_else(|| std::env::var_os(OUT_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

fn read_config(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))
}

/// Result of a command: what to print and the exit status.
struct Finished {
    stdout: String,
    stderr: Option<String>,
    code: u8,
}

fn run_job(expected: Option<JobKind>, args: &RunArgs) -> Result<Finished> {
    let text = read_config(&args.config)?;
    let (job, scenario) = read_header(&text).with_context(|| format!("in {}", args.config.display()))?;
    if let Some(expected) = expected {
        if job != expected {
            bail!("{} is a {} config; run it with `occupied {}`", args.config.display(), job.as_str(), job.as_str());
        }
    }
    let overrides = Overrides { seed: args.seed, n_paths: args.paths, dt: args.dt, out: args.out.clone() };
    let (output, cfg_dir) =
        find(&scenario)?.execute(&text, &overrides).with_context(|| format!("in {}", args.config.display()))?;
    let dir = out_dir(args, cfg_dir);
    output.write_to(&dir)?;
    let stdout = serde_json::to_string_pretty(&output.summary)? + "\n";
    if output.failed {
        let failure = json!({
            "status": "fail",
            "scenario": output.scenario,
            "failures": output.summary["failures"],
            "output_dir": dir,
        });
        return Ok(Finished { stdout, stderr: Some(failure.to_string()), code: EXIT_VERIFY_FAILED });
    }
    Ok(Finished { stdout, stderr: None, code: 0 })
}

fn list(args: &ListArgs) -> Result<Finished> {
    let stdout = match (&args.template, args.json) {
        (Some(name), _) => find(name)?.template(0)?,
        (None, true) => serde_json::to_string_pretty(&catalog_json()?)? + "\n",
        (None, false) => catalog_text(),
    };
    Ok(Finished { stdout, stderr: None, code: 0 })
}

fn dispatch(cli: &Cli) -> Result<Finished> {
    match &cli.command {
        Command::Simulate(a) => run_job(Some(JobKind::Simulate), a),
        Command::Price(a) => run_job(Some(JobKind::Price), a),
        Command::Verify(a) => run_job(Some(JobKind::Verify), a),
        Command::Diagnose(a) => run_job(Some(JobKind::Diagnose), a),
        Command::Run(a) => run_job(None, a),
        Command::List(a) => list(a),
    }
}

/// Entry point of the binary. Errors are reported on stderr as a JSON
/// object and leave no output files behind.
pub fn main_with(cli: Cli) -> ExitCode {
    let result = match cli.threads {
        Some(0) => Err(anyhow::anyhow!("--threads must be at least 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .context("building the worker pool")
            .and_then(|pool| pool.install(|| dispatch(&cli))),
        None => dispatch(&cli),
    };
    match result {
        Ok(f) => {
            print!("{}", f.stdout);
            if let Some(e) = f.stderr {
                eprintln!("{e}");
            }
            ExitCode::from(f.code)
        }
        Err(e) => {
            let chain: Vec<String> = e.chain().map(|c| c.to_string()).collect();
            eprintln!("{}", json!({ "status": "error", "error": format!("{e:#}"), "causes": chain }));
            ExitCode::from(EXIT_ERROR)
        }
    }
}
