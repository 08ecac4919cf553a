//! Command-line front end: `pme evolve|certify|infer|validate --config FILE`.
//!
//! Exit codes: 0 success, 1 a check failed, 2 bad configuration, 3 solver failure.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod manifest;

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use pme_core::{Error, Exec};

pub use config::RunConfig;
pub use manifest::{load_manifest, OutputDir, RunManifest};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "pme", version, about = "Porous-medium solver, stability certificates and exponent inference")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Time-step one problem and write snapshots.
    Evolve(#[command(flatten)] CommonArgs),
    /// Compare two exponents against the stability bounds.
    Certify(#[command(flatten)] CommonArgs),
    /// Infer the exponent from window observations.
    Infer(#[command(flatten)] CommonArgs),
    /// Self-convergence and source-solution checks.
    Validate(#[command(flatten)] CommonArgs),
}

#[derive(Debug, Clone, PartialEq, Eq, clap::Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; 0 keeps the default.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    /// Run every sweep on the calling thread.
    #[arg(long)]
    pub sequential: bool,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Evolve(_) => "evolve",
            Command::Certify(_) => "certify",
            Command::Infer(_) => "infer",
            Command::Validate(_) => "validate",
        }
    }

    pub fn args(&self) -> &CommonArgs {
        match self {
            Command::Evolve(a) | Command::Certify(a) | Command::Infer(a) | Command::Validate(a) => a,
        }
    }
}

/// Result of one invocation, also available to in-process callers.
#[derive(Debug)]
pub struct RunOutcome {
    pub exit_code: i32,
    pub output_dir: Option<PathBuf>,
    pub manifest: Option<RunManifest>,
    pub error: Option<String>,
}

pub fn exit_code_for(err: &Error) -> i32 {
    if err.is_solver_failure() {
        EXIT_SOLVER
    } else {
        EXIT_CONFIG
    }
}

fn error_kind(err: &Error) -> &'static str {
    match err {
        Error::Input(_) | Error::Json(_) | Error::SpecMismatch(_) | Error::UnalignedWindow { .. } => "config",
        Error::TauTooLarge(_) => "admissibility",
        Error::Hypothesis(_) => "hypothesis",
        Error::DegeneratePosterior(_) => "degenerate_posterior",
        Error::Io(_) | Error::Csv(_) => "io",
        e if e.is_solver_failure() => "solver",
        _ => "runtime",
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> RunOutcome
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return RunOutcome {
                exit_code: code,
                output_dir: None,
                manifest: None,
                error: (code != EXIT_OK).then(|| e.to_string()),
            };
        }
    };
    run_command(&cli.command)
}

pub fn run_command(command: &Command) -> RunOutcome {
    let started = Instant::now();
    let args = command.args();
    let mut out_path = None;
    let result = (|| -> pme_core::Result<(i32, RunManifest)> {
        let mut cfg = RunConfig::load(&args.config)?;
        if args.seed.is_some() {
            cfg.seed = args.seed;
        }
        cfg.validate_common()?;
        let base = args.config.parent().map(Path::to_path_buf).unwrap_or_default();
        let dir = args
            .output
            .clone()
            .or_else(|| cfg.output_dir.as_ref().map(|d| base.join(d)))
            .ok_or_else(|| Error::Input("missing field `output_dir` (or pass --output)".into()))?;
        if args.threads > 0 {
            pme_core::exec::configure_threads(args.threads);
        }
        let exec = if args.sequential { Exec::Sequential } else { Exec::Parallel };
        let threads = if args.sequential { 1 } else { pme_core::exec::current_threads() };
        let mut out = OutputDir::create(&dir)?;
        out_path = Some(dir);
        let outcome = match command {
            Command::Evolve(_) => commands::cmd_evolve(&cfg, &base, &mut out)?,
            Command::Certify(_) => commands::cmd_certify(&cfg, &base, &mut out, exec)?,
            Command::Infer(_) => commands::cmd_infer(&cfg, &base, &mut out, exec)?,
            Command::Validate(_) => commands::cmd_validate(&cfg, &base, &mut out, exec)?,
        };
        let wall = started.elapsed().as_secs_f64();
        let manifest = out.finish(command.name(), &cfg, threads, wall, outcome.exit_code, outcome.summary)?;
        Ok((outcome.exit_code, manifest))
    })();
    match result {
        Ok((code, manifest)) => RunOutcome {
            exit_code: code,
            output_dir: out_path,
            manifest: Some(manifest),
            error: None,
        },
        Err(err) => {
            let code = exit_code_for(&err);
            let body = serde_json::json!({
                "command": command.name(),
                "kind": error_kind(&err),
                "message": err.to_string(),
                "exit_code": code,
            });
            eprintln!("{body}");
            RunOutcome {
                exit_code: code,
                output_dir: out_path,
                manifest: None,
                error: Some(err.to_string()),
            }
        }
    }
}
