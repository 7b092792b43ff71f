//! Batch front end: resolves flags and config files into a [`RunConfig`],
//! validates it, dispatches to the core library and writes CSV/JSON artifacts
//! plus a manifest into the output directory.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::Parser;
use serde_json::json;

mod commands;
pub mod config;

pub use config::{validate, Cli, Command, Flags, MeasureArg, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug)]
pub enum Failure {
    Validation(Vec<String>),
    Core(agres_core::Error),
    Io(String),
}

impl From<agres_core::Error> for Failure {
    fn from(e: agres_core::Error) -> Self {
        Failure::Core(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Validation(_) => EXIT_VALIDATION,
            Failure::Core(e) if e.is_numerical() => EXIT_NUMERICAL,
            Failure::Core(_) => EXIT_VALIDATION,
            Failure::Io(_) => EXIT_IO,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        match self {
            Failure::Validation(v) => json!({"error": "ValidationError", "violations": v, "exit_code": self.exit_code()}),
            Failure::Core(e) => json!({"error": e.kind(), "message": e.to_string(), "exit_code": self.exit_code()}),
            Failure::Io(m) => json!({"error": "IoError", "message": m, "exit_code": self.exit_code()}),
        }
    }
}

/// Files written by a run and a one-paragraph summary for standard output.
#[derive(Debug, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub summary: String,
}

/// Merges the optional config file under the command-line flags.
pub fn resolve(cli: Cli) -> Result<RunConfig, Failure> {
    let flags = match &cli.flags.config {
        Some(path) => {
            let file = config::read_config_file(path).map_err(|e| Failure::Validation(vec![e]))?;
            cli.flags.over(file)
        }
        None => cli.flags,
    };
    Ok(RunConfig::resolve(cli.command, flags))
}

/// Validates and runs a resolved configuration.
pub fn execute(cfg: &RunConfig) -> Result<Outcome, Failure> {
    let violations = validate(cfg);
    if !violations.is_empty() {
        return Err(Failure::Validation(violations));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads.unwrap_or(0))
        .build()
        .map_err(|e| Failure::Io(e.to_string()))?;
    pool.install(|| commands::dispatch(cfg))
}

/// Full command-line entry point; returns the process exit code.
pub fn run_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if e.use_stderr() => {
            eprintln!("{}", Failure::Validation(vec![e.to_string().trim().to_string()]).to_json());
            return EXIT_VALIDATION;
        }
        Err(e) => {
            print!("{e}");
            return EXIT_OK;
        }
    };
    match resolve(cli).and_then(|cfg| execute(&cfg)) {
        Ok(out) => {
            println!("{}", out.summary.trim_end());
            EXIT_OK
        }
        Err(f) => {
            eprintln!("{}", f.to_json());
            f.exit_code()
        }
    }
}
