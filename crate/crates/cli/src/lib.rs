//! Command-line front end: configuration, dispatch and persistence.

pub mod config;
pub mod dispatch;
pub mod output;

use std::fs;
use std::io;
use std::path::PathBuf;
use std::time::Instant;

use config::{parse_config, serialize, validate, Command, ConfigError, RunConfig};
use dispatch::{dispatch, run_id};
use output::{write_all, RunManifest, RunOutput};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

/// Output directory used when neither `--out` nor `out =` is given.
pub const DEFAULT_OUT: &str = "pinlab-out";

/// Command-line values; each one overrides the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub tolerance: Option<f64>,
}

/// Reads the config file, applies the overrides and validates the result.
pub fn resolve(command: Command, ov: &Overrides) -> Result<RunConfig, Vec<ConfigError>> {
    let text = match &ov.config {
        Some(p) => fs::read_to_string(p).map_err(|e| {
            vec![ConfigError {
                line: 0,
                key: "config".into(),
                message: format!("cannot read {}: {e}", p.display()),
            }]
        })?,
        None => String::new(),
    };
    let mut cfg = parse_config(&text, Some(command))?;
    if ov.out.is_some() {
        cfg.out.clone_from(&ov.out);
    }
    if let Some(s) = ov.seed {
        cfg.seed = s;
    }
    if ov.threads.is_some() {
        cfg.threads = ov.threads;
    }
    if let Some(t) = ov.tolerance {
        cfg.tolerance = t;
    }
    let errors: Vec<ConfigError> = validate(&cfg)
        .into_iter()
        .map(|(key, message)| ConfigError {
            line: 0,
            key: key.into(),
            message,
        })
        .collect();
    if errors.is_empty() {
        Ok(cfg)
    } else {
        Err(errors)
    }
}

/// Thread count: config (or `--threads`), then `PINLAB_THREADS`, then all cores.
pub fn thread_count(cfg: &RunConfig) -> usize {
    cfg.threads
        .or_else(|| std::env::var("PINLAB_THREADS").ok()?.parse().ok().filter(|n| *n > 0))
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs a validated config and writes its files. Returns the output and the
/// directory written to.
pub fn execute(cfg: &RunConfig) -> io::Result<(RunOutput, PathBuf)> {
    let threads = thread_count(cfg);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(io::Error::other)?;
    let start = Instant::now();
    let out = pool.install(|| dispatch(cfg));
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let manifest = RunManifest {
        tool: "pinlab",
        version: env!("CARGO_PKG_VERSION"),
        command: cfg.command.map(|c| c.to_string()).unwrap_or_default(),
        run_id: run_id(cfg),
        seed: cfg.seed,
        threads,
        config: serialize(cfg),
        status: if out.success() { "ok" } else { "failed" },
        wall_seconds: start.elapsed().as_secs_f64(),
        cells: out.cells.clone(),
        invariants: out.invariants.clone(),
        files: Vec::new(),
    };
    write_all(&dir, &out, manifest)?;
    Ok((out, dir))
}

/// JSON summary of what failed, for stderr.
pub fn failure_summary(out: &RunOutput) -> String {
    serde_json::json!({
        "status": "failed",
        "failed_cells": out.failed_cells(),
        "failed_invariants": out.failed_invariants(),
    })
    .to_string()
}

/// Full run with exit-code semantics: 0 all good, 1 a cell or hard invariant
/// failed (files are still written), 2 bad configuration (nothing written).
pub fn run(command: Command, ov: &Overrides) -> i32 {
    let cfg = match resolve(command, ov) {
        Ok(c) => c,
        Err(errors) => {
            for e in errors {
                eprintln!("config error: {e}");
            }
            return EXIT_CONFIG;
        }
    };
    match execute(&cfg) {
        Ok((out, dir)) => {
            for t in &out.tables {
                println!("wrote {}", dir.join(&t.file).display());
            }
            if out.success() {
                EXIT_OK
            } else {
                eprintln!("{}", failure_summary(&out));
                EXIT_FAILED
            }
        }
        Err(e) => {
            eprintln!("error writing output: {e}");
            EXIT_FAILED
        }
    }
}
