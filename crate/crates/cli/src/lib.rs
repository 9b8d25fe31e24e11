//! Experiment runner: parses a TOML configuration, runs the named
//! experiments and writes `results.csv` plus `manifest.json`.

pub mod catalog;
pub mod config;
pub mod experiments;
pub mod output;

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rayon::prelude::*;

use config::Config;
use output::{Gate, Row};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_GATE: i32 = 2;

/// Runs every experiment in `config` and returns rows in canonical order.
///
/// Experiments run concurrently on the current rayon pool; each draws from
/// its own counter-based stream, so the output does not depend on the
/// number of threads.
pub fn run_config(config: &Config) -> Result<(Vec<Row>, Vec<Gate>)> {
    let outcomes = config
        .experiments
        .par_iter()
        .enumerate()
        .map(|(i, exp)| {
            experiments::run_experiment(exp, config.seed, &config.tolerances)
                .with_context(|| format!("experiment {i} ({})", exp.experiment))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut indexed = Vec::new();
    let mut gates = Vec::new();
    for (i, o) in outcomes.into_iter().enumerate() {
        indexed.extend(o.rows.into_iter().map(|r| (i, r)));
        gates.extend(o.gates);
    }
    output::sort_rows(&mut indexed);
    Ok((indexed.into_iter().map(|(_, r)| r).collect(), gates))
}

/// What `cgolab run` did.
#[derive(Debug)]
pub struct RunReport {
    pub out_dir: PathBuf,
    pub rows: usize,
    pub gates: Vec<Gate>,
    pub exit_code: i32,
}

/// Loads, runs and writes one configuration. Errors map to exit code 1;
/// a failed gate still writes all outputs and yields exit code 2.
pub fn run(path: &Path, seed: Option<u64>, out: Option<&Path>, threads: usize) -> Result<RunReport> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let config = Config::parse(&text, seed)?;
    let out_dir = out
        .map(Path::to_path_buf)
        .or_else(|| config.out.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("results"));
    let (rows, gates) = run_config(&config)?;
    let exit_code = if gates.iter().all(|g| g.passed) { EXIT_OK } else { EXIT_GATE };
    output::write_outputs(&out_dir, &text, &config, &rows, &gates, threads, exit_code)
        .with_context(|| format!("cannot write results to {}", out_dir.display()))?;
    Ok(RunReport {
        out_dir,
        rows: rows.len(),
        gates,
        exit_code,
    })
}
