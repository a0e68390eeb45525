//! `sweep`: run a Monte-Carlo parameter sweep and write the result CSV.
//!
//! CSV schema (version 1): one row per (value, scheme, repetition) cell
//! in canonical order — value-major, then scheme, then repetition —
//! regardless of execution order.  Columns:
//!
//! | column      | meaning                                              |
//! |-------------|------------------------------------------------------|
//! | scheme      | allocation scheme name                               |
//! | swept_param | which knob the sweep varies                          |
//! | value       | the knob's value in this cell                        |
//! | repetition  | scenario repetition index                            |
//! | G           | discriminant gain (empty if the cell failed)         |
//! | accuracy    | Monte-Carlo accuracy (empty if the cell failed)      |
//! | feasible    | whether the evaluated allocation met all constraints |
//! | iters       | outer solver iterations                              |
//! | wall_ms     | measured wall-clock milliseconds (not deterministic) |
//!
//! All columns except `wall_ms` are deterministic in (spec, seed, tool
//! version).

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;

use edgegain_core::evalsim::{self, CellKey, CellResult};

use crate::config::load_sweep_file;
use crate::manifest::RunManifest;
use crate::{from_solver, io_error, write_text_artifact, CliError};

pub struct SweepArgs {
    pub spec: PathBuf,
    pub out: PathBuf,
    /// Worker threads for sweep cells; `None` or `Some(1)` runs serially.
    pub parallel: Option<usize>,
}

const RESULTS_FILE: &str = "results.csv";
const FAILURES_FILE: &str = "failures.txt";

pub fn cmd_sweep(args: &SweepArgs) -> Result<(), CliError> {
    let file = load_sweep_file(&args.spec)?;
    let spec = file.sweep.to_spec();

    fs::create_dir_all(&args.out).map_err(|e| io_error(&args.out, e))?;
    let manifest = RunManifest::start(
        "sweep",
        spec.seed,
        serde_json::to_value(&file).map_err(|e| CliError::Io(e.to_string()))?,
    );

    let keys = evalsim::plan(&spec);
    let evaluate = |key: &CellKey| -> Result<(CellResult, u128), CliError> {
        let clock = Instant::now();
        let cell = evalsim::evaluate_cell(&spec, &file.scenario, *key).map_err(from_solver)?;
        Ok((cell, clock.elapsed().as_millis()))
    };
    // Cells are independent and internally seeded, so parallel execution
    // cannot change their contents; collecting over the planned key list
    // keeps canonical row order either way.
    let rows: Vec<(CellResult, u128)> = match args.parallel {
        Some(n) if n > 1 => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Io(format!("thread pool: {e}")))?;
            pool.install(|| keys.par_iter().map(evaluate).collect::<Result<_, _>>())?
        }
        _ => keys.iter().map(evaluate).collect::<Result<_, _>>()?,
    };

    let mut csv = String::from("scheme,swept_param,value,repetition,G,accuracy,feasible,iters,wall_ms\n");
    for (cell, wall_ms) in &rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{wall_ms}",
            cell.key.scheme.name(),
            spec.swept.name(),
            cell.value,
            cell.key.repetition,
            cell.gain.map(|g| g.to_string()).unwrap_or_default(),
            cell.accuracy.map(|a| a.to_string()).unwrap_or_default(),
            cell.feasible,
            cell.solver_iterations,
        );
    }
    write_text_artifact(&args.out, RESULTS_FILE, &csv)?;

    let failures: Vec<&CellResult> = rows
        .iter()
        .map(|(c, _)| c)
        .filter(|c| c.failure.is_some())
        .collect();
    let mut outputs = vec![String::from(RESULTS_FILE)];
    if !failures.is_empty() {
        let mut text = String::new();
        for cell in &failures {
            let _ = writeln!(
                text,
                "{} {}={} repetition {}: {}",
                cell.key.scheme.name(),
                spec.swept.name(),
                cell.value,
                cell.key.repetition,
                cell.failure.as_deref().unwrap_or(""),
            );
        }
        write_text_artifact(&args.out, FAILURES_FILE, &text)?;
        outputs.push(String::from(FAILURES_FILE));
    }
    manifest.finish(&args.out, outputs)?;

    println!(
        "{} cells ({} failed); results in {}",
        rows.len(),
        failures.len(),
        args.out.display()
    );
    if failures.len() == rows.len() {
        return Err(CliError::Infeasible(String::from(
            "every sweep cell failed; see failures.txt",
        )));
    }
    Ok(())
}
