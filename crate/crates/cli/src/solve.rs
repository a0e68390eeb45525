//! `solve`: run one scenario and write the allocation report.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use edgegain_core::model::{Allocation, TransformedAllocation};
use edgegain_core::scenario::{self, Scenario};
use edgegain_core::solver::{solve_scheme, Scheme, SolveReport};

use crate::config::{load_run_config, RunConfig};
use crate::manifest::RunManifest;
use crate::{from_solver, io_error, write_json_artifact, write_text_artifact, CliError};

pub struct SolveArgs {
    /// TOML configuration; `None` runs the built-in defaults.
    pub config: Option<PathBuf>,
    /// Overrides the configured seed (scenario and solver alike).
    pub seed: Option<u64>,
    pub out: PathBuf,
}

/// Output files, besides the manifest.
const ALLOCATION_FILE: &str = "allocation.json";
const GAIN_FILE: &str = "gain.json";
const FEASIBILITY_FILE: &str = "feasibility.json";
const TRACE_FILE: &str = "trace.csv";
const SUMMARY_FILE: &str = "summary.txt";

pub fn cmd_solve(args: &SolveArgs) -> Result<(), CliError> {
    let mut config = match &args.config {
        Some(path) => load_run_config(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = args.seed {
        config.scenario.seed = seed;
        config.solver.seed = seed;
    }

    fs::create_dir_all(&args.out).map_err(|e| io_error(&args.out, e))?;
    let manifest = RunManifest::start(
        "solve",
        config.solver.seed,
        serde_json::to_value(&config).map_err(|e| CliError::Io(e.to_string()))?,
    );

    let scenario = scenario::build(&config.scenario, 0).map_err(from_solver)?;
    let report = solve_scheme(
        Scheme::Optimal,
        &scenario.stats,
        &scenario.devices,
        &scenario.sys,
        &config.solver,
    )
    .map_err(from_solver)?;

    write_report(&args.out, &config, &scenario, &report)?;
    manifest.finish(
        &args.out,
        vec![
            String::from(ALLOCATION_FILE),
            String::from(GAIN_FILE),
            String::from(FEASIBILITY_FILE),
            String::from(TRACE_FILE),
            String::from(SUMMARY_FILE),
        ],
    )?;

    println!(
        "gain {:.6} after {} outer iterations; report in {}",
        report.total_gain(),
        report.outer_iterations,
        args.out.display()
    );
    if !report.converged() {
        return Err(CliError::NonConvergence(format!(
            "outer loop stopped at the {}-iteration cap; partial report written to {}",
            report.outer_iterations,
            args.out.display()
        )));
    }
    Ok(())
}

fn write_report(
    dir: &Path,
    config: &RunConfig,
    scenario: &Scenario,
    report: &SolveReport,
) -> Result<(), CliError> {
    #[derive(serde::Serialize)]
    struct AllocationFile<'a> {
        allocation: &'a Allocation,
        transformed: &'a TransformedAllocation,
    }
    write_json_artifact(
        dir,
        ALLOCATION_FILE,
        &AllocationFile {
            allocation: &report.allocation,
            transformed: &report.transformed,
        },
    )?;
    write_json_artifact(dir, GAIN_FILE, &report.gain)?;
    write_json_artifact(dir, FEASIBILITY_FILE, &report.feasibility)?;

    let mut trace = String::from("iteration,gain,residual\n");
    for (i, (gain, residual)) in report
        .gain_trace
        .iter()
        .zip(&report.residual_trace)
        .enumerate()
    {
        let _ = writeln!(trace, "{},{gain},{residual}", i + 1);
    }
    write_text_artifact(dir, TRACE_FILE, &trace)?;
    write_text_artifact(dir, SUMMARY_FILE, &summary_text(config, scenario, report))?;
    Ok(())
}

fn summary_text(config: &RunConfig, scenario: &Scenario, report: &SolveReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "command: solve");
    let _ = writeln!(s, "seed: {}", config.solver.seed);
    let _ = writeln!(
        s,
        "devices: {}  classes: {}  features/device: {}",
        scenario.devices.len(),
        scenario.stats.num_classes,
        config.scenario.feature_count
    );
    let _ = writeln!(s, "total gain: {}", report.total_gain());
    let _ = writeln!(
        s,
        "termination: {}  outer iterations: {}  inner alternations: {}",
        match report.converged() {
            true => "converged",
            false => "outer iteration cap",
        },
        report.outer_iterations,
        report.inner_iterations
    );
    let worst = report
        .feasibility
        .worst_violation()
        .map(|(c, slack)| format!("violated ({c}, slack {slack:e})"))
        .unwrap_or_else(|| String::from("satisfied"));
    let _ = writeln!(s, "constraints: {worst}");
    let _ = writeln!(s, "latency slack: {} s", report.feasibility.latency_slack);
    let _ = writeln!(s);
    let _ = writeln!(
        s,
        "device  sensing_power_w  transmit_power_w  comm_time_s  quant_gain  \
         capacity_slack_bits  energy_slack_j"
    );
    for k in 0..scenario.devices.len() {
        let _ = writeln!(
            s,
            "{k}  {:.6e}  {:.6e}  {:.6}  {:.6e}  {:.3e}  {:.3e}",
            report.allocation.sensing_power[k],
            report.allocation.transmit_power[k],
            report.allocation.comm_time[k],
            report.allocation.quant_gain[k],
            report.feasibility.capacity_slack[k],
            report.feasibility.energy_slack[k],
        );
    }
    s
}
