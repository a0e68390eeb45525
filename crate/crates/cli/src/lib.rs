//! Command-line driver for the `edgegain` solver.
//!
//! Three subcommands: `solve` runs one scenario and writes the allocation
//! report, `sweep` runs a Monte-Carlo parameter sweep to CSV, and
//! `verify` certifies the build against the grid-search oracle and
//! first-order optimality checks.
//!
//! Every output directory carries a `manifest.json` recording the command,
//! the fully resolved configuration, seed, tool version, and output list;
//! every emitted file names its schema version and manifest.  Identical
//! (configuration, seed, tool version) produce byte-identical outputs,
//! except for measured wall-clock columns, which are documented as such.

use std::fmt;
use std::path::Path;

use edgegain_core::solver::SolverError;

pub mod config;
pub mod manifest;
pub mod solve;
pub mod sweep;
pub mod verify;

/// Version of every file layout this tool emits (config, manifest, CSV,
/// report files).  Bump on any schema change.
pub const SCHEMA_VERSION: u32 = 1;

/// Process exit codes, one per failure class.
pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_NON_CONVERGENCE: i32 = 4;
pub const EXIT_VERIFICATION: i32 = 5;

/// Driver failure, carrying its process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Unreadable, unparsable, or invalid configuration.
    #[error("configuration error: {0}")]
    Config(String),
    /// The scenario admits no feasible allocation.
    #[error("{0}")]
    Infeasible(String),
    /// The solver stopped without reaching its fixed point.
    #[error("non-convergence: {0}")]
    NonConvergence(String),
    /// A verification check failed.
    #[error("verification failed: {0}")]
    Verification(String),
    /// Filesystem failure while writing outputs.
    #[error("io error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Infeasible(_) => EXIT_INFEASIBLE,
            CliError::NonConvergence(_) => EXIT_NON_CONVERGENCE,
            CliError::Verification(_) => EXIT_VERIFICATION,
            CliError::Io(_) => 1,
        }
    }
}

/// Maps solver failures onto exit classes: infeasibility keeps its own
/// code, everything else is a configuration problem.
pub fn from_solver(e: SolverError) -> CliError {
    match e {
        SolverError::Infeasible { .. } => CliError::Infeasible(e.to_string()),
        _ => CliError::Config(e.to_string()),
    }
}

/// IO error with the offending path attached.
pub fn io_error(path: &Path, e: impl fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Comment header stamped at the top of text and CSV artifacts.
pub fn artifact_header() -> String {
    format!(
        "# schema_version: {SCHEMA_VERSION}\n# manifest: {}\n",
        manifest::MANIFEST_FILE
    )
}

/// Serializes a payload under the standard envelope (`schema_version`,
/// `manifest`) and writes it as pretty JSON.
pub fn write_json_artifact<T: serde::Serialize>(
    dir: &Path,
    name: &str,
    payload: &T,
) -> Result<(), CliError> {
    #[derive(serde::Serialize)]
    struct Envelope<'a, T> {
        schema_version: u32,
        manifest: &'static str,
        #[serde(flatten)]
        body: &'a T,
    }
    let envelope = Envelope {
        schema_version: SCHEMA_VERSION,
        manifest: manifest::MANIFEST_FILE,
        body: payload,
    };
    let path = dir.join(name);
    let text = serde_json::to_string_pretty(&envelope)
        .map_err(|e| CliError::Io(format!("serializing {name}: {e}")))?;
    std::fs::write(&path, text + "\n").map_err(|e| io_error(&path, e))
}

/// Writes a text artifact under the standard comment header.
pub fn write_text_artifact(dir: &Path, name: &str, body: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    std::fs::write(&path, format!("{}{body}", artifact_header())).map_err(|e| io_error(&path, e))
}
