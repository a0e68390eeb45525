//! TOML configuration files.
//!
//! Two file kinds share one convention: a `schema_version` integer at the
//! top, named sections below, unknown fields rejected with the field
//! named, and every omitted field falling back to the built-in defaults —
//! an empty file is the fully documented default experiment.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use edgegain_core::evalsim::{SweepSpec, SweptParam, DEFAULT_REPETITIONS, DEFAULT_SAMPLES};
use edgegain_core::scenario::ScenarioConfig;
use edgegain_core::solver::{Scheme, SolverConfig};

use crate::{CliError, SCHEMA_VERSION};

/// Configuration of a single solve: the scenario and the solver knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub scenario: ScenarioConfig,
    pub solver: SolverConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            schema_version: SCHEMA_VERSION,
            scenario: ScenarioConfig::default(),
            solver: SolverConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        check_schema(self.schema_version)?;
        self.scenario
            .validate()
            .and_then(|()| self.solver.validate())
            .map_err(|e| CliError::Config(e.to_string()))
    }
}

/// Configuration of a sweep: the base scenario plus the sweep section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepFile {
    pub schema_version: u32,
    pub scenario: ScenarioConfig,
    pub sweep: SweepSection,
}

impl Default for SweepFile {
    fn default() -> Self {
        SweepFile {
            schema_version: SCHEMA_VERSION,
            scenario: ScenarioConfig::default(),
            sweep: SweepSection::default(),
        }
    }
}

impl SweepFile {
    pub fn validate(&self) -> Result<(), CliError> {
        check_schema(self.schema_version)?;
        self.scenario
            .validate()
            .and_then(|()| self.sweep.to_spec().validate())
            .map_err(|e| CliError::Config(e.to_string()))
    }
}

/// The `[sweep]` section.  Defaults to all four schemes; `values` has no
/// default and must be given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub swept: SweptParam,
    pub values: Vec<f64>,
    pub repetitions: usize,
    pub schemes: Vec<Scheme>,
    pub samples_per_cell: usize,
    pub seed: u64,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            swept: SweptParam::EnergyBudget,
            values: Vec::new(),
            repetitions: DEFAULT_REPETITIONS,
            schemes: Scheme::ALL.to_vec(),
            samples_per_cell: DEFAULT_SAMPLES,
            seed: 0,
        }
    }
}

impl SweepSection {
    pub fn to_spec(&self) -> SweepSpec {
        SweepSpec {
            swept: self.swept,
            values: self.values.clone(),
            repetitions: self.repetitions,
            schemes: self.schemes.clone(),
            samples_per_cell: self.samples_per_cell,
            seed: self.seed,
        }
    }
}

fn check_schema(found: u32) -> Result<(), CliError> {
    if found != SCHEMA_VERSION {
        return Err(CliError::Config(format!(
            "schema_version {found} not supported; this tool writes and reads \
             schema_version {SCHEMA_VERSION}"
        )));
    }
    Ok(())
}

pub fn parse_run_config(text: &str) -> Result<RunConfig, CliError> {
    let config: RunConfig =
        toml::from_str(text).map_err(|e| CliError::Config(format!("config parse error: {e}")))?;
    config.validate()?;
    Ok(config)
}

pub fn load_run_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
    parse_run_config(&text)
}

pub fn save_run_config(config: &RunConfig, path: &Path) -> Result<(), CliError> {
    let text = toml::to_string_pretty(config)
        .map_err(|e| CliError::Io(format!("serializing config: {e}")))?;
    fs::write(path, text).map_err(|e| crate::io_error(path, e))
}

pub fn parse_sweep_file(text: &str) -> Result<SweepFile, CliError> {
    let file: SweepFile =
        toml::from_str(text).map_err(|e| CliError::Config(format!("sweep spec parse error: {e}")))?;
    file.validate()?;
    Ok(file)
}

pub fn load_sweep_file(path: &Path) -> Result<SweepFile, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read sweep spec {}: {e}", path.display())))?;
    parse_sweep_file(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use edgegain_core::solver::DualMethod;

    #[test]
    fn empty_config_gives_documented_defaults() {
        let config = parse_run_config("").unwrap();
        assert_eq!(config, RunConfig::default());
        let s = &config.scenario;
        assert_eq!(s.device_count, 3);
        assert_eq!(s.feature_count, 50);
        assert_eq!(s.latency_budget, 1.85);
        assert_eq!(s.energy_budget, 0.15);
        assert_eq!(s.bandwidth, 200.0);
        assert_eq!(config.solver.dual_method, DualMethod::ExactBoundary);
    }

    #[test]
    fn round_trip_preserves_every_field() {
        let mut config = RunConfig::default();
        config.scenario.device_count = 2;
        config.scenario.energy_budget = 0.2;
        config.solver.seed = 99;
        config.solver.max_outer_iterations = 77;
        let text = toml::to_string_pretty(&config).unwrap();
        let back = parse_run_config(&text).unwrap();
        assert_eq!(back, config);
    }

    #[test]
    fn unknown_field_is_rejected_by_name() {
        let err = parse_run_config("[scenario]\nbandwith = 100.0\n").unwrap_err();
        assert!(err.to_string().contains("bandwith"), "{err}");
        let err = parse_run_config("[solver]\nouter_tol = 1.0\n").unwrap_err();
        assert!(err.to_string().contains("outer_tol"), "{err}");
    }

    #[test]
    fn invalid_value_is_rejected_by_name() {
        let err = parse_run_config("[scenario]\nbandwidth = -5.0\n").unwrap_err();
        assert!(err.to_string().contains("bandwidth"), "{err}");
    }

    #[test]
    fn unsupported_schema_version_is_rejected() {
        let err = parse_run_config("schema_version = 9\n").unwrap_err();
        assert!(err.to_string().contains("schema_version 9"), "{err}");
    }

    #[test]
    fn sweep_file_requires_values() {
        let err = parse_sweep_file("[sweep]\nswept = \"latency\"\n").unwrap_err();
        assert!(err.to_string().contains("at least one value"), "{err}");
    }

    #[test]
    fn sweep_file_parses_schemes_and_param_names() {
        let file = parse_sweep_file(
            "[sweep]\nswept = \"device_count\"\nvalues = [1.0, 2.0]\n\
             schemes = [\"optimal\", \"power_aware\"]\nrepetitions = 2\n",
        )
        .unwrap();
        assert_eq!(file.sweep.swept, SweptParam::DeviceCount);
        assert_eq!(
            file.sweep.schemes,
            vec![Scheme::Optimal, Scheme::PowerAware]
        );
        assert_eq!(file.sweep.samples_per_cell, DEFAULT_SAMPLES);
    }
}
