//! The allocation solver: a fractional-programming outer loop around an
//! inner convex subproblem.
//!
//! The discriminant gain is a sum of ratios `1 / B_i(S, D)` with affine
//! denominators.  The outer loop ([`maximize_gain`]) maintains one auxiliary
//! weight per ratio, solves the weighted inner problem, and refreshes the
//! weights to the reciprocal denominators until the fixed point
//! `y_i * B_i = 1` is reached; at that point the allocation is optimal for
//! the original ratio objective, and the gain trace is non-decreasing along
//! the way.
//!
//! The inner subproblem ([`solve_inner`]) alternates two stages:
//!
//! * [`allocate_power_quant`] — at fixed communication times, each device's
//!   sensing distortion, quantization distortion, and transmit energy are
//!   optimized.  Both the energy and the capacity constraint provably bind
//!   at the per-device optimum, which reduces the stage to one convex
//!   scalar minimization per device; multipliers are recovered from the
//!   stationarity conditions afterwards.  A projected-subgradient method
//!   driven by the configured step sizes is available as an alternative
//!   [`DualMethod`].
//! * [`allocate_comm_time`] — computes each device's minimum feasible
//!   communication time and redistributes the latency surplus in
//!   proportion to the throughput gaps.  The inner loop then balances the
//!   per-device marginal value of communication time (weighted by the
//!   auxiliary weights) so the split is optimal — the literal surplus rule
//!   alone cannot move an iterate whose capacity constraints are already
//!   tight.
//!
//! [`solve_scheme`] wraps the same machinery for the three baseline schemes
//! that pin one coordinate (sensing power, communication time, or
//! quantization resolution) and optimize the rest.

mod baseline;
mod device;
mod inner;
mod outer;
mod power;
mod split;
mod terms;
mod time;

pub use baseline::{solve_scheme, ParseSchemeError, Scheme};
pub use outer::{initial_allocation, maximize_gain};
pub use power::{
    allocate_power_quant, closed_form_comm_energy, closed_form_quant_distortion,
    closed_form_sensing_distortion, PowerQuantSolution,
};
pub use terms::{AuxiliaryVars, RatioSystem, RatioTerm};
pub use time::{allocate_comm_time, redistribute_surplus, TimeAllocation};

use alloc::string::String;
use alloc::vec::Vec;

use crate::model::{
    Allocation, Constraint, FeasibilityReport, GainBreakdown, ModelError,
    TransformedAllocation,
};

/// How the power/quantization stage solves its per-device dual problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum DualMethod {
    /// Exploit that both per-device constraints bind at the optimum: solve
    /// one scalar convex minimization per device by bisection and recover
    /// the multipliers from stationarity.  Deterministic, and accurate to
    /// floating-point precision.  The default.
    ExactBoundary,
    /// Subgradient ascent on the multipliers with the closed-form primal
    /// updates, using the configured step sizes with an `1/sqrt(i)` decay.
    /// Power-stage prices move multiplicatively (log-domain steps) so one
    /// step constant serves multipliers of very different scale; the time
    /// price moves by ordinary projected steps.  Slower and less precise;
    /// kept as an independent cross-check and for step-size fault
    /// injection.
    Subgradient,
}

/// Which stationarity condition the quantization closed form follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum QuantRule {
    /// The derivative of the rate term `N log2(1 + 1/D)` gives
    /// `D (D + 1) = capacity_price * N / (ln2 * weight)`.  The default; the
    /// only form under which the finite-difference stationarity check
    /// passes.
    Analytic,
    /// Alternative scaling with `ln2` moved to the numerator,
    /// `D (D + 1) = capacity_price * N * ln2 / weight`, retained for
    /// comparison; differs from [`QuantRule::Analytic`] by a constant
    /// factor `ln2^2` inside the square root.
    Log2Weighted,
}

/// Solver tuning knobs.  `Default` gives the documented desk-scale values.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct SolverConfig {
    /// Outer fixed-point tolerance on `max_i |y_i * B_i - 1|`.
    pub outer_tolerance: f64,
    /// Cap on outer iterations.
    pub max_outer_iterations: usize,
    /// Objective-change tolerance of the subgradient inner loop.
    pub inner_tolerance: f64,
    /// Cap on subgradient dual steps per stage invocation.
    pub max_dual_steps: usize,
    /// Base step for the capacity-constraint multiplier (subgradient mode).
    pub step_capacity: f64,
    /// Base step for the energy-constraint multiplier (subgradient mode).
    pub step_energy: f64,
    /// Base step for the time-stage capacity multiplier (subgradient mode).
    pub step_time_price: f64,
    /// Base step for the communication-time gradient descent
    /// (subgradient mode).
    pub step_time: f64,
    /// Initial value of every multiplier.
    pub initial_price: f64,
    /// Per-device dual strategy of the power/quantization stage.
    pub dual_method: DualMethod,
    /// Stationarity form of the quantization closed form.
    pub quant_rule: QuantRule,
    /// Iteration count of every scalar bisection (each halves the
    /// bracket, so 60 reaches f64 resolution on any sane range).
    pub bisection_iterations: usize,
    /// Cap on power-stage / time-stage alternations per inner solve.
    pub max_alternations: usize,
    /// Relative objective-change tolerance ending the inner alternation.
    pub alternation_tolerance: f64,
    /// Seed for randomized baseline pinning (sensing-power baseline).
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            outer_tolerance: 1e-6,
            max_outer_iterations: 200,
            inner_tolerance: 1e-8,
            max_dual_steps: 10_000,
            step_capacity: 1e-2,
            step_energy: 1e-2,
            step_time_price: 1e-2,
            step_time: 1e-3,
            initial_price: 1.0,
            dual_method: DualMethod::ExactBoundary,
            quant_rule: QuantRule::Analytic,
            bisection_iterations: 60,
            max_alternations: 8,
            alternation_tolerance: 1e-10,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        let positive: [(&str, f64); 8] = [
            ("outer_tolerance", self.outer_tolerance),
            ("inner_tolerance", self.inner_tolerance),
            ("step_capacity", self.step_capacity),
            ("step_energy", self.step_energy),
            ("step_time_price", self.step_time_price),
            ("step_time", self.step_time),
            ("initial_price", self.initial_price),
            ("alternation_tolerance", self.alternation_tolerance),
        ];
        for (name, value) in positive {
            if !(value > 0.0) || !value.is_finite() {
                return Err(SolverError::InvalidConfig {
                    what: alloc::format!(
                        "{name} must be strictly positive, got {value}"
                    ),
                });
            }
        }
        for (name, value) in [
            ("max_outer_iterations", self.max_outer_iterations),
            ("max_dual_steps", self.max_dual_steps),
            ("bisection_iterations", self.bisection_iterations),
            ("max_alternations", self.max_alternations),
        ] {
            if value == 0 {
                return Err(SolverError::InvalidConfig {
                    what: alloc::format!("{name} must be at least 1"),
                });
            }
        }
        Ok(())
    }
}

/// Multipliers attached to the constraints at the solution.
///
/// One entry per device: `capacity_price` for the capacity bound,
/// `energy_price` for the energy budget (both from the power/quantization
/// stage), and `time_price` for the capacity bound inside the
/// communication-time stage.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DualState {
    pub capacity_price: Vec<f64>,
    pub energy_price: Vec<f64>,
    pub time_price: Vec<f64>,
}

impl DualState {
    pub fn zeros(device_count: usize) -> Self {
        DualState {
            capacity_price: alloc::vec![0.0; device_count],
            energy_price: alloc::vec![0.0; device_count],
            time_price: alloc::vec![0.0; device_count],
        }
    }
}

/// Why the outer loop stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum TerminationReason {
    /// Fixed-point residual fell below `outer_tolerance`.
    Converged,
    /// Iteration cap hit; the report carries the best iterate found.
    MaxOuterIterations,
}

/// Full solver output.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SolveReport {
    /// Physical controls of the final allocation.
    pub allocation: Allocation,
    /// The same allocation in distortion coordinates.
    pub transformed: TransformedAllocation,
    /// Gain of the final allocation, broken down per pair and element.
    pub gain: GainBreakdown,
    /// Constraint slacks of the final allocation.
    pub feasibility: FeasibilityReport,
    /// Total gain after each outer iteration (non-decreasing).
    pub gain_trace: Vec<f64>,
    /// Fixed-point residual `max_i |y_i * B_i - 1|` after each outer
    /// iteration.
    pub residual_trace: Vec<f64>,
    /// Inner-alternation objective values, one trace per outer iteration;
    /// each trace is non-decreasing (the time update never hurts the
    /// weighted objective).
    pub inner_objective_traces: Vec<Vec<f64>>,
    /// Multipliers at the final power/quantization and time stages.
    pub duals: DualState,
    /// Devices whose class centroids are identical everywhere; they cannot
    /// contribute gain and are parked at constraint boundaries with a
    /// minimal time share.
    pub gain_inert: Vec<bool>,
    /// Outer iterations executed.
    pub outer_iterations: usize,
    /// Total inner alternations across all outer iterations.
    pub inner_iterations: usize,
    /// Whether every inner stage reported convergence.  Always true on
    /// the boundary method; the dual-ascent cross-check route can settle
    /// short of its tolerance within the step budget.
    pub inner_converged: bool,
    /// Whether the fixed point was reached.
    pub termination: TerminationReason,
}

impl SolveReport {
    /// Total discriminant gain of the returned allocation.
    pub fn total_gain(&self) -> f64 {
        self.gain.total
    }

    pub fn converged(&self) -> bool {
        self.termination == TerminationReason::Converged
    }
}

/// Solver failure.
#[derive(Debug, Clone, PartialEq)]
pub enum SolverError {
    /// No allocation can satisfy the named constraint.
    Infeasible { constraint: Constraint, detail: String },
    /// A configuration value is out of range.
    InvalidConfig { what: String },
    /// Invalid model inputs.
    Model(ModelError),
}

impl core::fmt::Display for SolverError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            SolverError::Infeasible { constraint, detail } => {
                write!(f, "infeasible: {constraint}: {detail}")
            }
            SolverError::InvalidConfig { what } => {
                write!(f, "invalid solver configuration: {what}")
            }
            SolverError::Model(e) => write!(f, "invalid model input: {e}"),
        }
    }
}

impl core::error::Error for SolverError {}

impl From<ModelError> for SolverError {
    fn from(e: ModelError) -> Self {
        SolverError::Model(e)
    }
}
