//! The fractional-programming outer loop.
//!
//! Maximizing a sum of ratios `sum_i 1 / B_i` is equivalent to finding the
//! joint fixed point of: solve the weighted inner problem at auxiliary
//! weights `y`, then refresh `y_i = 1 / B_i` at the new allocation.  Each
//! pass can only increase the gain — the inner solve maximizes
//! `sum_i y_i (1 - y_i B_i)` starting from value zero at the previous
//! allocation, and first-order convexity of `1/x` turns that surplus into
//! a gain increase — so the trace is monotone and the iteration converges
//! to a point where every product `y_i B_i` equals one.

use alloc::vec::Vec;

use crate::model::{
    check_feasibility, to_physical, total_gain, ClassStatistics, DeviceProfile,
    SystemParams, TransformedAllocation,
};

use super::device::CommLink;
use super::inner::{available_comm_time, solve_inner, Pin};
use super::terms::RatioSystem;
use super::{SolveReport, SolverConfig, SolverError, TerminationReason};

/// A feasible interior starting point: the available communication time
/// split equally, half the disposable energy committed to transmission,
/// and both distortions at twice their constraint boundaries.
pub fn initial_allocation(
    devices: &[DeviceProfile],
    sys: &SystemParams,
) -> Result<TransformedAllocation, SolverError> {
    if devices.is_empty() {
        return Err(SolverError::InvalidConfig {
            what: alloc::string::String::from("at least one device is required"),
        });
    }
    sys.validate()?;
    for (k, dev) in devices.iter().enumerate() {
        dev.validate(k)?;
    }
    let available = available_comm_time(devices, sys)?;
    let k_count = devices.len();
    let t0 = available / k_count as f64;
    let mut sensing = Vec::with_capacity(k_count);
    let mut quant = Vec::with_capacity(k_count);
    let mut energy = Vec::with_capacity(k_count);
    for dev in devices {
        let link = CommLink::new(dev, sys);
        let e0 = link.disposable / 2.0;
        // Doubling each tight boundary keeps every constraint slack.
        sensing.push(2.0 * link.tight_sensing_distortion(e0));
        quant.push((2.0 * link.tight_quant_distortion(t0, e0)).clamp(1e-300, 1e300));
        energy.push(e0);
    }
    Ok(TransformedAllocation {
        sensing_distortion: sensing,
        quant_distortion: quant,
        comm_energy: energy,
        comm_time: alloc::vec![t0; k_count],
    })
}

/// Runs the outer fixed-point loop from `start` with a coordinate pin.
pub(crate) fn maximize_with_pin(
    stats: &ClassStatistics,
    devices: &[DeviceProfile],
    sys: &SystemParams,
    start: TransformedAllocation,
    pin: &Pin,
    config: &SolverConfig,
) -> Result<SolveReport, SolverError> {
    config.validate()?;
    stats.validate(devices)?;
    let system = RatioSystem::build(stats, devices);

    let mut ta = start;
    let mut aux = system.aux_at(&ta);
    let mut gain_trace = Vec::new();
    let mut residual_trace = Vec::new();
    let mut inner_objective_traces = Vec::new();
    let mut inner_iterations = 0;
    let mut outer_iterations = 0;
    let mut termination = TerminationReason::MaxOuterIterations;
    let mut inner_converged = true;
    let mut last_inner = None;

    for _ in 0..config.max_outer_iterations {
        outer_iterations += 1;
        let inner = solve_inner(&system, &aux, devices, sys, &ta, pin, config)?;
        ta = inner.transformed.clone();
        inner_converged &= inner.converged;
        inner_iterations += inner.alternations;
        inner_objective_traces.push(inner.objective_trace.clone());
        gain_trace.push(system.ratio_gain(&ta));
        // Fixed-point residual of the weights used for this pass.
        let residual = system.residual(&aux, &ta);
        residual_trace.push(residual);
        last_inner = Some(inner);
        if residual < config.outer_tolerance {
            termination = TerminationReason::Converged;
            break;
        }
        aux = system.aux_at(&ta);
    }

    let inner = last_inner.expect("at least one outer iteration always runs");
    let allocation = to_physical(&ta, devices, sys);
    let feasibility = check_feasibility(&allocation, devices, sys);
    let gain = total_gain(stats, devices, &ta);
    Ok(SolveReport {
        allocation,
        transformed: ta,
        gain,
        feasibility,
        gain_trace,
        residual_trace,
        inner_objective_traces,
        duals: inner.duals,
        gain_inert: inner.gain_inert,
        outer_iterations,
        inner_iterations,
        inner_converged,
        termination,
    })
}

/// Maximizes the discriminant gain over all four per-device resources.
///
/// Returns the full report: final allocation in both coordinate systems,
/// gain breakdown, feasibility slacks, traces, and multipliers.  A report
/// with [`TerminationReason::MaxOuterIterations`] carries the best iterate
/// found; infeasible scenarios fail with the binding constraint.
pub fn maximize_gain(
    stats: &ClassStatistics,
    devices: &[DeviceProfile],
    sys: &SystemParams,
    config: &SolverConfig,
) -> Result<SolveReport, SolverError> {
    let start = initial_allocation(devices, sys)?;
    maximize_with_pin(stats, devices, sys, start, &Pin::None, config)
}
