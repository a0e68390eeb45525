//! The communication-time stage.
//!
//! At fixed distortions and transmit energies, feasibility only requires
//! each device's channel to carry its quantized features:
//! `N log2(1 + 1/D) <= t B log2(1 + E H / (t noise))`.  The right side is
//! concave, increasing in `t`, and saturates at `B E H / (noise ln2)` bits,
//! so each device has a well-defined minimum time — or none at all, when
//! the requirement exceeds the saturation limit.
//!
//! The stage computes the minimum times, then re-allocates the latency
//! surplus (the budget minus every device's sensing, computation, and
//! minimum communication time) in proportion to the per-device throughput
//! gaps; equal shares break the tie when no positive gap remains.  The
//! capacity multiplier of each device is recovered from stationarity of
//! `t + price * (bits - rate(t))`, i.e. `price = 1 / rate'(t)` at the
//! minimum time.
//!
//! Under [`DualMethod::Subgradient`] the minimum times come instead from
//! the literal primal-dual iteration: projected ascent on the capacity
//! multiplier around gradient descent on the time share.

use alloc::format;
use alloc::vec::Vec;

use crate::math;
use crate::model::{Constraint, DeviceProfile, SystemParams, TransformedAllocation};

use super::device::{log_gap, CommLink};
use super::{DualMethod, SolverConfig, SolverError};

/// Relative margin below the saturation limit at which a bit requirement
/// is declared unreachable for any finite time.
const SATURATION_MARGIN: f64 = 1e-9;

/// Minimum time share, as a fraction of the available communication time;
/// keeps every updated time strictly positive.
const TIME_FLOOR_FRACTION: f64 = 1e-12;

/// Throughput gaps this small (relative to the bit requirement) are
/// bisection residue, not information; they are dropped from the
/// redistribution weights.
const GAP_NOISE_RELATIVE: f64 = 1e-9;

/// Output of the communication-time stage.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeAllocation {
    /// Updated communication times; they exhaust the latency budget
    /// exactly (the surplus is fully allocated).
    pub comm_time: Vec<f64>,
    /// Per-device minimum feasible communication time at the given
    /// distortions and transmit energies.
    pub min_time: Vec<f64>,
    /// Total latency at the minimum times, including sensing and
    /// computation.
    pub total_min: f64,
    /// Latency budget minus `total_min`; negative when the current
    /// distortions do not fit the budget, in which case the update
    /// shrinks every time share below its minimum.
    pub surplus: f64,
    /// Bit requirement minus channel capacity at the minimum time, per
    /// device.
    pub throughput_gap: Vec<f64>,
    /// Capacity multiplier of the time stage, per device.
    pub time_price: Vec<f64>,
    /// False only when the subgradient iteration hit its step cap.
    pub converged: bool,
}

/// Splits `surplus` across devices in proportion to their positive
/// throughput gaps; devices with non-positive gaps receive nothing.  When
/// no positive gap remains the split is equal — the proportional rule
/// degenerates to 0/0 there, and equal shares preserve symmetry.
pub fn redistribute_surplus(gaps: &[f64], surplus: f64) -> Vec<f64> {
    assert!(!gaps.is_empty());
    let positive_total: f64 = gaps.iter().map(|g| g.max(0.0)).sum();
    if positive_total > 0.0 {
        gaps.iter()
            .map(|g| g.max(0.0) / positive_total * surplus)
            .collect()
    } else {
        let share = surplus / gaps.len() as f64;
        alloc::vec![share; gaps.len()]
    }
}

/// `d rate / d t` in bits per second at fixed transmit energy.
fn rate_slope(link: &CommLink, t: f64, e: f64) -> f64 {
    link.bandwidth / math::LN_2 * log_gap(link.snr(t, e))
}

/// Minimum `t` with `capacity_bits(t, e) >= bits`, found by log-space
/// bisection; `reference` sets the floor for degenerate (near-zero)
/// requirements.  The caller has already ruled out saturation.
fn exact_min_time(
    link: &CommLink,
    e: f64,
    bits: f64,
    reference: f64,
    iterations: usize,
) -> f64 {
    let floor = reference * TIME_FLOOR_FRACTION;
    if link.capacity_bits(floor, e) >= bits {
        return floor;
    }
    // Grow an upper bracket; the saturation check guarantees one exists.
    let mut hi = reference;
    let mut guard = 0;
    while link.capacity_bits(hi, e) < bits {
        hi *= 4.0;
        guard += 1;
        if guard > 600 {
            break;
        }
    }
    // Concavity through the origin: capacity(theta * t) >= theta *
    // capacity(t) for theta <= 1, so scaling the bracket down by the bit
    // ratio keeps it an upper bound.  Two passes tighten it well.
    for _ in 0..2 {
        let ratio = bits / link.capacity_bits(hi, e);
        if ratio < 1.0 {
            hi = (hi * ratio).max(floor);
        }
    }
    if link.capacity_bits(hi, e) < bits {
        hi *= 1.0 + 1e-12;
    }
    let mut lo = hi;
    let mut guard = 0;
    while link.capacity_bits(lo, e) >= bits && lo > floor {
        lo = (lo * 1e-3).max(floor);
        guard += 1;
        if guard > 200 {
            break;
        }
    }
    for _ in 0..iterations {
        let mid = math::sqrt(lo * hi);
        if link.capacity_bits(mid, e) >= bits {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Literal primal-dual minimum time: multiplier ascent with the configured
/// capacity step around time descent with the configured time step.
/// Returns `(min_time, price, converged)`.
fn subgradient_min_time(
    link: &CommLink,
    e: f64,
    bits: f64,
    start: f64,
    reference: f64,
    config: &SolverConfig,
) -> (f64, f64, bool) {
    let floor = reference * TIME_FLOOR_FRACTION;
    let ceiling = reference * 1e6;
    let mut t = start.clamp(floor, ceiling);
    let mut price = config.initial_price;
    let mut converged = false;
    for i in 1..=config.max_dual_steps {
        let decay = 1.0 / math::sqrt(i as f64);
        // Descend the Lagrangian in t at the current price.
        for j in 1..=40u32 {
            let gradient = 1.0 - price * rate_slope(link, t, e);
            let step = config.step_time / math::sqrt(j as f64);
            let next = (t - step * gradient).clamp(floor, ceiling);
            let done = (next - t).abs() <= 1e-13 * t.abs();
            t = next;
            if done {
                break;
            }
        }
        let slack_bits = bits - link.capacity_bits(t, e);
        let step =
            config.step_time_price * decay * (slack_bits / link.n).clamp(-1e6, 1e6);
        price = (price + step).max(0.0);
        let stationarity = 1.0 - price * rate_slope(link, t, e);
        if slack_bits.abs() <= 1e-6 * bits.max(1.0) && stationarity.abs() <= 1e-5 {
            converged = true;
            break;
        }
    }
    (t, price, converged)
}

/// Solves the time stage at fixed distortions and transmit energies.
///
/// Returns minimum times, the total minimum latency, the throughput gaps,
/// the multipliers, and the updated times (minimum plus surplus share).
/// Fails when a device's bit requirement exceeds its channel's saturation
/// limit, or when sensing and computation alone exceed the latency budget.
pub fn allocate_comm_time(
    devices: &[DeviceProfile],
    sys: &SystemParams,
    transformed: &TransformedAllocation,
    config: &SolverConfig,
) -> Result<TimeAllocation, SolverError> {
    let k_count = devices.len();
    assert_eq!(transformed.comm_time.len(), k_count);
    let fixed_time: f64 = devices
        .iter()
        .map(|d| d.sensing_time + d.computation_time)
        .sum();
    let available = sys.latency_budget - fixed_time;
    if available <= 0.0 {
        return Err(SolverError::Infeasible {
            constraint: Constraint::Latency,
            detail: format!(
                "sensing and computation need {fixed_time} s of the {} s budget, \
                 leaving no communication time",
                sys.latency_budget
            ),
        });
    }
    let reference = available / k_count as f64;

    let links: Vec<CommLink> = devices.iter().map(|d| CommLink::new(d, sys)).collect();
    let mut min_time = Vec::with_capacity(k_count);
    let mut time_price = Vec::with_capacity(k_count);
    let mut throughput_gap = Vec::with_capacity(k_count);
    let mut required_bits = Vec::with_capacity(k_count);
    let mut converged = true;
    for (k, link) in links.iter().enumerate() {
        let e = transformed.comm_energy[k];
        let d = transformed.quant_distortion[k];
        let bits = link.n * math::log2_1p(1.0 / d);
        let limit = link.capacity_bits_limit(e);
        if bits >= limit * (1.0 - SATURATION_MARGIN) {
            return Err(SolverError::Infeasible {
                constraint: Constraint::Capacity { device: k },
                detail: format!(
                    "requires {bits:.3} bits but the channel saturates at \
                     {limit:.3} bits for any finite time \
                     (transmit energy {e:.3e} J)"
                ),
            });
        }
        let (t_min, price) = match config.dual_method {
            DualMethod::ExactBoundary => {
                let t = exact_min_time(link, e, bits, reference, config.bisection_iterations);
                let slope = rate_slope(link, t, e);
                (t, if slope > 0.0 { 1.0 / slope } else { 0.0 })
            }
            DualMethod::Subgradient => {
                let (t, price, ok) = subgradient_min_time(
                    link,
                    e,
                    bits,
                    transformed.comm_time[k],
                    reference,
                    config,
                );
                converged &= ok;
                (t, price)
            }
        };
        throughput_gap.push(bits - link.capacity_bits(t_min, e));
        required_bits.push(bits);
        min_time.push(t_min);
        time_price.push(price);
    }

    let min_total_comm: f64 = min_time.iter().sum();
    let total_min = min_total_comm + fixed_time;
    let surplus = available - min_total_comm;

    // Bisection residue must not masquerade as redistribution weights.
    let snapped: Vec<f64> = throughput_gap
        .iter()
        .zip(&required_bits)
        .map(|(&gap, &bits)| {
            if gap.abs() <= GAP_NOISE_RELATIVE * bits.max(1.0) {
                0.0
            } else {
                gap
            }
        })
        .collect();
    let increments = redistribute_surplus(&snapped, surplus);
    let floor = reference * TIME_FLOOR_FRACTION;
    let comm_time: Vec<f64> = min_time
        .iter()
        .zip(&increments)
        .map(|(&t, &inc)| (t + inc).max(floor))
        .collect();

    Ok(TimeAllocation {
        comm_time,
        min_time,
        total_min,
        surplus,
        throughput_gap,
        time_price,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn device(channel_gain: f64) -> DeviceProfile {
        DeviceProfile {
            feature_count: 2,
            clutter_variance: 0.5,
            quantization_variance: 1.0,
            sensing_time: 0.5,
            computation_time: 0.1,
            computation_energy: 0.01,
            energy_budget: 0.15,
            channel_gain,
        }
    }

    fn system() -> SystemParams {
        SystemParams {
            sensing_noise: 1.0,
            latency_budget: 1.85,
            bandwidth: 200.0,
            channel_noise: 1e-12,
        }
    }

    #[test]
    fn redistribute_matches_hand_example() {
        let inc = redistribute_surplus(&[2.0, 1.0, 1.0], 0.4);
        assert!((inc[0] - 0.2).abs() < 1e-15);
        assert!((inc[1] - 0.1).abs() < 1e-15);
        assert!((inc[2] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn redistribute_equal_gaps_split_evenly() {
        let inc = redistribute_surplus(&[3.0, 3.0], 0.5);
        assert_eq!(inc, alloc::vec![0.25, 0.25]);
    }

    #[test]
    fn redistribute_zero_gaps_split_evenly() {
        let inc = redistribute_surplus(&[0.0, 0.0, 0.0, 0.0], 0.8);
        for i in inc {
            assert!((i - 0.2).abs() < 1e-15);
        }
    }

    #[test]
    fn redistribute_conserves_surplus() {
        let inc = redistribute_surplus(&[1.0, 0.0, 2.5, -0.5], 0.7);
        let total: f64 = inc.iter().sum();
        assert!((total - 0.7).abs() < 1e-12);
        assert_eq!(inc[3], 0.0, "negative gaps get nothing");
    }

    fn transformed_for(devices: &[DeviceProfile], d: f64, e: f64) -> TransformedAllocation {
        let k = devices.len();
        TransformedAllocation {
            sensing_distortion: alloc::vec![1.0; k],
            quant_distortion: alloc::vec![d; k],
            comm_energy: alloc::vec![e; k],
            comm_time: alloc::vec![0.4; k],
        }
    }

    #[test]
    fn minimum_time_is_tight_and_times_exhaust_the_budget() {
        let devs = [device(3e-12), device(1e-12)];
        let sys = system();
        let ta = transformed_for(&devs, 0.05, 0.05);
        let out = allocate_comm_time(&devs, &sys, &ta, &SolverConfig::default()).unwrap();
        for k in 0..2 {
            let link = CommLink::new(&devs[k], &sys);
            let bits = link.n * math::log2_1p(1.0 / 0.05);
            let cap = link.capacity_bits(out.min_time[k], 0.05);
            assert!(
                (cap - bits).abs() <= 1e-9 * bits,
                "device {k}: capacity {cap} at min time vs {bits} required"
            );
        }
        let fixed: f64 = devs.iter().map(|d| d.sensing_time + d.computation_time).sum();
        let total: f64 = out.comm_time.iter().sum::<f64>() + fixed;
        assert!((total - sys.latency_budget).abs() < 1e-12 * sys.latency_budget);
        assert!(out.surplus > 0.0);
        assert!(out.converged);
        // Tiny residual gaps snap to the equal-split tie-break.
        assert!((out.comm_time[0] - out.min_time[0] - out.surplus / 2.0).abs() < 1e-12);
    }

    #[test]
    fn multiplier_matches_rate_slope() {
        let devs = [device(3e-12)];
        let sys = system();
        let ta = transformed_for(&devs, 0.05, 0.05);
        let out = allocate_comm_time(&devs, &sys, &ta, &SolverConfig::default()).unwrap();
        let link = CommLink::new(&devs[0], &sys);
        let slope = rate_slope(&link, out.min_time[0], 0.05);
        assert!((out.time_price[0] * slope - 1.0).abs() < 1e-9);
    }

    #[test]
    fn saturated_channel_is_reported_infeasible() {
        let mut dev = device(3e-12);
        // 16-bit quantization of 50 features demands 800 bits; at this
        // transmit energy the channel saturates near 43 bits however long
        // the slot stretches.
        dev.feature_count = 50;
        let devs = [dev];
        let sys = system();
        let d = 1.0 / ((1u64 << 16) as f64 - 1.0);
        let ta = transformed_for(&devs, d, 0.05);
        let err = allocate_comm_time(&devs, &sys, &ta, &SolverConfig::default()).unwrap_err();
        match err {
            SolverError::Infeasible {
                constraint: Constraint::Capacity { device },
                ..
            } => assert_eq!(device, 0),
            other => panic!("wrong error: {other}"),
        }
    }

    #[test]
    fn negligible_requirement_gets_the_floor_share() {
        let devs = [device(3e-12), device(3e-12)];
        let sys = system();
        let mut ta = transformed_for(&devs, 0.05, 0.05);
        ta.quant_distortion[1] = 1e200;
        let out = allocate_comm_time(&devs, &sys, &ta, &SolverConfig::default()).unwrap();
        assert!(out.min_time[1] > 0.0);
        assert!(out.min_time[1] < 1e-9 * out.min_time[0]);
    }

    #[test]
    fn subgradient_route_approximates_the_exact_minimum() {
        let devs = [device(3e-12)];
        let sys = system();
        let ta = transformed_for(&devs, 0.05, 0.05);
        let exact = allocate_comm_time(&devs, &sys, &ta, &SolverConfig::default()).unwrap();
        let config = SolverConfig {
            dual_method: DualMethod::Subgradient,
            ..SolverConfig::default()
        };
        let approx = allocate_comm_time(&devs, &sys, &ta, &config).unwrap();
        let rel = (approx.min_time[0] - exact.min_time[0]).abs() / exact.min_time[0];
        assert!(rel < 0.05, "subgradient min time off by {rel}");
    }

    #[test]
    fn subgradient_route_flags_corrupted_steps() {
        let devs = [device(3e-12)];
        let sys = system();
        let ta = transformed_for(&devs, 0.05, 0.05);
        let config = SolverConfig {
            dual_method: DualMethod::Subgradient,
            step_time_price: 1e4,
            step_time: 10.0,
            max_dual_steps: 500,
            ..SolverConfig::default()
        };
        let out = allocate_comm_time(&devs, &sys, &ta, &config).unwrap();
        assert!(!out.converged);
    }

    #[test]
    fn no_communication_window_is_latency_infeasible() {
        let devs: Vec<DeviceProfile> = (0..4).map(|_| device(3e-12)).collect();
        let mut sys = system();
        sys.latency_budget = 2.0;
        let ta = transformed_for(&devs, 0.05, 0.05);
        let err = allocate_comm_time(&devs, &sys, &ta, &SolverConfig::default()).unwrap_err();
        assert!(matches!(
            err,
            SolverError::Infeasible { constraint: Constraint::Latency, .. }
        ));
    }
}
