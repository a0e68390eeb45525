//! The inner subproblem at fixed auxiliary weights: alternation between
//! the power/quantization stage and the communication-time stage.
//!
//! Each alternation runs the time stage at the current distortions — the
//! minimum-time computation, the surplus redistribution, and (under the
//! default exact method) a marginal-balancing refinement of the split —
//! and then re-solves the per-device power/quantization stage at the new
//! times.  The weighted inner objective is recorded after every
//! power/quantization stage; re-optimizing at times that keep the previous
//! point feasible can only improve it, so the trace is monotone.
//!
//! Baselines pin one coordinate; the pinned coordinate is excluded from
//! the corresponding stage and the rest of the machinery runs unchanged.

use alloc::format;
use alloc::vec::Vec;

use crate::math;
use crate::model::{Constraint, DeviceProfile, SystemParams, TransformedAllocation};

use super::device::{log_gap, CommLink};
use super::power::{power_stage, PowerQuantSolution};
use super::split::{optimize_split, TimeStake, TimeValueKind};
use super::terms::{AuxiliaryVars, RatioSystem};
use super::time::allocate_comm_time;
use super::{DualMethod, DualState, SolverConfig, SolverError};

/// Fraction of the available communication time parked on each
/// gain-inert device.
const INERT_TOKEN_FRACTION: f64 = 1e-9;

/// Relative safety margin keeping pinned-quantization time floors strictly
/// inside the feasible region.
const QUANT_FLOOR_MARGIN: f64 = 1e-6;

/// A baseline's pinned coordinate, if any.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Pin {
    /// Full optimization over every coordinate.
    None,
    /// Sensing power pinned, fixing the sensing distortion; all residual
    /// energy is committed to transmission.
    SensingPower { sensing_distortion: Vec<f64> },
    /// Communication times pinned; no time stage runs.
    CommTime { comm_time: Vec<f64> },
    /// Quantization distortion pinned; transmission must carry the fixed
    /// bit load, and leftover energy buys sensing accuracy.
    Quantization { quant_distortion: Vec<f64> },
}

/// Converged inner solution at fixed auxiliary weights.
#[derive(Debug, Clone)]
pub(crate) struct InnerSolution {
    pub transformed: TransformedAllocation,
    pub duals: DualState,
    pub gain_inert: Vec<bool>,
    /// Weighted inner objective after each power/quantization stage.
    pub objective_trace: Vec<f64>,
    pub alternations: usize,
    pub converged: bool,
}

/// Available communication time, or the latency error when sensing and
/// computation alone exceed the budget.
pub(crate) fn available_comm_time(
    devices: &[DeviceProfile],
    sys: &SystemParams,
) -> Result<f64, SolverError> {
    let fixed: f64 = devices
        .iter()
        .map(|d| d.sensing_time + d.computation_time)
        .sum();
    let available = sys.latency_budget - fixed;
    if available <= 0.0 {
        return Err(SolverError::Infeasible {
            constraint: Constraint::Latency,
            detail: format!(
                "sensing and computation need {fixed} s of the {} s latency \
                 budget, leaving no communication time",
                sys.latency_budget
            ),
        });
    }
    Ok(available)
}

/// The power/quantization stage under a pin.
fn distortion_stage(
    links: &[CommLink],
    weights: &[f64],
    comm_time: &[f64],
    pin: &Pin,
    config: &SolverConfig,
) -> Result<PowerQuantSolution, SolverError> {
    match pin {
        Pin::None => Ok(power_stage(links, weights, comm_time, config)),
        Pin::CommTime { .. } => Ok(power_stage(links, weights, comm_time, config)),
        Pin::SensingPower { sensing_distortion } => {
            let k_count = links.len();
            let mut sol = pinned_shell(links, weights, comm_time);
            for k in 0..k_count {
                let link = &links[k];
                let s = sensing_distortion[k];
                let e = (link.disposable - link.sensing_energy / s).max(0.0);
                let d = link
                    .tight_quant_distortion(comm_time[k], e)
                    .clamp(1e-300, 1e300);
                sol.transformed.sensing_distortion[k] = s;
                sol.transformed.comm_energy[k] = e;
                sol.transformed.quant_distortion[k] = d;
                let w = weights[k];
                if w > 0.0 {
                    let alpha = w * math::LN_2 * d * (d + 1.0) / link.n;
                    sol.duals.capacity_price[k] = alpha;
                    // Energy shadow consistent with the transmit-energy
                    // stationarity at the committed energy.
                    sol.duals.energy_price[k] = alpha * rate_energy_slope(link, comm_time[k], e);
                    sol.objective += w * (s + d);
                }
            }
            Ok(sol)
        }
        Pin::Quantization { quant_distortion } => {
            let k_count = links.len();
            let mut sol = pinned_shell(links, weights, comm_time);
            for k in 0..k_count {
                let link = &links[k];
                let d = quant_distortion[k];
                let bits = link.n * math::log2_1p(1.0 / d);
                let e = link.required_comm_energy(comm_time[k], bits);
                if e >= link.disposable {
                    return Err(SolverError::Infeasible {
                        constraint: Constraint::Energy { device: k },
                        detail: format!(
                            "pinned quantization needs {e:.3e} J of transmit \
                             energy in {} s but only {:.3e} J is disposable",
                            comm_time[k], link.disposable
                        ),
                    });
                }
                let s = link.tight_sensing_distortion(e);
                sol.transformed.sensing_distortion[k] = s;
                sol.transformed.comm_energy[k] = e;
                sol.transformed.quant_distortion[k] = d;
                let w = weights[k];
                if w > 0.0 {
                    let beta = w * s * s / link.sensing_energy;
                    sol.duals.energy_price[k] = beta;
                    let rate_slope_e = rate_energy_slope(link, comm_time[k], e);
                    sol.duals.capacity_price[k] =
                        if rate_slope_e > 0.0 { beta / rate_slope_e } else { 0.0 };
                    sol.objective += w * (s + d);
                }
            }
            Ok(sol)
        }
    }
}

/// Empty per-device solution shell for the pinned stages.
fn pinned_shell(
    links: &[CommLink],
    weights: &[f64],
    comm_time: &[f64],
) -> PowerQuantSolution {
    let k_count = links.len();
    PowerQuantSolution {
        transformed: TransformedAllocation {
            sensing_distortion: alloc::vec![0.0; k_count],
            quant_distortion: alloc::vec![0.0; k_count],
            comm_energy: alloc::vec![0.0; k_count],
            comm_time: comm_time.to_vec(),
        },
        duals: DualState::zeros(k_count),
        gain_inert: weights.iter().map(|&w| w == 0.0).collect(),
        objective: 0.0,
        converged: true,
        dual_steps: 0,
    }
}

/// `d rate / d energy` in bits per joule at fixed time.
fn rate_energy_slope(link: &CommLink, t: f64, e: f64) -> f64 {
    t * link.bandwidth * link.channel_gain
        / (math::LN_2 * (t * link.channel_noise + e * link.channel_gain))
}

/// Splits the available time across active devices by balancing weighted
/// marginals; inert devices keep a token share.
fn refined_split(
    links: &[CommLink],
    weights: &[f64],
    pin: &Pin,
    floors: &[f64],
    available: f64,
    config: &SolverConfig,
) -> Vec<f64> {
    let k_count = links.len();
    let token = available * INERT_TOKEN_FRACTION;
    let active: Vec<usize> = (0..k_count).filter(|&k| weights[k] > 0.0).collect();
    let mut times = alloc::vec![token; k_count];
    if active.is_empty() {
        // Nothing drives the split; share equally.
        for t in times.iter_mut() {
            *t = available / k_count as f64;
        }
        return times;
    }
    let active_budget = available - token * (k_count - active.len()) as f64;
    let stakes: Vec<TimeStake<'_>> = active
        .iter()
        .map(|&k| TimeStake {
            link: &links[k],
            weight: weights[k],
            kind: match pin {
                Pin::SensingPower { sensing_distortion } => {
                    let link = &links[k];
                    let e = (link.disposable
                        - link.sensing_energy / sensing_distortion[k])
                        .max(0.0);
                    TimeValueKind::FixedEnergy { energy: e }
                }
                Pin::Quantization { quant_distortion } => {
                    let bits =
                        links[k].n * math::log2_1p(1.0 / quant_distortion[k]);
                    TimeValueKind::RequiredEnergy { bits }
                }
                _ => TimeValueKind::OptimalEnergy,
            },
            min_time: floors[k],
        })
        .collect();
    let shares = optimize_split(&stakes, active_budget, config.bisection_iterations);
    for (slot, share) in active.iter().zip(shares) {
        times[*slot] = share;
    }
    times
}

/// Per-device minimum times for a pinned quantizer, using every joule of
/// disposable energy; errors if a device can never carry its bit load or
/// the floors collectively exceed the budget.
fn quant_pin_floors(
    links: &[CommLink],
    quant_distortion: &[f64],
    available: f64,
    config: &SolverConfig,
) -> Result<Vec<f64>, SolverError> {
    let mut floors = Vec::with_capacity(links.len());
    for (k, link) in links.iter().enumerate() {
        let d = quant_distortion[k];
        let bits = link.n * math::log2_1p(1.0 / d);
        let e_max = link.disposable * (1.0 - QUANT_FLOOR_MARGIN);
        let limit = link.capacity_bits_limit(e_max);
        if bits >= limit * (1.0 - 1e-9) {
            return Err(SolverError::Infeasible {
                constraint: Constraint::Capacity { device: k },
                detail: format!(
                    "pinned quantization requires {bits:.3} bits but the \
                     channel saturates at {limit:.3} bits even with all \
                     {e_max:.3e} J committed to transmission"
                ),
            });
        }
        let t = min_time_at_energy(link, e_max, bits, available, config);
        floors.push(t * (1.0 + QUANT_FLOOR_MARGIN));
    }
    let total: f64 = floors.iter().sum();
    if total >= available {
        return Err(SolverError::Infeasible {
            constraint: Constraint::Latency,
            detail: format!(
                "pinned quantization needs at least {total:.6} s of \
                 communication time but only {available:.6} s is available"
            ),
        });
    }
    Ok(floors)
}

/// Minimum `t` with `capacity_bits(t, e) >= bits` (log-space bisection).
fn min_time_at_energy(
    link: &CommLink,
    e: f64,
    bits: f64,
    reference: f64,
    config: &SolverConfig,
) -> f64 {
    let floor = reference * 1e-12;
    if link.capacity_bits(floor, e) >= bits {
        return floor;
    }
    let mut hi = reference;
    let mut guard = 0;
    while link.capacity_bits(hi, e) < bits {
        hi *= 4.0;
        guard += 1;
        if guard > 600 {
            break;
        }
    }
    let mut lo = floor;
    for _ in 0..config.bisection_iterations {
        let mid = math::sqrt(lo * hi);
        if link.capacity_bits(mid, e) >= bits {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Solves the inner subproblem by stage alternation.
pub(crate) fn solve_inner(
    system: &RatioSystem,
    aux: &AuxiliaryVars,
    devices: &[DeviceProfile],
    sys: &SystemParams,
    start: &TransformedAllocation,
    pin: &Pin,
    config: &SolverConfig,
) -> Result<InnerSolution, SolverError> {
    let k_count = devices.len();
    let available = available_comm_time(devices, sys)?;
    let links: Vec<CommLink> = devices.iter().map(|d| CommLink::new(d, sys)).collect();
    let weights = system.gain_weights(aux);

    let mut times = match pin {
        Pin::CommTime { comm_time } => comm_time.clone(),
        _ => start.comm_time.clone(),
    };
    let mut sol = distortion_stage(&links, &weights, &times, pin, config)?;
    let mut trace = alloc::vec![system.inner_objective(aux, &sol.transformed)];
    let mut time_price = alloc::vec![0.0; k_count];
    let mut time_converged = true;
    let mut alternations = 0;
    let mut settled = matches!(pin, Pin::CommTime { .. });

    while !settled && alternations < config.max_alternations {
        alternations += 1;

        // Literal time stage: minimum times, surplus redistribution, and
        // multiplier recovery at the current distortions.
        match allocate_comm_time(devices, sys, &sol.transformed, config) {
            Ok(stage) => {
                time_price = stage.time_price.clone();
                time_converged &= stage.converged;
                times = stage.comm_time;
            }
            Err(e @ SolverError::Infeasible { constraint: Constraint::Latency, .. }) => {
                return Err(e);
            }
            Err(e) => {
                // A capacity-saturation report at an adaptive quantizer can
                // only be the boundary-margin artifact (the current point
                // carries its own bits by construction); keep the current
                // times and recover the multipliers directly.  With a
                // pinned quantizer it is real and fatal.
                if matches!(pin, Pin::Quantization { .. }) {
                    return Err(e);
                }
                for k in 0..k_count {
                    let slope = link_rate_slope(&links[k], times[k], sol.transformed.comm_energy[k]);
                    time_price[k] = if slope > 0.0 { 1.0 / slope } else { 0.0 };
                }
            }
        }

        // Refinement: balance the weighted time marginals exactly (the
        // literal update alone cannot move an already-tight iterate).
        if config.dual_method == DualMethod::ExactBoundary {
            let floors = match pin {
                Pin::Quantization { quant_distortion } => {
                    quant_pin_floors(&links, quant_distortion, available, config)?
                }
                _ => alloc::vec![0.0; k_count],
            };
            times = refined_split(&links, &weights, pin, &floors, available, config);
        }

        let candidate = distortion_stage(&links, &weights, &times, pin, config)?;
        let objective = system.inner_objective(aux, &candidate.transformed);
        let prev = *trace.last().unwrap();
        if objective < prev - 1e-12 * prev.abs().max(1.0) {
            // The update failed to improve (possible only through numeric
            // dust in the split search); keep the previous iterate.
            times = sol.transformed.comm_time.clone();
            settled = true;
            continue;
        }
        sol = candidate;
        trace.push(objective);
        if (objective - prev).abs()
            <= config.alternation_tolerance * prev.abs().max(1.0)
        {
            settled = true;
        }
    }

    let mut duals = sol.duals.clone();
    duals.time_price = time_price;
    Ok(InnerSolution {
        transformed: sol.transformed,
        duals,
        gain_inert: sol.gain_inert,
        objective_trace: trace,
        alternations,
        converged: sol.converged && time_converged && settled,
    })
}

/// `d rate / d t` in bits per second at fixed transmit energy.
fn link_rate_slope(link: &CommLink, t: f64, e: f64) -> f64 {
    link.bandwidth / math::LN_2 * log_gap(link.snr(t, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ClassStatistics, FeatureStatistics};

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

    fn stats(devices: usize) -> ClassStatistics {
        ClassStatistics {
            num_classes: 2,
            per_device: (0..devices)
                .map(|_| FeatureStatistics {
                    centroids: vec![vec![0.0, 0.0], vec![2.0, 1.0]],
                    variances: vec![1.0, 1.0],
                })
                .collect(),
        }
    }

    fn warm_start(devices: &[DeviceProfile], sys: &SystemParams) -> TransformedAllocation {
        let k = devices.len();
        let available = available_comm_time(devices, sys).unwrap();
        TransformedAllocation {
            sensing_distortion: alloc::vec![10.0; k],
            quant_distortion: alloc::vec![10.0; k],
            comm_energy: alloc::vec![1e-3; k],
            comm_time: alloc::vec![available / k as f64; k],
        }
    }

    fn run(
        devices: &[DeviceProfile],
        sys: &SystemParams,
        pin: &Pin,
        config: &SolverConfig,
    ) -> InnerSolution {
        let st = stats(devices.len());
        let ratio = RatioSystem::build(&st, devices);
        let start = warm_start(devices, sys);
        let aux = ratio.aux_at(&start);
        solve_inner(&ratio, &aux, devices, sys, &start, pin, config).unwrap()
    }

    #[test]
    fn trace_is_monotone_and_short_for_a_single_device() {
        let devs = [device(3e-12)];
        let sol = run(&devs, &system(), &Pin::None, &SolverConfig::default());
        assert!(sol.converged);
        assert!(sol.alternations <= 3, "took {} alternations", sol.alternations);
        for pair in sol.objective_trace.windows(2) {
            assert!(pair[1] >= pair[0] - 1e-8 * pair[0].abs().max(1.0));
        }
        // One device: all available time goes to it.
        let available = available_comm_time(&devs, &system()).unwrap();
        assert!((sol.transformed.comm_time[0] - available).abs() < 1e-9 * available);
    }

    #[test]
    fn symmetric_devices_get_symmetric_times() {
        let devs = [device(3e-12), device(3e-12)];
        let sol = run(&devs, &system(), &Pin::None, &SolverConfig::default());
        let t = &sol.transformed.comm_time;
        assert!((t[0] - t[1]).abs() < 1e-9 * t[0], "{t:?}");
    }

    #[test]
    fn asymmetric_channels_tilt_the_split_but_stay_monotone() {
        let devs = [device(3e-12), device(3e-13)];
        let sol = run(&devs, &system(), &Pin::None, &SolverConfig::default());
        for pair in sol.objective_trace.windows(2) {
            assert!(pair[1] >= pair[0] - 1e-8 * pair[0].abs().max(1.0));
        }
        assert!(sol.converged);
        let available = available_comm_time(&devs, &system()).unwrap();
        let total: f64 = sol.transformed.comm_time.iter().sum();
        assert!((total - available).abs() < 1e-9 * available);
    }

    #[test]
    fn tighter_latency_never_improves_the_objective() {
        let devs = [device(3e-12), device(1e-12)];
        let mut sys = system();
        let loose = run(&devs, &sys, &Pin::None, &SolverConfig::default());
        sys.latency_budget = 1.8 + 0.9 * (1.85 - 1.8);
        let tight = run(&devs, &sys, &Pin::None, &SolverConfig::default());
        let loose_obj = *loose.objective_trace.last().unwrap();
        let tight_obj = *tight.objective_trace.last().unwrap();
        assert!(
            tight_obj <= loose_obj + 1e-8 * loose_obj.abs().max(1.0),
            "tight {tight_obj} vs loose {loose_obj}"
        );
    }

    #[test]
    fn pinned_times_skip_the_time_stage() {
        let devs = [device(3e-12), device(1e-12)];
        let available = available_comm_time(&devs, &system()).unwrap();
        let pin = Pin::CommTime {
            comm_time: alloc::vec![available / 2.0; 2],
        };
        let sol = run(&devs, &system(), &pin, &SolverConfig::default());
        assert_eq!(sol.alternations, 0);
        assert!((sol.transformed.comm_time[0] - available / 2.0).abs() < 1e-15);
        assert!(sol.converged);
    }

    #[test]
    fn pinned_sensing_power_holds_sensing_distortion_fixed() {
        let devs = [device(3e-12), device(1e-12)];
        // Pins must clear the energy floor sensing_energy / disposable
        // (~3.57 here) or the sensing spend alone exhausts the budget.
        let pin = Pin::SensingPower {
            sensing_distortion: alloc::vec![5.0, 6.0],
        };
        let sol = run(&devs, &system(), &pin, &SolverConfig::default());
        assert!((sol.transformed.sensing_distortion[0] - 5.0).abs() < 1e-15);
        assert!((sol.transformed.sensing_distortion[1] - 6.0).abs() < 1e-15);
        for pair in sol.objective_trace.windows(2) {
            assert!(pair[1] >= pair[0] - 1e-8 * pair[0].abs().max(1.0));
        }
        // All residual energy is committed to transmission.
        let sys = system();
        for (k, dev) in devs.iter().enumerate() {
            let link = CommLink::new(dev, &sys);
            let expected = link.disposable
                - link.sensing_energy / sol.transformed.sensing_distortion[k];
            assert!((sol.transformed.comm_energy[k] - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn feasible_quantization_pin_respects_its_time_floors() {
        let devs = [device(3e-12), device(1e-12)];
        let sys = system();
        let pin = Pin::Quantization {
            quant_distortion: alloc::vec![0.05, 0.05],
        };
        let sol = run(&devs, &sys, &pin, &SolverConfig::default());
        assert!((sol.transformed.quant_distortion[0] - 0.05).abs() < 1e-15);
        for k in 0..2 {
            let link = CommLink::new(&devs[k], &sys);
            let bits = link.n * math::log2_1p(1.0 / 0.05);
            let capacity =
                link.capacity_bits(sol.transformed.comm_time[k], sol.transformed.comm_energy[k]);
            assert!(
                capacity >= bits * (1.0 - 1e-9),
                "device {k} carries {capacity} of {bits} bits"
            );
            assert!(sol.transformed.comm_energy[k] < link.disposable);
        }
    }

    #[test]
    fn impossible_quantization_pin_is_infeasible() {
        // 16-bit features over 2 elements need 32 bits; shrink the budget
        // until the channel saturates below that.
        let mut dev = device(3e-12);
        dev.energy_budget = 0.0101;
        let devs = [dev];
        let pin = Pin::Quantization {
            quant_distortion: alloc::vec![1.0 / ((1u64 << 16) as f64 - 1.0)],
        };
        let st = stats(1);
        let ratio = RatioSystem::build(&st, &devs);
        let sys = system();
        let start = warm_start(&devs, &sys);
        let aux = ratio.aux_at(&start);
        let err = solve_inner(&ratio, &aux, &devs, &sys, &start, &pin, &SolverConfig::default())
            .unwrap_err();
        assert!(matches!(err, SolverError::Infeasible { .. }), "{err}");
    }
}
