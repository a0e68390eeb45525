//! Independent correctness oracles for the solver.
//!
//! Two certification tools, deliberately built on nothing but the model
//! formulas in [`crate::model`]:
//!
//! * [`grid_optimum`] — a brute-force log-grid search over the decision
//!   variables of tiny instances, refined around the incumbent.  The gain
//!   is additive across devices and only the shared communication window
//!   couples them, so the grid maximum is found exactly by maximizing each
//!   device's candidates per time share and then joining shares — the same
//!   optimum naive enumeration of the full Cartesian grid would return,
//!   at a fraction of the cost.
//! * [`kkt_residual`] — a numerical first-order-condition checker that
//!   differentiates the original objective by central finite differences
//!   and reports stationarity, complementary slackness, and primal and
//!   dual feasibility separately.
//!
//! Both are cost-guarded to small instances; neither reuses the solver's
//! bisections, closed forms, or fixed-point machinery.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::math;
use crate::model::{
    check_feasibility, to_physical, ClassStatistics, Constraint, DeviceProfile,
    FeasibilityReport, SystemParams, TransformedAllocation,
};
use crate::solver::{DualState, SolverError};

/// Distortion clamp mirroring the representable range of the transform.
const DISTORTION_CEIL: f64 = 1e300;
const DISTORTION_FLOOR: f64 = 1e-300;

/// Tolerance when testing whether time shares fill the window.
const SHARE_SUM_TOLERANCE: f64 = 1e-12;

/// One log-spaced axis of the search grid.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LogAxis {
    /// Smallest grid value, strictly positive.
    pub lo: f64,
    /// Largest grid value, at least `lo`.
    pub hi: f64,
    /// Number of grid points, at least 3.
    pub count: usize,
}

impl LogAxis {
    pub fn new(lo: f64, hi: f64, count: usize) -> Self {
        LogAxis { lo, hi, count }
    }

    fn validate(&self, name: &str) -> Result<(), SolverError> {
        if !(self.lo > 0.0) || !(self.hi >= self.lo) || !self.hi.is_finite() {
            return Err(SolverError::InvalidConfig {
                what: format!(
                    "grid axis {name} needs 0 < lo <= hi < inf, got [{}, {}]",
                    self.lo, self.hi
                ),
            });
        }
        if self.count < 3 {
            return Err(SolverError::InvalidConfig {
                what: format!(
                    "grid axis {name} needs at least 3 points, got {}",
                    self.count
                ),
            });
        }
        Ok(())
    }

    /// The log-spaced grid points, inclusive of both endpoints.
    pub fn points(&self) -> Vec<f64> {
        let n = self.count;
        let ratio = self.hi / self.lo;
        (0..n)
            .map(|i| {
                if i + 1 == n {
                    self.hi
                } else {
                    self.lo * math::powf(ratio, i as f64 / (n as f64 - 1.0))
                }
            })
            .collect()
    }

    /// A new axis spanning ±1.5 grid steps around `center`, clamped to the
    /// bounds of `outer`.
    pub fn zoomed(&self, center: f64, outer: &LogAxis) -> LogAxis {
        let spacing = math::powf(self.hi / self.lo, 1.0 / (self.count as f64 - 1.0));
        let shrink = math::powf(spacing, 1.5);
        LogAxis {
            lo: (center / shrink).max(outer.lo),
            hi: (center * shrink).min(outer.hi),
            count: self.count,
        }
    }
}

/// Search-grid shape: one axis per decision-variable family.
///
/// The transmit-energy and share axes are absolute coordinates; the two
/// distortion axes are *backoff factors* (at least 1) applied to the
/// distortions that make the energy and capacity constraints tight at the
/// sampled energy and time.  Factor 1 lies on every axis, so the grid
/// always contains the boundary-tight candidates, and the backed-off
/// candidates demonstrate — rather than assume — that loosening either
/// constraint never wins.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GridSpec {
    /// Backoff factors multiplying the energy-tight sensing distortion.
    pub sensing_backoff: LogAxis,
    /// Backoff factors multiplying the capacity-tight quantization
    /// distortion.
    pub quant_backoff: LogAxis,
    /// Transmit energy as a fraction of each device's disposable energy.
    pub energy_fraction: LogAxis,
    /// Per-device share of the shared communication window.
    pub time_share: LogAxis,
    /// Number of refinement passes around the incumbent after the first.
    pub zoom_depth: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            sensing_backoff: LogAxis::new(1.0, 1.1, 4),
            quant_backoff: LogAxis::new(1.0, 1.1, 4),
            energy_fraction: LogAxis::new(1e-3, 0.999, 15),
            time_share: LogAxis::new(0.02, 1.0, 15),
            zoom_depth: 3,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<(), SolverError> {
        self.sensing_backoff.validate("sensing_backoff")?;
        self.quant_backoff.validate("quant_backoff")?;
        self.energy_fraction.validate("energy_fraction")?;
        self.time_share.validate("time_share")?;
        for (axis, name) in [
            (&self.sensing_backoff, "sensing_backoff"),
            (&self.quant_backoff, "quant_backoff"),
        ] {
            if axis.lo < 1.0 {
                return Err(SolverError::InvalidConfig {
                    what: format!("grid axis {name} holds backoff factors >= 1, got lo {}", axis.lo),
                });
            }
        }
        if self.energy_fraction.hi >= 1.0 {
            return Err(SolverError::InvalidConfig {
                what: format!(
                    "grid axis energy_fraction must stay below 1 (a device cannot \
                     commit its whole disposable budget to transmission), got hi {}",
                    self.energy_fraction.hi
                ),
            });
        }
        if self.time_share.hi > 1.0 {
            return Err(SolverError::InvalidConfig {
                what: format!(
                    "grid axis time_share holds window fractions <= 1, got hi {}",
                    self.time_share.hi
                ),
            });
        }
        Ok(())
    }
}

/// Outcome of the grid search, including the per-pass incumbent trace.
#[derive(Debug, Clone, PartialEq)]
pub struct GridReport {
    /// Best feasible grid point, in distortion coordinates.
    pub best: TransformedAllocation,
    /// Its total discriminant gain.
    pub gain: f64,
    /// Incumbent gain after each pass; non-decreasing by construction.
    pub incumbent_trace: Vec<f64>,
    /// Grid points whose gain was evaluated, summed over passes.
    pub evaluated: usize,
}

/// Per-device constants folded out of the gain expression.
struct DeviceTerms {
    /// `(squared centroid gap, per-element base variance)` for every
    /// (element, class pair) combination.
    pairs: Vec<(f64, f64)>,
    /// Sensing energy at unit sensing distortion, `sensing_noise * T_r`.
    sens_energy: f64,
    /// Energy budget minus computation energy.
    disposable: f64,
    /// Feature count as a float.
    n: f64,
    channel_gain: f64,
}

impl DeviceTerms {
    fn build(stats: &ClassStatistics, devices: &[DeviceProfile], sys: &SystemParams) -> Vec<Self> {
        devices
            .iter()
            .enumerate()
            .map(|(k, dev)| {
                let fs = &stats.per_device[k];
                let mut pairs = Vec::new();
                for n in 0..dev.feature_count {
                    for (l, lp) in stats.class_pairs() {
                        let gap = fs.centroids[l][n] - fs.centroids[lp][n];
                        pairs.push((gap * gap, fs.variances[n] + dev.clutter_variance));
                    }
                }
                DeviceTerms {
                    pairs,
                    sens_energy: sys.sensing_noise * dev.sensing_time,
                    disposable: dev.disposable_energy(),
                    n: dev.feature_count as f64,
                    channel_gain: dev.channel_gain,
                }
            })
            .collect()
    }

    /// Raw gain sum of this device; divide by the pair normalization once
    /// per total.
    fn raw_gain(&self, s: f64, d: f64) -> f64 {
        self.pairs
            .iter()
            .map(|&(gap_sq, base)| gap_sq / (base + s + d))
            .sum()
    }

    /// Quantization distortion that makes the required bits equal the
    /// channel capacity at `(t, e)`.
    fn capacity_tight_quant(&self, t: f64, e: f64, sys: &SystemParams) -> f64 {
        let capacity =
            channel_capacity_bits_local(t, sys.bandwidth, e, self.channel_gain, sys.channel_noise);
        (1.0 / math::exp_m1(capacity / self.n * math::LN_2))
            .clamp(DISTORTION_FLOOR, DISTORTION_CEIL)
    }
}

/// Local capacity expression; kept here so the oracle reads top-to-bottom
/// from primitive formulas.
fn channel_capacity_bits_local(
    t: f64,
    bandwidth: f64,
    e: f64,
    channel_gain: f64,
    channel_noise: f64,
) -> f64 {
    t * bandwidth * math::log2_1p(e * channel_gain / (t * channel_noise))
}

/// Best candidate of one device at one time share.
#[derive(Clone, Copy)]
struct Candidate {
    raw_gain: f64,
    s: f64,
    d: f64,
    e: f64,
    e_frac: f64,
}

/// Per-pass winner with enough coordinates to zoom and to rebuild the
/// allocation.
#[derive(Clone)]
struct Incumbent {
    gain: f64,
    share: Vec<f64>,
    picks: Vec<Candidate>,
}

/// Cost-guard limits of the grid oracle.
const GUARD_DEVICES: usize = 2;
const GUARD_FEATURES: usize = 2;
const GUARD_CLASSES: usize = 3;

/// Exhaustive log-grid search for the gain optimum of a tiny instance.
///
/// Evaluates the gain of every feasible grid point (see [`GridSpec`] for
/// the grid layout), keeps the best, and refines the energy and time axes
/// around the incumbent `zoom_depth` times.  The incumbent never regresses
/// across passes.  Returns the best transformed allocation and its gain.
///
/// # Errors
///
/// Rejects instances beyond `K <= 2`, `N_k <= 2`, `L <= 3` (cost guard),
/// invalid grids or model inputs, and instances with no feasible grid
/// point (for example when sensing and computation alone exceed the
/// latency budget).
pub fn grid_optimum(
    stats: &ClassStatistics,
    devices: &[DeviceProfile],
    sys: &SystemParams,
    grid: &GridSpec,
) -> Result<(TransformedAllocation, f64), SolverError> {
    grid_optimum_detailed(stats, devices, sys, grid).map(|r| (r.best, r.gain))
}

/// [`grid_optimum`] with the incumbent trace and evaluation counters.
pub fn grid_optimum_detailed(
    stats: &ClassStatistics,
    devices: &[DeviceProfile],
    sys: &SystemParams,
    grid: &GridSpec,
) -> Result<GridReport, SolverError> {
    grid.validate()?;
    sys.validate()?;
    for (k, dev) in devices.iter().enumerate() {
        dev.validate(k)?;
    }
    stats.validate(devices)?;
    guard(stats, devices)?;

    let k_count = devices.len();
    let overhead: f64 = devices
        .iter()
        .map(|d| d.sensing_time + d.computation_time)
        .sum();
    let window = sys.latency_budget - overhead;
    if window <= 0.0 {
        return Err(no_feasible_point(format!(
            "sensing and computation alone need {overhead} s of the {} s latency budget",
            sys.latency_budget
        )));
    }

    let terms = DeviceTerms::build(stats, devices, sys);
    let l = stats.num_classes as f64;
    let pair_scale = l * (l - 1.0) / 2.0;

    // Per-device zoomable axes; backoff axes stay fixed so every pass
    // re-demonstrates that the constraint-tight candidates win.
    let mut e_axes: Vec<LogAxis> = (0..k_count).map(|_| grid.energy_fraction.clone()).collect();
    let mut t_axes: Vec<LogAxis> = (0..k_count).map(|_| grid.time_share.clone()).collect();
    let s_factors = grid.sensing_backoff.points();
    let d_factors = grid.quant_backoff.points();

    let mut best: Option<Incumbent> = None;
    let mut trace = Vec::new();
    let mut evaluated = 0usize;

    for _pass in 0..=grid.zoom_depth {
        // Best candidate of each device at each of its time shares; the
        // gain is additive across devices, so joining per-share maxima is
        // exactly the grid maximum.
        let share_points: Vec<Vec<f64>> = t_axes.iter().map(|a| a.points()).collect();
        let mut per_share: Vec<Vec<Candidate>> = Vec::with_capacity(k_count);
        for k in 0..k_count {
            let dev = &terms[k];
            let mut row = Vec::with_capacity(share_points[k].len());
            for &share in &share_points[k] {
                let t = share * window;
                let mut cand: Option<Candidate> = None;
                for &e_frac in &e_axes[k].points() {
                    let e = e_frac * dev.disposable;
                    let s_tight = dev.sens_energy / (dev.disposable - e);
                    let d_tight = dev.capacity_tight_quant(t, e, sys);
                    for &sf in &s_factors {
                        let s = s_tight * sf;
                        for &df in &d_factors {
                            let d = (d_tight * df).min(DISTORTION_CEIL);
                            let raw = dev.raw_gain(s, d);
                            evaluated += 1;
                            if cand.as_ref().map_or(true, |c| raw > c.raw_gain) {
                                cand = Some(Candidate {
                                    raw_gain: raw,
                                    s,
                                    d,
                                    e,
                                    e_frac,
                                });
                            }
                        }
                    }
                }
                row.push(cand.expect("axes are non-empty"));
            }
            per_share.push(row);
        }

        // Join device picks over time-share combinations inside the
        // shared window.
        match k_count {
            1 => {
                for (i, &share) in share_points[0].iter().enumerate() {
                    if share > 1.0 + SHARE_SUM_TOLERANCE {
                        continue;
                    }
                    let gain = per_share[0][i].raw_gain / pair_scale;
                    evaluated += 1;
                    if best.as_ref().map_or(true, |b| gain > b.gain) {
                        best = Some(Incumbent {
                            gain,
                            share: alloc::vec![share],
                            picks: alloc::vec![per_share[0][i]],
                        });
                    }
                }
            }
            2 => {
                for (i, &share_a) in share_points[0].iter().enumerate() {
                    for (j, &share_b) in share_points[1].iter().enumerate() {
                        if share_a + share_b > 1.0 + SHARE_SUM_TOLERANCE {
                            continue;
                        }
                        let gain =
                            (per_share[0][i].raw_gain + per_share[1][j].raw_gain) / pair_scale;
                        evaluated += 1;
                        if best.as_ref().map_or(true, |b| gain > b.gain) {
                            best = Some(Incumbent {
                                gain,
                                share: alloc::vec![share_a, share_b],
                                picks: alloc::vec![per_share[0][i], per_share[1][j]],
                            });
                        }
                    }
                }
            }
            _ => unreachable!("guarded above"),
        }

        let Some(incumbent) = best.as_ref() else {
            return Err(no_feasible_point(String::from(
                "every time-share combination overfills the communication window",
            )));
        };
        trace.push(incumbent.gain);

        // Refine the energy and time axes around the incumbent.
        for k in 0..k_count {
            e_axes[k] = e_axes[k].zoomed(incumbent.picks[k].e_frac, &grid.energy_fraction);
            t_axes[k] = t_axes[k].zoomed(incumbent.share[k], &grid.time_share);
        }
    }

    let incumbent = best.expect("trace push implies an incumbent");
    let ta = TransformedAllocation {
        sensing_distortion: incumbent.picks.iter().map(|p| p.s).collect(),
        quant_distortion: incumbent.picks.iter().map(|p| p.d).collect(),
        comm_energy: incumbent.picks.iter().map(|p| p.e).collect(),
        comm_time: incumbent.share.iter().map(|&f| f * window).collect(),
    };
    // Certify the winner against the reference feasibility check; the
    // grid constructs boundary-tight points, so anything beyond float
    // dust here would flag a construction bug.
    let report = check_feasibility(&to_physical(&ta, devices, sys), devices, sys);
    if let Some((constraint, slack)) = report.worst_violation() {
        return Err(SolverError::Infeasible {
            constraint,
            detail: format!(
                "grid winner violates {constraint} by {slack:e}; no feasible grid point"
            ),
        });
    }
    Ok(GridReport {
        best: ta,
        gain: incumbent.gain,
        incumbent_trace: trace,
        evaluated,
    })
}

fn guard(stats: &ClassStatistics, devices: &[DeviceProfile]) -> Result<(), SolverError> {
    if devices.is_empty() {
        return Err(SolverError::InvalidConfig {
            what: String::from("grid oracle needs at least one device"),
        });
    }
    let max_features = devices.iter().map(|d| d.feature_count).max().unwrap_or(0);
    if devices.len() > GUARD_DEVICES
        || max_features > GUARD_FEATURES
        || stats.num_classes > GUARD_CLASSES
    {
        return Err(SolverError::InvalidConfig {
            what: format!(
                "grid oracle cost guard allows K <= {GUARD_DEVICES}, N <= {GUARD_FEATURES}, \
                 L <= {GUARD_CLASSES}; got K = {}, max N = {max_features}, L = {}",
                devices.len(),
                stats.num_classes
            ),
        });
    }
    Ok(())
}

fn no_feasible_point(detail: String) -> SolverError {
    SolverError::Infeasible {
        constraint: Constraint::Latency,
        detail: format!("no feasible grid point: {detail}"),
    }
}

/// First-order-condition residuals of a claimed optimum.
///
/// All components are reported separately; see [`kkt_residual`].
#[derive(Debug, Clone, PartialEq)]
pub struct KktReport {
    /// Per-device residual of `d/dS [-G + beta * energy-spend]`.
    pub stationarity_sensing: Vec<f64>,
    /// Per-device residual of `d/dD [-G + alpha * required-bits]`.
    pub stationarity_quant: Vec<f64>,
    /// Per-device residual of `d/dE [beta * E - alpha * capacity]`.
    pub stationarity_energy: Vec<f64>,
    /// Largest stationarity residual magnitude.
    pub stationarity_norm: f64,
    /// Per-device `alpha * (required bits - capacity)`.
    pub capacity_complementarity: Vec<f64>,
    /// Per-device `beta * (energy spent - budget)`.
    pub energy_complementarity: Vec<f64>,
    /// Largest complementary-slackness magnitude.
    pub complementarity_norm: f64,
    /// Constraint slacks of the allocation itself.
    pub primal: FeasibilityReport,
    /// True when every supplied multiplier is non-negative.
    pub dual_feasible: bool,
}

/// Finite-difference step scale.
const FD_STEP: f64 = 1e-6;

/// Numerical first-order-condition check of `solution` with multipliers
/// `duals`.
///
/// Differentiates the device-separable Lagrangian of the original
/// problem — objective `-G` plus `alpha * (required bits - capacity)`
/// plus `beta * (energy spent - budget)` — by central differences with
/// step `1e-6 * max(|x|, 1)` in each of the per-device coordinates
/// (sensing distortion, quantization distortion, transmit energy) at
/// fixed communication times.  Nothing is taken from the solver: the
/// objective and constraint expressions come straight from the model.
///
/// The solution must be strictly positive in every coordinate.
pub fn kkt_residual(
    stats: &ClassStatistics,
    devices: &[DeviceProfile],
    sys: &SystemParams,
    solution: &TransformedAllocation,
    duals: &DualState,
) -> KktReport {
    let k_count = devices.len();
    assert_eq!(solution.sensing_distortion.len(), k_count);
    assert_eq!(duals.capacity_price.len(), k_count);
    let terms = DeviceTerms::build(stats, devices, sys);
    let l = stats.num_classes as f64;
    let pair_scale = l * (l - 1.0) / 2.0;

    let mut report = KktReport {
        stationarity_sensing: Vec::with_capacity(k_count),
        stationarity_quant: Vec::with_capacity(k_count),
        stationarity_energy: Vec::with_capacity(k_count),
        stationarity_norm: 0.0,
        capacity_complementarity: Vec::with_capacity(k_count),
        energy_complementarity: Vec::with_capacity(k_count),
        complementarity_norm: 0.0,
        primal: check_feasibility(&to_physical(solution, devices, sys), devices, sys),
        dual_feasible: true,
    };

    for k in 0..k_count {
        let dev = &terms[k];
        let alpha = duals.capacity_price[k];
        let beta = duals.energy_price[k];
        let t = solution.comm_time[k];
        let s0 = solution.sensing_distortion[k];
        let d0 = solution.quant_distortion[k];
        let e0 = solution.comm_energy[k];
        assert!(
            s0 > 0.0 && d0 > 0.0 && e0 > 0.0 && t > 0.0,
            "first-order check needs strictly positive coordinates, device {k}"
        );

        // Device-separable Lagrangian in (S, D, E) at fixed time.
        let lagrangian = |s: f64, d: f64, e: f64| -> f64 {
            let gain = dev.raw_gain(s, d) / pair_scale;
            let required = dev.n * math::log2_1p(1.0 / d);
            let capacity = channel_capacity_bits_local(
                t,
                sys.bandwidth,
                e,
                dev.channel_gain,
                sys.channel_noise,
            );
            let spend = dev.sens_energy / s + e - dev.disposable;
            -gain + alpha * (required - capacity) + beta * spend
        };

        let central = |x: f64, f: &dyn Fn(f64) -> f64| -> f64 {
            let h = FD_STEP * x.abs().max(1.0);
            (f(x + h) - f(x - h)) / (2.0 * h)
        };

        let ds = central(s0, &|s| lagrangian(s, d0, e0));
        let dd = central(d0, &|d| lagrangian(s0, d, e0));
        let de = central(e0, &|e| lagrangian(s0, d0, e));
        report.stationarity_norm = report
            .stationarity_norm
            .max(ds.abs())
            .max(dd.abs())
            .max(de.abs());
        report.stationarity_sensing.push(ds);
        report.stationarity_quant.push(dd);
        report.stationarity_energy.push(de);

        let required = dev.n * math::log2_1p(1.0 / d0);
        let capacity = channel_capacity_bits_local(
            t,
            sys.bandwidth,
            e0,
            dev.channel_gain,
            sys.channel_noise,
        );
        let cap_comp = alpha * (required - capacity);
        let en_comp = beta * (dev.sens_energy / s0 + e0 - dev.disposable);
        report.complementarity_norm = report
            .complementarity_norm
            .max(cap_comp.abs())
            .max(en_comp.abs());
        report.capacity_complementarity.push(cap_comp);
        report.energy_complementarity.push(en_comp);

        report.dual_feasible = report.dual_feasible
            && alpha >= 0.0
            && beta >= 0.0
            && duals.time_price[k] >= 0.0;
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FeatureStatistics;
    use crate::solver::{maximize_gain, SolverConfig};

    fn device(channel_gain: f64, feature_count: usize) -> DeviceProfile {
        DeviceProfile {
            feature_count,
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

    fn stats(devices: &[DeviceProfile], num_classes: usize) -> ClassStatistics {
        ClassStatistics {
            num_classes,
            per_device: devices
                .iter()
                .map(|d| FeatureStatistics {
                    centroids: (0..num_classes)
                        .map(|l| (0..d.feature_count).map(|n| (l * (n + 1)) as f64).collect())
                        .collect(),
                    variances: alloc::vec![1.0; d.feature_count],
                })
                .collect(),
        }
    }

    #[test]
    fn log_axis_points_are_log_spaced_and_inclusive() {
        let axis = LogAxis::new(1e-3, 1.0, 4);
        let pts = axis.points();
        assert_eq!(pts.len(), 4);
        assert!((pts[0] - 1e-3).abs() < 1e-18);
        assert!((pts[3] - 1.0).abs() < 1e-15);
        let r1 = pts[1] / pts[0];
        let r2 = pts[2] / pts[1];
        assert!((r1 - 10.0).abs() < 1e-9 && (r2 - 10.0).abs() < 1e-9);
    }

    #[test]
    fn grid_spec_validation_rejects_bad_axes() {
        let mut spec = GridSpec::default();
        spec.energy_fraction.count = 2;
        assert!(matches!(
            spec.validate(),
            Err(SolverError::InvalidConfig { .. })
        ));
        let mut spec = GridSpec::default();
        spec.sensing_backoff.lo = 0.5;
        assert!(spec.validate().is_err());
        let mut spec = GridSpec::default();
        spec.energy_fraction.hi = 1.0;
        assert!(spec.validate().is_err());
        assert!(GridSpec::default().validate().is_ok());
    }

    #[test]
    fn guard_refuses_large_instances() {
        let devs: Vec<DeviceProfile> = (0..3).map(|_| device(3e-12, 1)).collect();
        let st = stats(&devs, 2);
        let err = grid_optimum(&st, &devs, &system(), &GridSpec::default()).unwrap_err();
        match err {
            SolverError::InvalidConfig { what } => {
                assert!(what.contains("cost guard"), "message: {what}")
            }
            other => panic!("wrong error: {other}"),
        }
    }

    #[test]
    fn oracle_matches_solver_on_tiny_instance() {
        let devs = [device(3e-12, 1)];
        let st = stats(&devs, 2);
        let sys = system();
        let (_, oracle_gain) =
            grid_optimum(&st, &devs, &sys, &GridSpec::default()).unwrap();
        let solved = maximize_gain(&st, &devs, &sys, &SolverConfig::default()).unwrap();
        let rel = (oracle_gain - solved.total_gain()).abs() / solved.total_gain();
        assert!(
            rel < 0.01,
            "oracle {oracle_gain} vs solver {} (rel {rel})",
            solved.total_gain()
        );
    }

    #[test]
    fn enlarging_budgets_never_reduces_the_oracle_optimum() {
        let base = [device(3e-12, 1)];
        let st = stats(&base, 2);
        let sys = system();
        let (_, g1) = grid_optimum(&st, &base, &sys, &GridSpec::default()).unwrap();
        let mut richer = base.clone();
        richer[0].energy_budget = 0.3;
        let roomier = SystemParams {
            latency_budget: 2.5,
            ..sys
        };
        let (_, g2) = grid_optimum(&st, &richer, &roomier, &GridSpec::default()).unwrap();
        assert!(g2 >= g1 - 1e-12 * g1, "g1 = {g1}, g2 = {g2}");
    }

    #[test]
    fn latency_starved_instance_reports_no_feasible_point() {
        let devs = [device(3e-12, 1)];
        let st = stats(&devs, 2);
        let sys = SystemParams {
            latency_budget: 0.5,
            ..system()
        };
        let err = grid_optimum(&st, &devs, &sys, &GridSpec::default()).unwrap_err();
        match err {
            SolverError::Infeasible { detail, .. } => {
                assert!(detail.contains("no feasible grid point"), "detail: {detail}")
            }
            other => panic!("wrong error: {other}"),
        }
    }

    #[test]
    fn zoom_incumbents_are_monotone() {
        let devs = [device(3e-12, 2), device(1e-12, 1)];
        let st = stats(&devs, 3);
        let report =
            grid_optimum_detailed(&st, &devs, &system(), &GridSpec::default()).unwrap();
        assert_eq!(report.incumbent_trace.len(), 4);
        for w in report.incumbent_trace.windows(2) {
            assert!(w[1] >= w[0], "trace regressed: {:?}", report.incumbent_trace);
        }
    }

    #[test]
    fn boundary_tight_plane_carries_the_winner() {
        // Restricting both backoff axes to the tight plane must not change
        // the optimum: backed-off candidates never win.
        let devs = [device(3e-12, 2)];
        let st = stats(&devs, 3);
        let sys = system();
        let (_, with_backoff) =
            grid_optimum(&st, &devs, &sys, &GridSpec::default()).unwrap();
        let tight_only = GridSpec {
            sensing_backoff: LogAxis::new(1.0, 1.0, 3),
            quant_backoff: LogAxis::new(1.0, 1.0, 3),
            ..GridSpec::default()
        };
        let (_, tight) = grid_optimum(&st, &devs, &sys, &tight_only).unwrap();
        assert!((with_backoff - tight).abs() <= 1e-12 * tight);
    }

    #[test]
    fn zero_duals_give_exactly_zero_complementarity() {
        let devs = [device(3e-12, 1)];
        let st = stats(&devs, 2);
        let sys = system();
        let ta = TransformedAllocation {
            sensing_distortion: alloc::vec![5.0],
            quant_distortion: alloc::vec![0.5],
            comm_energy: alloc::vec![0.01],
            comm_time: alloc::vec![0.5],
        };
        let report = kkt_residual(&st, &devs, &sys, &ta, &DualState::zeros(1));
        assert_eq!(report.capacity_complementarity, alloc::vec![0.0]);
        assert_eq!(report.energy_complementarity, alloc::vec![0.0]);
        assert_eq!(report.complementarity_norm, 0.0);
        assert!(report.dual_feasible);
    }

    #[test]
    fn converged_solution_passes_the_first_order_check() {
        let devs = [device(3e-12, 2), device(1e-12, 1)];
        let st = stats(&devs, 3);
        let sys = system();
        let solved = maximize_gain(&st, &devs, &sys, &SolverConfig::default()).unwrap();
        let report = kkt_residual(&st, &devs, &sys, &solved.transformed, &solved.duals);
        assert!(
            report.stationarity_norm <= 1e-4,
            "stationarity {}",
            report.stationarity_norm
        );
        assert!(
            report.complementarity_norm <= 1e-6,
            "complementarity {}",
            report.complementarity_norm
        );
        assert!(report.primal.is_feasible());
        assert!(report.dual_feasible);
    }

    #[test]
    fn perturbing_the_solution_grows_the_stationarity_residual() {
        let devs = [device(3e-12, 1)];
        let st = stats(&devs, 2);
        let sys = system();
        let solved = maximize_gain(&st, &devs, &sys, &SolverConfig::default()).unwrap();
        let clean = kkt_residual(&st, &devs, &sys, &solved.transformed, &solved.duals);
        let mut bent = solved.transformed.clone();
        bent.sensing_distortion[0] *= 1.1;
        let perturbed = kkt_residual(&st, &devs, &sys, &bent, &solved.duals);
        assert!(
            perturbed.stationarity_norm > clean.stationarity_norm * 10.0,
            "clean {}, perturbed {}",
            clean.stationarity_norm,
            perturbed.stationarity_norm
        );
    }
}
