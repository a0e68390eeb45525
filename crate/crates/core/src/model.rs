//! Domain types and closed-form expressions for the sensing / computation /
//! communication trade-off.
//!
//! Physical controls per device `k`: sensing power `P_r`, transmit power
//! `P_c`, communication time `T_c`, and quantization gain `Q`.  The solver
//! works in distortion coordinates instead, where the objective becomes a sum
//! of ratios with affine denominators:
//!
//! * `S = sensing_noise / P_r` — the variance the sensing link adds,
//! * `D = quantization_variance / Q` — the variance quantization adds,
//! * `E_c = P_c * T_c` — the energy spent transmitting.
//!
//! Fused features for class `l` are Gaussian around the class centroid with
//! per-element variance `variance + clutter + S + D`; the discriminant gain
//! sums, over devices, feature elements, and unordered class pairs, the
//! squared centroid gap divided by that total variance.  Three constraints
//! bound the controls: a shared latency budget, a per-device energy budget,
//! and a per-device channel-capacity bound on the quantized feature bits.
//!
//! # Example
//!
//! ```
//! use edgegain_core::model::pair_gain;
//!
//! // Two classes 2.0 apart, unit source variance, and 0.5 + 0.5 of
//! // sensing + quantization distortion: gain = 4 / 2 = 2.
//! assert_eq!(pair_gain(0.0, 2.0, 1.0, 0.0, 0.5, 0.5), 2.0);
//! ```

use alloc::string::String;
use alloc::vec::Vec;

use crate::math;

/// Absolute slack below which a constraint counts as violated.
///
/// Slacks are measured in native units (seconds, joules, bits).  The solver
/// lands on constraint boundaries by construction, so exact zeros are common
/// and a small negative margin absorbs floating-point round-off.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Relative tolerance for the physical/distortion coordinate round trip.
pub const TRANSFORM_TOL: f64 = 1e-12;

/// Per-element class statistics observed by a single device.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FeatureStatistics {
    /// `centroids[class][element]`: per-class mean of each feature element.
    pub centroids: Vec<Vec<f64>>,
    /// `variances[element]`: source variance of each feature element,
    /// shared by all classes.
    pub variances: Vec<f64>,
}

/// Class-conditional feature statistics for every device.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ClassStatistics {
    /// Number of classes `L >= 2`.
    pub num_classes: usize,
    /// One entry per device, aligned with the device-profile list.
    pub per_device: Vec<FeatureStatistics>,
}

/// Static description of one device.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DeviceProfile {
    /// Number of feature elements this device contributes.
    pub feature_count: usize,
    /// Clutter variance added by the device's sensing environment.
    pub clutter_variance: f64,
    /// Variance of the pre-quantization feature elements (sets the
    /// quantization gain scale).
    pub quantization_variance: f64,
    /// Time spent sensing, in seconds.
    pub sensing_time: f64,
    /// Time spent on on-device feature computation, in seconds.
    pub computation_time: f64,
    /// Energy spent on on-device computation, in joules.
    pub computation_energy: f64,
    /// Total energy budget, in joules.  Must exceed `computation_energy`.
    pub energy_budget: f64,
    /// Uplink channel power gain (path loss, shadowing, and fading folded
    /// together).
    pub channel_gain: f64,
}

/// Network-wide parameters shared by all devices.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SystemParams {
    /// Sensing noise power (numerator of the sensing distortion `S`).
    pub sensing_noise: f64,
    /// End-to-end latency budget in seconds, shared by all devices.
    pub latency_budget: f64,
    /// Uplink bandwidth in hertz.
    pub bandwidth: f64,
    /// Receiver noise power in watts.
    pub channel_noise: f64,
}

/// Physical per-device controls.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Allocation {
    /// Sensing power `P_r` per device.
    pub sensing_power: Vec<f64>,
    /// Transmit power `P_c` per device.
    pub transmit_power: Vec<f64>,
    /// Communication time `T_c` per device, in seconds.
    pub comm_time: Vec<f64>,
    /// Quantization gain `Q` per device (higher means finer quantization).
    pub quant_gain: Vec<f64>,
}

/// The same controls in distortion coordinates.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TransformedAllocation {
    /// Sensing distortion `S = sensing_noise / P_r` per device.
    pub sensing_distortion: Vec<f64>,
    /// Quantization distortion `D = quantization_variance / Q` per device.
    pub quant_distortion: Vec<f64>,
    /// Communication energy `E_c = P_c * T_c` per device, in joules.
    pub comm_energy: Vec<f64>,
    /// Communication time `T_c` per device, in seconds.
    pub comm_time: Vec<f64>,
}

/// Which constraint a slack or violation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Constraint {
    /// Shared latency budget over sensing + computation + communication.
    Latency,
    /// Per-device channel-capacity bound on the quantized feature bits.
    Capacity { device: usize },
    /// Per-device energy budget over sensing + computation + transmission.
    Energy { device: usize },
}

impl core::fmt::Display for Constraint {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Constraint::Latency => write!(f, "latency budget"),
            Constraint::Capacity { device } => {
                write!(f, "capacity bound of device {device}")
            }
            Constraint::Energy { device } => {
                write!(f, "energy budget of device {device}")
            }
        }
    }
}

/// Constraint slacks of one allocation, in native units.
///
/// Positive slack means satisfied with margin; anything below
/// `-tolerance` counts as a violation.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FeasibilityReport {
    /// `latency_budget - sum(sensing + computation + communication time)`.
    pub latency_slack: f64,
    /// Per device: channel capacity minus required feature bits.
    pub capacity_slack: Vec<f64>,
    /// Per device: energy budget minus energy spent.
    pub energy_slack: Vec<f64>,
    /// Absolute tolerance used by [`FeasibilityReport::is_feasible`].
    pub tolerance: f64,
}

impl FeasibilityReport {
    /// True when every slack is at least `-tolerance`.
    pub fn is_feasible(&self) -> bool {
        self.worst_violation().is_none()
    }

    /// The most violated constraint, if any slack falls below `-tolerance`.
    pub fn worst_violation(&self) -> Option<(Constraint, f64)> {
        let mut worst: Option<(Constraint, f64)> = None;
        let mut consider = |constraint: Constraint, slack: f64| {
            if slack < -self.tolerance && worst.map_or(true, |(_, w)| slack < w) {
                worst = Some((constraint, slack));
            }
        };
        consider(Constraint::Latency, self.latency_slack);
        for (k, &s) in self.capacity_slack.iter().enumerate() {
            consider(Constraint::Capacity { device: k }, s);
        }
        for (k, &s) in self.energy_slack.iter().enumerate() {
            consider(Constraint::Energy { device: k }, s);
        }
        worst
    }
}

/// Validation failure for model inputs.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelError {
    /// A quantity that must be strictly positive was not.
    NonPositive { field: &'static str, value: f64 },
    /// A device's energy budget does not leave room for computation energy.
    EnergyBudgetTooSmall {
        device: usize,
        budget: f64,
        computation: f64,
    },
    /// Mismatched lengths between statistics, profiles, or allocations.
    DimensionMismatch { what: String },
    /// Fewer than two classes.
    TooFewClasses { num_classes: usize },
}

impl core::fmt::Display for ModelError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ModelError::NonPositive { field, value } => {
                write!(f, "{field} must be strictly positive, got {value}")
            }
            ModelError::EnergyBudgetTooSmall {
                device,
                budget,
                computation,
            } => write!(
                f,
                "device {device}: energy budget {budget} J must exceed \
                 computation energy {computation} J"
            ),
            ModelError::DimensionMismatch { what } => {
                write!(f, "dimension mismatch: {what}")
            }
            ModelError::TooFewClasses { num_classes } => {
                write!(f, "need at least two classes, got {num_classes}")
            }
        }
    }
}

impl core::error::Error for ModelError {}

fn require_positive(field: &'static str, value: f64) -> Result<(), ModelError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(ModelError::NonPositive { field, value })
    }
}

impl DeviceProfile {
    /// Checks positivity of every field and that the energy budget exceeds
    /// the computation energy.  `device` only labels error messages.
    pub fn validate(&self, device: usize) -> Result<(), ModelError> {
        if self.feature_count == 0 {
            return Err(ModelError::NonPositive {
                field: "feature_count",
                value: 0.0,
            });
        }
        require_positive("clutter_variance", self.clutter_variance)?;
        require_positive("quantization_variance", self.quantization_variance)?;
        require_positive("sensing_time", self.sensing_time)?;
        require_positive("computation_time", self.computation_time)?;
        require_positive("computation_energy", self.computation_energy)?;
        require_positive("energy_budget", self.energy_budget)?;
        require_positive("channel_gain", self.channel_gain)?;
        if self.energy_budget <= self.computation_energy {
            return Err(ModelError::EnergyBudgetTooSmall {
                device,
                budget: self.energy_budget,
                computation: self.computation_energy,
            });
        }
        Ok(())
    }

    /// Energy left after on-device computation, available for sensing and
    /// transmission.
    pub fn disposable_energy(&self) -> f64 {
        self.energy_budget - self.computation_energy
    }
}

impl SystemParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        require_positive("sensing_noise", self.sensing_noise)?;
        require_positive("latency_budget", self.latency_budget)?;
        require_positive("bandwidth", self.bandwidth)?;
        require_positive("channel_noise", self.channel_noise)
    }
}

impl ClassStatistics {
    /// Checks shape consistency against the device list and positivity of
    /// all variances.
    pub fn validate(&self, devices: &[DeviceProfile]) -> Result<(), ModelError> {
        if self.num_classes < 2 {
            return Err(ModelError::TooFewClasses {
                num_classes: self.num_classes,
            });
        }
        if self.per_device.len() != devices.len() {
            return Err(ModelError::DimensionMismatch {
                what: alloc::format!(
                    "statistics cover {} devices, profiles cover {}",
                    self.per_device.len(),
                    devices.len()
                ),
            });
        }
        for (k, (stats, dev)) in self.per_device.iter().zip(devices).enumerate() {
            if stats.centroids.len() != self.num_classes {
                return Err(ModelError::DimensionMismatch {
                    what: alloc::format!(
                        "device {k}: {} centroid rows for {} classes",
                        stats.centroids.len(),
                        self.num_classes
                    ),
                });
            }
            for (l, row) in stats.centroids.iter().enumerate() {
                if row.len() != dev.feature_count {
                    return Err(ModelError::DimensionMismatch {
                        what: alloc::format!(
                            "device {k} class {l}: {} centroid elements for \
                             {} features",
                            row.len(),
                            dev.feature_count
                        ),
                    });
                }
            }
            if stats.variances.len() != dev.feature_count {
                return Err(ModelError::DimensionMismatch {
                    what: alloc::format!(
                        "device {k}: {} variances for {} features",
                        stats.variances.len(),
                        dev.feature_count
                    ),
                });
            }
            for (n, &v) in stats.variances.iter().enumerate() {
                if !(v > 0.0) || !v.is_finite() {
                    return Err(ModelError::DimensionMismatch {
                        what: alloc::format!(
                            "device {k} element {n}: variance {v} must be \
                             strictly positive"
                        ),
                    });
                }
            }
        }
        Ok(())
    }

    /// Unordered class pairs `(l, l')` with `l < l'`, in storage order.
    pub fn class_pairs(&self) -> impl Iterator<Item = (usize, usize)> {
        let l_count = self.num_classes;
        (0..l_count).flat_map(move |l| ((l + 1)..l_count).map(move |lp| (l, lp)))
    }

    /// Number of unordered class pairs `L (L - 1) / 2`.
    pub fn pair_count(&self) -> usize {
        self.num_classes * (self.num_classes - 1) / 2
    }
}

impl Allocation {
    pub fn validate(&self, device_count: usize) -> Result<(), ModelError> {
        let lens = [
            self.sensing_power.len(),
            self.transmit_power.len(),
            self.comm_time.len(),
            self.quant_gain.len(),
        ];
        if lens.iter().any(|&l| l != device_count) {
            return Err(ModelError::DimensionMismatch {
                what: alloc::format!(
                    "allocation vectors {lens:?} for {device_count} devices"
                ),
            });
        }
        for k in 0..device_count {
            require_positive("sensing_power", self.sensing_power[k])?;
            require_positive("transmit_power", self.transmit_power[k])?;
            require_positive("comm_time", self.comm_time[k])?;
            require_positive("quant_gain", self.quant_gain[k])?;
        }
        Ok(())
    }
}

/// Discriminant gain of one feature element for one unordered class pair.
///
/// The fused element is Gaussian around the class centroid with variance
/// `variance + clutter + sensing_distortion + quant_distortion`; the gain is
/// the squared centroid gap over that variance.
///
/// # Panics
///
/// Panics if the total variance is not strictly positive.
pub fn pair_gain(
    centroid_a: f64,
    centroid_b: f64,
    variance: f64,
    clutter: f64,
    sensing_distortion: f64,
    quant_distortion: f64,
) -> f64 {
    let total_variance = variance + clutter + sensing_distortion + quant_distortion;
    assert!(
        total_variance > 0.0,
        "total per-element variance must be positive, got {total_variance}"
    );
    let gap = centroid_a - centroid_b;
    gap * gap / total_variance
}

/// Per-pair, per-element gains plus the ratio-form denominators.
///
/// Each entry of `pair_gains` equals `numerator / denominator` with an
/// implicit numerator of 1: the denominators fold the `L (L - 1) / 2`
/// pair-count normalization into the ratio, so `total` is both the scaled
/// sum of `pair_gains` and the plain sum of reciprocal denominators.
/// Class pairs with identical centroids carry zero gain and an infinite
/// denominator.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GainBreakdown {
    pub num_classes: usize,
    /// `pair_gains[device][element * pair_count + pair]`, pairs in
    /// [`ClassStatistics::class_pairs`] order.
    pub pair_gains: Vec<Vec<f64>>,
    /// Ratio denominators, same layout as `pair_gains`.
    pub denominators: Vec<Vec<f64>>,
    /// Total discriminant gain.
    pub total: f64,
}

/// Evaluates the discriminant gain of an allocation in distortion
/// coordinates.
///
/// # Panics
///
/// Panics if shapes are inconsistent; validate inputs first.
pub fn total_gain(
    stats: &ClassStatistics,
    devices: &[DeviceProfile],
    ta: &TransformedAllocation,
) -> GainBreakdown {
    let l_count = stats.num_classes;
    let pair_count = stats.pair_count();
    // Pair-count normalization 2 / (L (L - 1)) distributed into each ratio.
    let pair_scale = l_count as f64 * (l_count as f64 - 1.0) / 2.0;
    assert_eq!(stats.per_device.len(), devices.len());
    assert_eq!(ta.sensing_distortion.len(), devices.len());

    let mut pair_gains = Vec::with_capacity(devices.len());
    let mut denominators = Vec::with_capacity(devices.len());
    let mut total = 0.0;
    for (k, dev) in devices.iter().enumerate() {
        let fs = &stats.per_device[k];
        let distortion = ta.sensing_distortion[k] + ta.quant_distortion[k];
        let mut gains = Vec::with_capacity(dev.feature_count * pair_count);
        let mut denoms = Vec::with_capacity(dev.feature_count * pair_count);
        for n in 0..dev.feature_count {
            let variance = fs.variances[n] + dev.clutter_variance + distortion;
            for (l, lp) in stats.class_pairs() {
                let gap = fs.centroids[l][n] - fs.centroids[lp][n];
                let gain = gap * gap / variance;
                gains.push(gain);
                denoms.push(pair_scale * variance / (gap * gap));
                total += gain;
            }
        }
        pair_gains.push(gains);
        denominators.push(denoms);
    }
    GainBreakdown {
        num_classes: l_count,
        pair_gains,
        denominators,
        total: total / pair_scale,
    }
}

/// Bits needed to carry one quantized feature vector:
/// `feature_count * log2(1 + quant_gain / quantization_variance)`.
pub fn mutual_info_bits(
    feature_count: usize,
    quantization_variance: f64,
    quant_gain: f64,
) -> f64 {
    assert!(quantization_variance > 0.0 && quant_gain >= 0.0);
    feature_count as f64 * math::log2_1p(quant_gain / quantization_variance)
}

/// Bits deliverable in `comm_time` seconds when spending `comm_energy`
/// joules over a channel with power gain `channel_gain` and receiver noise
/// `channel_noise`.
pub fn channel_capacity_bits(
    comm_time: f64,
    bandwidth: f64,
    comm_energy: f64,
    channel_gain: f64,
    channel_noise: f64,
) -> f64 {
    assert!(comm_time > 0.0 && bandwidth > 0.0 && channel_noise > 0.0);
    assert!(comm_energy >= 0.0 && channel_gain > 0.0);
    let snr = comm_energy * channel_gain / (comm_time * channel_noise);
    comm_time * bandwidth * math::log2_1p(snr)
}

/// Computes all constraint slacks of a physical allocation.
pub fn check_feasibility(
    alloc: &Allocation,
    devices: &[DeviceProfile],
    sys: &SystemParams,
) -> FeasibilityReport {
    assert_eq!(alloc.sensing_power.len(), devices.len());
    let mut used_time = 0.0;
    let mut capacity_slack = Vec::with_capacity(devices.len());
    let mut energy_slack = Vec::with_capacity(devices.len());
    for (k, dev) in devices.iter().enumerate() {
        used_time += dev.sensing_time + dev.computation_time + alloc.comm_time[k];
        let required = mutual_info_bits(
            dev.feature_count,
            dev.quantization_variance,
            alloc.quant_gain[k],
        );
        let capacity = channel_capacity_bits(
            alloc.comm_time[k],
            sys.bandwidth,
            alloc.transmit_power[k] * alloc.comm_time[k],
            dev.channel_gain,
            sys.channel_noise,
        );
        capacity_slack.push(capacity - required);
        let spent = alloc.sensing_power[k] * dev.sensing_time
            + dev.computation_energy
            + alloc.transmit_power[k] * alloc.comm_time[k];
        energy_slack.push(dev.energy_budget - spent);
    }
    FeasibilityReport {
        latency_slack: sys.latency_budget - used_time,
        capacity_slack,
        energy_slack,
        tolerance: FEASIBILITY_TOL,
    }
}

/// Physical controls to distortion coordinates.
pub fn to_transformed(
    alloc: &Allocation,
    devices: &[DeviceProfile],
    sys: &SystemParams,
) -> TransformedAllocation {
    let k_count = devices.len();
    assert_eq!(alloc.sensing_power.len(), k_count);
    TransformedAllocation {
        sensing_distortion: (0..k_count)
            .map(|k| sys.sensing_noise / alloc.sensing_power[k])
            .collect(),
        quant_distortion: (0..k_count)
            .map(|k| devices[k].quantization_variance / alloc.quant_gain[k])
            .collect(),
        comm_energy: (0..k_count)
            .map(|k| alloc.transmit_power[k] * alloc.comm_time[k])
            .collect(),
        comm_time: alloc.comm_time.clone(),
    }
}

/// Distortion coordinates back to physical controls.
pub fn to_physical(
    ta: &TransformedAllocation,
    devices: &[DeviceProfile],
    sys: &SystemParams,
) -> Allocation {
    let k_count = devices.len();
    assert_eq!(ta.sensing_distortion.len(), k_count);
    Allocation {
        sensing_power: (0..k_count)
            .map(|k| sys.sensing_noise / ta.sensing_distortion[k])
            .collect(),
        transmit_power: (0..k_count)
            .map(|k| ta.comm_energy[k] / ta.comm_time[k])
            .collect(),
        comm_time: ta.comm_time.clone(),
        quant_gain: (0..k_count)
            .map(|k| devices[k].quantization_variance / ta.quant_distortion[k])
            .collect(),
    }
}
