//! Synthetic end-to-end inference evaluation.
//!
//! Connects allocations to classification accuracy without any external
//! dataset: features are sampled from the same mixed-Gaussian observation
//! model the gain expression is derived from, classified with the exact
//! maximum-likelihood rule for that model (variance-normalized nearest
//! centroid), and aggregated over sweep cells.
//!
//! The per-element observation of a device with sensing distortion `S`
//! and quantization distortion `D` is the class centroid plus independent
//! zero-mean Gaussian terms for source variance, clutter, sensing noise,
//! and quantization noise; their sum is drawn as a single normal with the
//! summed variance, which has exactly the same law.
//!
//! Sweep cells are evaluated one at a time by [`evaluate_cell`] so a
//! driver can time or parallelize them; [`run_sweep`] is the serial
//! convenience over the canonical cell order.  All randomness comes from
//! [`crate::random::StreamLabel`] streams: the sampling stream is keyed by
//! repetition only, so every swept value inside one repetition sees the
//! same noise draws and value-to-value differences are paired.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::math;
use crate::model::{
    check_feasibility, to_physical, total_gain, ClassStatistics, DeviceProfile, SystemParams,
    TransformedAllocation,
};
use crate::random::{mix_seed, StreamLabel};
use crate::scenario::{self, ScenarioConfig};
use crate::solver::{solve_scheme, Scheme, SolverConfig, SolverError};

/// Distortion scale factors of the forced-gain ladder, largest (lowest
/// gain) first.
pub const DEFAULT_LADDER: [f64; 7] = [10.0, 5.0, 2.0, 1.0, 0.5, 0.2, 0.1];

/// Default Monte-Carlo samples per accuracy estimate.
pub const DEFAULT_SAMPLES: usize = 10_000;

/// Default repetitions per sweep point.
pub const DEFAULT_REPETITIONS: usize = 20;

/// One batch of sampled observations under fixed distortions.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    /// Row-major `n_samples x total_features` observation matrix; device
    /// features are concatenated in device order.
    pub features: Vec<f64>,
    /// True class labels, in `[0, num_classes)`.
    pub labels: Vec<usize>,
    /// Sensing distortion per device the batch was drawn under.
    pub sensing_distortion: Vec<f64>,
    /// Quantization distortion per device the batch was drawn under.
    pub quant_distortion: Vec<f64>,
    /// Total features per sample.
    pub total_features: usize,
    /// Master seed and sampling cell the noise stream was derived from.
    pub seed: u64,
    pub cell: u64,
}

impl SampleBatch {
    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    /// One sample row.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.total_features..(i + 1) * self.total_features]
    }
}

/// Samples observations at explicit distortion levels, bypassing
/// feasibility.
///
/// This is the evaluation path of the forced-gain ladder, where scaled
/// distortions deliberately need not correspond to any feasible
/// allocation.  Labels are uniform over the classes; each element draw is
/// the class centroid plus a zero-mean normal whose variance sums source
/// variance, clutter, sensing distortion, and quantization distortion.
pub fn sample_at_distortions(
    stats: &ClassStatistics,
    devices: &[DeviceProfile],
    sensing_distortion: &[f64],
    quant_distortion: &[f64],
    n_samples: usize,
    seed: u64,
    cell: u64,
) -> SampleBatch {
    assert!(n_samples >= 1, "need at least one sample");
    assert_eq!(sensing_distortion.len(), devices.len());
    assert_eq!(quant_distortion.len(), devices.len());
    let total_features: usize = devices.iter().map(|d| d.feature_count).sum();
    // Per-element standard deviations, precomputed in device order.
    let mut stds = Vec::with_capacity(total_features);
    for (k, dev) in devices.iter().enumerate() {
        let fs = &stats.per_device[k];
        for n in 0..dev.feature_count {
            let variance = fs.variances[n]
                + dev.clutter_variance
                + sensing_distortion[k]
                + quant_distortion[k];
            stds.push(math::sqrt(variance));
        }
    }

    let mut rng = StreamLabel::Sampling { cell }.rng(seed);
    let mut features = Vec::with_capacity(n_samples * total_features);
    let mut labels = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let label = rng.random_range(0..stats.num_classes);
        labels.push(label);
        let mut element = 0;
        for (k, dev) in devices.iter().enumerate() {
            let fs = &stats.per_device[k];
            for n in 0..dev.feature_count {
                let z: f64 = rng.sample(StandardNormal);
                features.push(fs.centroids[label][n] + stds[element] * z);
                element += 1;
            }
        }
    }
    SampleBatch {
        features,
        labels,
        sensing_distortion: sensing_distortion.to_vec(),
        quant_distortion: quant_distortion.to_vec(),
        total_features,
        seed,
        cell,
    }
}

/// Samples observations under a feasible allocation.
///
/// Rejects allocations that violate any constraint; see
/// [`sample_at_distortions`] for the observation model.
pub fn sample_features(
    stats: &ClassStatistics,
    devices: &[DeviceProfile],
    sys: &SystemParams,
    ta: &TransformedAllocation,
    n_samples: usize,
    seed: u64,
    cell: u64,
) -> Result<SampleBatch, SolverError> {
    let report = check_feasibility(&to_physical(ta, devices, sys), devices, sys);
    if let Some((constraint, slack)) = report.worst_violation() {
        return Err(SolverError::Infeasible {
            constraint,
            detail: format!("sampling rejects infeasible allocation (slack {slack:e})"),
        });
    }
    Ok(sample_at_distortions(
        stats,
        devices,
        &ta.sensing_distortion,
        &ta.quant_distortion,
        n_samples,
        seed,
        cell,
    ))
}

/// Classifies a batch with the maximum-likelihood rule of the observation
/// model: nearest centroid in the variance-normalized metric.  Returns the
/// predicted labels and the accuracy.
pub fn classify_map(
    stats: &ClassStatistics,
    devices: &[DeviceProfile],
    batch: &SampleBatch,
) -> Result<(Vec<usize>, f64), SolverError> {
    let total_features: usize = devices.iter().map(|d| d.feature_count).sum();
    if total_features != batch.total_features
        || batch.sensing_distortion.len() != devices.len()
        || stats.per_device.len() != devices.len()
    {
        return Err(SolverError::InvalidConfig {
            what: format!(
                "classifier shape mismatch: batch carries {} features of {} devices, \
                 model has {total_features} features of {} devices",
                batch.total_features,
                batch.sensing_distortion.len(),
                devices.len()
            ),
        });
    }
    // Inverse variances per element under the batch's distortions.
    let mut inv_var = Vec::with_capacity(total_features);
    for (k, dev) in devices.iter().enumerate() {
        let fs = &stats.per_device[k];
        for n in 0..dev.feature_count {
            let variance = fs.variances[n]
                + dev.clutter_variance
                + batch.sensing_distortion[k]
                + batch.quant_distortion[k];
            inv_var.push(1.0 / variance);
        }
    }

    let mut predicted = Vec::with_capacity(batch.n_samples());
    let mut correct = 0usize;
    for i in 0..batch.n_samples() {
        let row = batch.row(i);
        let mut best = 0usize;
        let mut best_score = f64::INFINITY;
        for l in 0..stats.num_classes {
            let mut score = 0.0;
            let mut element = 0;
            for (k, dev) in devices.iter().enumerate() {
                let fs = &stats.per_device[k];
                for n in 0..dev.feature_count {
                    let gap = row[element] - fs.centroids[l][n];
                    score += gap * gap * inv_var[element];
                    element += 1;
                }
            }
            if score < best_score {
                best_score = score;
                best = l;
            }
        }
        if best == batch.labels[i] {
            correct += 1;
        }
        predicted.push(best);
    }
    let accuracy = correct as f64 / batch.n_samples() as f64;
    Ok((predicted, accuracy))
}

/// Scales an allocation's distortions jointly, leaving the communication
/// variables untouched — the forced-gain ladder.
pub fn scale_distortions(ta: &TransformedAllocation, factor: f64) -> TransformedAllocation {
    assert!(factor > 0.0);
    TransformedAllocation {
        sensing_distortion: ta.sensing_distortion.iter().map(|s| s * factor).collect(),
        quant_distortion: ta.quant_distortion.iter().map(|d| d * factor).collect(),
        comm_energy: ta.comm_energy.clone(),
        comm_time: ta.comm_time.clone(),
    }
}

/// Which scenario knob a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SweptParam {
    /// Per-device energy budget, joules.
    EnergyBudget,
    /// Shared latency budget, seconds.
    Latency,
    /// Device count (values must be positive integers).
    DeviceCount,
    /// Distortion scale factor applied to the solved allocation; gain is
    /// forced rather than budget-driven.
    ForcedGain,
}

impl SweptParam {
    pub fn name(&self) -> &'static str {
        match self {
            SweptParam::EnergyBudget => "energy_budget",
            SweptParam::Latency => "latency",
            SweptParam::DeviceCount => "device_count",
            SweptParam::ForcedGain => "forced_gain",
        }
    }
}

impl core::fmt::Display for SweptParam {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

/// One sweep experiment: a swept parameter, its values, and the schemes
/// to compare at each value.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SweepSpec {
    pub swept: SweptParam,
    pub values: Vec<f64>,
    pub repetitions: usize,
    pub schemes: Vec<Scheme>,
    /// Monte-Carlo samples per accuracy estimate.
    pub samples_per_cell: usize,
    pub seed: u64,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), SolverError> {
        if self.values.is_empty() {
            return Err(SolverError::InvalidConfig {
                what: String::from("sweep needs at least one value"),
            });
        }
        if self.repetitions == 0 {
            return Err(SolverError::InvalidConfig {
                what: String::from("sweep needs at least one repetition"),
            });
        }
        if self.schemes.is_empty() {
            return Err(SolverError::InvalidConfig {
                what: String::from("sweep needs at least one scheme"),
            });
        }
        if self.samples_per_cell == 0 {
            return Err(SolverError::InvalidConfig {
                what: String::from("sweep needs at least one sample per cell"),
            });
        }
        for &v in &self.values {
            if !v.is_finite() || v <= 0.0 {
                return Err(SolverError::InvalidConfig {
                    what: format!("swept values must be positive and finite, got {v}"),
                });
            }
            if self.swept == SweptParam::DeviceCount && v.fract() != 0.0 {
                return Err(SolverError::InvalidConfig {
                    what: format!("device_count values must be integers, got {v}"),
                });
            }
        }
        Ok(())
    }
}

/// Position of one cell in a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CellKey {
    pub value_index: usize,
    pub scheme: Scheme,
    pub repetition: usize,
}

/// Result of one sweep cell.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CellResult {
    pub key: CellKey,
    /// The swept value the cell ran at.
    pub value: f64,
    /// Discriminant gain, when the cell produced an allocation.
    pub gain: Option<f64>,
    /// Monte-Carlo accuracy, when the cell produced an allocation.
    pub accuracy: Option<f64>,
    /// Whether the evaluated allocation satisfies every constraint.
    pub feasible: bool,
    /// Outer solver iterations spent.
    pub solver_iterations: usize,
    /// Failure description for cells that produced no allocation.
    pub failure: Option<String>,
}

/// Canonical cell order: swept value, then scheme, then repetition.
pub fn plan(spec: &SweepSpec) -> Vec<CellKey> {
    let mut keys = Vec::with_capacity(spec.values.len() * spec.schemes.len() * spec.repetitions);
    for value_index in 0..spec.values.len() {
        for &scheme in &spec.schemes {
            for repetition in 0..spec.repetitions {
                keys.push(CellKey {
                    value_index,
                    scheme,
                    repetition,
                });
            }
        }
    }
    keys
}

/// Evaluates one sweep cell: builds the scenario for the cell's
/// repetition, solves the scheme, samples, classifies.
///
/// Per-cell failures (an infeasible scheme, an unsolvable scenario) are
/// reported inside the result, never as an error; only a structurally
/// invalid spec or base configuration errors out.  Deterministic: the
/// solver seed is derived from the sweep seed and repetition, the
/// sampling stream from the sweep seed and repetition, so results do not
/// depend on evaluation order and repetitions are paired across values.
pub fn evaluate_cell(
    spec: &SweepSpec,
    base: &ScenarioConfig,
    key: CellKey,
) -> Result<CellResult, SolverError> {
    spec.validate()?;
    let value = spec.values[key.value_index];
    let mut config = base.clone();
    config.seed = spec.seed;
    match spec.swept {
        SweptParam::EnergyBudget => config.energy_budget = value,
        SweptParam::Latency => config.latency_budget = value,
        SweptParam::DeviceCount => config.device_count = value as usize,
        SweptParam::ForcedGain => {}
    }

    let mut result = CellResult {
        key,
        value,
        gain: None,
        accuracy: None,
        feasible: false,
        solver_iterations: 0,
        failure: None,
    };

    let scenario = match scenario::build(&config, key.repetition as u64) {
        Ok(s) => s,
        Err(e) => {
            result.failure = Some(e.to_string());
            return Ok(result);
        }
    };
    let solver_config = SolverConfig {
        seed: mix_seed(spec.seed, key.repetition as u64),
        ..SolverConfig::default()
    };
    let report = match solve_scheme(
        key.scheme,
        &scenario.stats,
        &scenario.devices,
        &scenario.sys,
        &solver_config,
    ) {
        Ok(r) => r,
        Err(e) => {
            result.failure = Some(e.to_string());
            return Ok(result);
        }
    };
    result.solver_iterations = report.outer_iterations;

    let ta = if spec.swept == SweptParam::ForcedGain {
        scale_distortions(&report.transformed, value)
    } else {
        report.transformed.clone()
    };
    let gain = total_gain(&scenario.stats, &scenario.devices, &ta).total;
    result.gain = Some(gain);
    result.feasible = check_feasibility(
        &to_physical(&ta, &scenario.devices, &scenario.sys),
        &scenario.devices,
        &scenario.sys,
    )
    .is_feasible();

    let batch = sample_at_distortions(
        &scenario.stats,
        &scenario.devices,
        &ta.sensing_distortion,
        &ta.quant_distortion,
        spec.samples_per_cell,
        spec.seed,
        key.repetition as u64,
    );
    let (_, accuracy) = classify_map(&scenario.stats, &scenario.devices, &batch)?;
    result.accuracy = Some(accuracy);
    Ok(result)
}

/// Aggregate over the repetitions of one `(value, scheme)` sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSummary {
    pub value: f64,
    pub scheme: Scheme,
    /// Mean and standard error of the gain over repetitions that produced
    /// one.
    pub gain: Option<(f64, f64)>,
    /// Mean and standard error of the accuracy likewise.
    pub accuracy: Option<(f64, f64)>,
    /// Fraction of repetitions whose allocation was feasible.
    pub feasible_fraction: f64,
    pub repetitions: usize,
}

/// Full sweep output.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub spec: SweepSpec,
    /// Cells in [`plan`] order.
    pub cells: Vec<CellResult>,
}

impl SweepTable {
    /// Cells of one `(value, scheme)` point, in repetition order.
    pub fn point(&self, value_index: usize, scheme: Scheme) -> Vec<&CellResult> {
        self.cells
            .iter()
            .filter(|c| c.key.value_index == value_index && c.key.scheme == scheme)
            .collect()
    }

    /// Mean/SE aggregate of one sweep point.
    pub fn summary(&self, value_index: usize, scheme: Scheme) -> PointSummary {
        let cells = self.point(value_index, scheme);
        let gains: Vec<f64> = cells.iter().filter_map(|c| c.gain).collect();
        let accs: Vec<f64> = cells.iter().filter_map(|c| c.accuracy).collect();
        let feasible = cells.iter().filter(|c| c.feasible).count();
        PointSummary {
            value: self.spec.values[value_index],
            scheme,
            gain: (!gains.is_empty()).then(|| mean_and_se(&gains)),
            accuracy: (!accs.is_empty()).then(|| mean_and_se(&accs)),
            feasible_fraction: feasible as f64 / cells.len().max(1) as f64,
            repetitions: cells.len(),
        }
    }

    /// Mean and standard error of the paired per-repetition difference
    /// `metric(value j) - metric(value i)` for one scheme.  Pairing uses
    /// the shared repetition streams, so budget-trend tests need far fewer
    /// repetitions than unpaired comparisons would.
    pub fn paired_difference(
        &self,
        scheme: Scheme,
        value_i: usize,
        value_j: usize,
        metric: impl Fn(&CellResult) -> Option<f64>,
    ) -> Option<(f64, f64)> {
        let a = self.point(value_i, scheme);
        let b = self.point(value_j, scheme);
        let diffs: Vec<f64> = a
            .iter()
            .zip(&b)
            .filter_map(|(x, y)| Some(metric(y)? - metric(x)?))
            .collect();
        (!diffs.is_empty()).then(|| mean_and_se(&diffs))
    }
}

/// Runs every cell of a sweep serially in canonical order.
pub fn run_sweep(spec: &SweepSpec, base: &ScenarioConfig) -> Result<SweepTable, SolverError> {
    spec.validate()?;
    base.validate()?;
    let cells = plan(spec)
        .into_iter()
        .map(|key| evaluate_cell(spec, base, key))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SweepTable {
        spec: spec.clone(),
        cells,
    })
}

/// Sample mean and standard error of the mean.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    assert!(!values.is_empty());
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, math::sqrt(var / n))
}

/// Spearman rank correlation with average ranks on ties.
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 2);
    let rx = ranks(xs);
    let ry = ranks(ys);
    let n = rx.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for i in 0..rx.len() {
        let dx = rx[i] - mx;
        let dy = ry[i] - my;
        cov += dx * dy;
        vx += dx * dx;
        vy += dy * dy;
    }
    if vx == 0.0 || vy == 0.0 {
        return 0.0;
    }
    cov / math::sqrt(vx * vy)
}

/// Average ranks (1-based) with ties sharing their mean rank.
fn ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("no NaN ranks"));
    let mut out = alloc::vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            out[idx] = rank;
        }
        i = j + 1;
    }
    out
}
