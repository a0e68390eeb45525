//! Scenario construction: seeded channels, device profiles, and class
//! statistics.
//!
//! A [`ScenarioConfig`] collects the experiment constants — device count,
//! cell geometry, path-loss model, shadowing, the per-device hardware
//! scalars, and the class-statistics source — and [`build`] turns it into
//! a ready-to-solve `(ClassStatistics, Vec<DeviceProfile>, SystemParams)`
//! triple.
//!
//! Randomness is derived per device from [`crate::random::StreamLabel`]
//! streams, so scenarios are reproducible under a seed, independent of
//! evaluation order, and *nested*: growing the device count re-uses the
//! smaller scenario's draws for the devices they share.
//!
//! The channel model: each device sits uniformly in a disk of radius
//! `cell_radius_m` whose center lies `center_distance_m` from the server.
//! Path loss in dB is `fixed_db + slope_db_per_decade * log10(dist_km)`,
//! shadowing is zero-mean Gaussian in dB, and small-scale fading is
//! Rayleigh (`|h|^2` unit-mean exponential); the power gain is
//! `10^((shadowing - path_loss)/10) * |h|^2`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::math;
use crate::model::{ClassStatistics, DeviceProfile, FeatureStatistics, SystemParams};
use crate::random::StreamLabel;
use crate::solver::SolverError;

/// Where the devices sit relative to the edge server.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct Geometry {
    /// Radius of the disk the devices are scattered over, in meters.
    pub cell_radius_m: f64,
    /// Distance from the disk center to the server, in meters.
    pub center_distance_m: f64,
}

impl Default for Geometry {
    fn default() -> Self {
        Geometry {
            cell_radius_m: 50.0,
            center_distance_m: 450.0,
        }
    }
}

/// Log-distance path-loss model, distance in kilometers.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct PathLoss {
    /// Loss at 1 km, in dB.
    pub fixed_db: f64,
    /// Additional loss per decade of distance, in dB.
    pub slope_db_per_decade: f64,
}

impl Default for PathLoss {
    fn default() -> Self {
        PathLoss {
            fixed_db: 128.1,
            slope_db_per_decade: 37.6,
        }
    }
}

/// Where the class statistics come from.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(
    feature = "serde",
    serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)
)]
pub enum StatisticsSource {
    /// Synthetic statistics at the default shape and spread: 4 classes,
    /// centroid spread 2.0, per-element variances in [0.5, 1.5].
    TableDefault,
    /// Caller-provided statistics; must match the device count and
    /// feature count.
    Explicit { statistics: ClassStatistics },
    /// Synthetic statistics: centroids uniform in
    /// `[-centroid_spread/2, centroid_spread/2]`, per-element variances
    /// uniform in `[variance_lo, variance_hi]`.  Omitted fields fall back
    /// to the default shape.
    Synthetic {
        #[cfg_attr(feature = "serde", serde(default = "default_classes"))]
        num_classes: usize,
        #[cfg_attr(feature = "serde", serde(default = "default_spread"))]
        centroid_spread: f64,
        #[cfg_attr(feature = "serde", serde(default = "default_variance_lo"))]
        variance_lo: f64,
        #[cfg_attr(feature = "serde", serde(default = "default_variance_hi"))]
        variance_hi: f64,
    },
}

#[cfg(feature = "serde")]
fn default_classes() -> usize {
    DEFAULT_CLASSES
}
#[cfg(feature = "serde")]
fn default_spread() -> f64 {
    DEFAULT_SPREAD
}
#[cfg(feature = "serde")]
fn default_variance_lo() -> f64 {
    DEFAULT_VARIANCE_LO
}
#[cfg(feature = "serde")]
fn default_variance_hi() -> f64 {
    DEFAULT_VARIANCE_HI
}

impl Default for StatisticsSource {
    fn default() -> Self {
        StatisticsSource::TableDefault
    }
}

/// Default synthesis parameters backing [`StatisticsSource::TableDefault`].
const DEFAULT_CLASSES: usize = 4;
const DEFAULT_SPREAD: f64 = 2.0;
const DEFAULT_VARIANCE_LO: f64 = 0.5;
const DEFAULT_VARIANCE_HI: f64 = 1.5;

/// Full experiment description; `Default` reproduces the reference
/// simulation constants.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ScenarioConfig {
    /// Number of devices `K`.
    pub device_count: usize,
    pub geometry: Geometry,
    pub path_loss: PathLoss,
    /// Shadowing variance in dB².
    pub shadowing_db2: f64,
    pub statistics: StatisticsSource,
    /// Sensing noise power `sigma_r^2`.
    pub sensing_noise: f64,
    /// Quantization noise variance `delta^2` per device.
    pub quantization_variance: f64,
    /// Features per device `N`.
    pub feature_count: usize,
    /// Latency budget `T`, seconds.
    pub latency_budget: f64,
    /// Energy budget `E` per device, joules.
    pub energy_budget: f64,
    /// Sensing time `T_r` per device, seconds.
    pub sensing_time: f64,
    /// Computation time `T_m` per device, seconds.
    pub computation_time: f64,
    /// Computation energy `E_m` per device, joules.
    pub computation_energy: f64,
    /// Receiver noise power `delta_c^2`, watts.
    pub channel_noise: f64,
    /// Channel bandwidth `B`, hertz.
    pub bandwidth: f64,
    /// Clutter variances cycled over devices.
    pub clutter_variances: Vec<f64>,
    /// Master seed for every derived random stream.
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            device_count: 3,
            geometry: Geometry::default(),
            path_loss: PathLoss::default(),
            shadowing_db2: 8.0,
            statistics: StatisticsSource::default(),
            sensing_noise: 1.0,
            quantization_variance: 1.0,
            feature_count: 50,
            latency_budget: 1.85,
            energy_budget: 0.15,
            sensing_time: 0.5,
            computation_time: 0.1,
            computation_energy: 0.01,
            channel_noise: 1e-12,
            bandwidth: 200.0,
            clutter_variances: alloc::vec![1.0, 0.1, 0.5],
            seed: 0,
        }
    }
}

fn invalid(what: String) -> SolverError {
    SolverError::InvalidConfig { what }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        if self.device_count == 0 {
            return Err(invalid(String::from("device_count must be at least 1")));
        }
        let positives = [
            ("center_distance_m", self.geometry.center_distance_m),
            ("sensing_noise", self.sensing_noise),
            ("quantization_variance", self.quantization_variance),
            ("latency_budget", self.latency_budget),
            ("energy_budget", self.energy_budget),
            ("sensing_time", self.sensing_time),
            ("computation_time", self.computation_time),
            ("computation_energy", self.computation_energy),
            ("channel_noise", self.channel_noise),
            ("bandwidth", self.bandwidth),
        ];
        for (name, value) in positives {
            if !(value > 0.0) || !value.is_finite() {
                return Err(invalid(format!("{name} must be positive, got {value}")));
            }
        }
        if self.geometry.cell_radius_m < 0.0
            || self.geometry.cell_radius_m >= self.geometry.center_distance_m
        {
            return Err(invalid(format!(
                "cell_radius_m must lie in [0, center_distance_m), got {}",
                self.geometry.cell_radius_m
            )));
        }
        if self.shadowing_db2 < 0.0 {
            return Err(invalid(format!(
                "shadowing_db2 must be non-negative, got {}",
                self.shadowing_db2
            )));
        }
        if self.feature_count == 0 {
            return Err(invalid(String::from("feature_count must be at least 1")));
        }
        if self.clutter_variances.is_empty() {
            return Err(invalid(String::from(
                "clutter_variances needs at least one entry",
            )));
        }
        for &c in &self.clutter_variances {
            if !(c > 0.0) {
                return Err(invalid(format!(
                    "clutter_variances entries must be positive, got {c}"
                )));
            }
        }
        match &self.statistics {
            StatisticsSource::TableDefault | StatisticsSource::Explicit { .. } => {}
            StatisticsSource::Synthetic {
                num_classes,
                centroid_spread,
                variance_lo,
                variance_hi,
            } => {
                if *num_classes < 2 {
                    return Err(invalid(format!(
                        "statistics num_classes must be at least 2, got {num_classes}"
                    )));
                }
                if !(*centroid_spread >= 0.0) {
                    return Err(invalid(format!(
                        "statistics centroid_spread must be non-negative, got {centroid_spread}"
                    )));
                }
                if !(*variance_lo > 0.0) || !(*variance_hi >= *variance_lo) {
                    return Err(invalid(format!(
                        "statistics variance range needs 0 < variance_lo <= variance_hi, \
                         got [{variance_lo}, {variance_hi}]"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Path loss in dB at `dist_km` kilometers.
pub fn path_loss_db(model: &PathLoss, dist_km: f64) -> f64 {
    model.fixed_db + model.slope_db_per_decade * math::log10(dist_km)
}

/// Channel power gain from its three components: path loss and shadowing
/// in dB, small-scale fading as a power factor.
pub fn channel_from_components(pl_db: f64, shadowing_db: f64, fading_power: f64) -> f64 {
    math::powf(10.0, (shadowing_db - pl_db) / 10.0) * fading_power
}

/// Draws the per-device channel power gains for one repetition.
///
/// Each device consumes its own random stream
/// ([`StreamLabel::Channel`]`{ repetition, device }`), so the gains of the
/// first `K` devices do not change when the scenario grows to `K + 1`.
pub fn generate_channels(config: &ScenarioConfig, seed: u64, repetition: u64) -> Vec<f64> {
    (0..config.device_count)
        .map(|k| {
            let mut rng = StreamLabel::Channel {
                repetition,
                device: k as u64,
            }
            .rng(seed);
            // Uniform position in the disk.
            let radius = config.geometry.cell_radius_m * math::sqrt(rng.random::<f64>());
            let angle = core::f64::consts::TAU * rng.random::<f64>();
            let dx = config.geometry.center_distance_m + radius * math::cos(angle);
            let dy = radius * math::sin(angle);
            let dist_km = math::hypot(dx, dy) / 1000.0;
            let pl_db = path_loss_db(&config.path_loss, dist_km);
            let shadow_z: f64 = rng.sample(StandardNormal);
            let shadowing_db = math::sqrt(config.shadowing_db2) * shadow_z;
            // |h|^2 of a unit-variance circular Gaussian: mean-1
            // exponential, drawn as half the squared norm of two standard
            // normals.
            let h_re: f64 = rng.sample(StandardNormal);
            let h_im: f64 = rng.sample(StandardNormal);
            let fading_power = 0.5 * (h_re * h_re + h_im * h_im);
            channel_from_components(pl_db, shadowing_db, fading_power)
        })
        .collect()
}

/// Synthesizes per-device class statistics.
///
/// Centroids are uniform in `[-spread/2, spread/2]`, per-element variances
/// uniform in the configured range; every device has its own stream
/// ([`StreamLabel::Statistics`]), so statistics are stable when the device
/// count grows.  [`StatisticsSource::Explicit`] is returned as-is.
pub fn synthesize_statistics(
    config: &ScenarioConfig,
    seed: u64,
) -> Result<ClassStatistics, SolverError> {
    config.validate()?;
    let (num_classes, spread, var_lo, var_hi) = match &config.statistics {
        StatisticsSource::Explicit { statistics } => return Ok(statistics.clone()),
        StatisticsSource::TableDefault => (
            DEFAULT_CLASSES,
            DEFAULT_SPREAD,
            DEFAULT_VARIANCE_LO,
            DEFAULT_VARIANCE_HI,
        ),
        StatisticsSource::Synthetic {
            num_classes,
            centroid_spread,
            variance_lo,
            variance_hi,
        } => (*num_classes, *centroid_spread, *variance_lo, *variance_hi),
    };
    let per_device = (0..config.device_count)
        .map(|k| {
            let mut rng = StreamLabel::Statistics {
                repetition: 0,
                device: k as u64,
            }
            .rng(seed);
            let centroids = (0..num_classes)
                .map(|_| {
                    (0..config.feature_count)
                        .map(|_| spread * (rng.random::<f64>() - 0.5))
                        .collect()
                })
                .collect();
            let variances = (0..config.feature_count)
                .map(|_| var_lo + (var_hi - var_lo) * rng.random::<f64>())
                .collect();
            FeatureStatistics {
                centroids,
                variances,
            }
        })
        .collect();
    Ok(ClassStatistics {
        num_classes,
        per_device,
    })
}

/// A ready-to-solve instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub stats: ClassStatistics,
    pub devices: Vec<DeviceProfile>,
    pub sys: SystemParams,
}

/// Builds the full instance for one repetition: channels, device
/// profiles (clutter variances cycling over the configured list), class
/// statistics, and system parameters, all validated.
pub fn build(config: &ScenarioConfig, repetition: u64) -> Result<Scenario, SolverError> {
    config.validate()?;
    let channels = generate_channels(config, config.seed, repetition);
    let devices: Vec<DeviceProfile> = channels
        .iter()
        .enumerate()
        .map(|(k, &channel_gain)| DeviceProfile {
            feature_count: config.feature_count,
            clutter_variance: config.clutter_variances[k % config.clutter_variances.len()],
            quantization_variance: config.quantization_variance,
            sensing_time: config.sensing_time,
            computation_time: config.computation_time,
            computation_energy: config.computation_energy,
            energy_budget: config.energy_budget,
            channel_gain,
        })
        .collect();
    for (k, dev) in devices.iter().enumerate() {
        dev.validate(k)?;
    }
    let stats = synthesize_statistics(config, config.seed)?;
    stats.validate(&devices)?;
    let sys = SystemParams {
        sensing_noise: config.sensing_noise,
        latency_budget: config.latency_budget,
        bandwidth: config.bandwidth,
        channel_noise: config.channel_noise,
    };
    sys.validate()?;
    Ok(Scenario {
        stats,
        devices,
        sys,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{total_gain, TransformedAllocation};

    #[test]
    fn path_loss_matches_hand_value_at_450_meters() {
        let pl = path_loss_db(&PathLoss::default(), 0.45);
        assert!((pl - 115.061).abs() < 0.01, "pl = {pl}");
    }

    #[test]
    fn deterministic_channel_components_compose_exactly() {
        let pl = path_loss_db(&PathLoss::default(), 0.45);
        let h = channel_from_components(pl, 0.0, 1.0);
        assert!((h - math::powf(10.0, -pl / 10.0)).abs() < 1e-25);
    }

    #[test]
    fn channels_are_seed_deterministic_and_seed_sensitive() {
        let config = ScenarioConfig::default();
        let a = generate_channels(&config, 7, 0);
        let b = generate_channels(&config, 7, 0);
        let c = generate_channels(&config, 8, 0);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.iter().all(|&h| h.is_finite() && h > 0.0));
    }

    #[test]
    fn repetitions_resample_channels() {
        let config = ScenarioConfig::default();
        assert_ne!(
            generate_channels(&config, 7, 0),
            generate_channels(&config, 7, 1)
        );
    }

    #[test]
    fn channel_magnitudes_sit_in_the_expected_band() {
        // 400-500 m path loss with +-3 sigma shadowing and ordinary fading
        // lands within a few decades of 1e-12.
        let mut config = ScenarioConfig::default();
        config.device_count = 64;
        let h = generate_channels(&config, 3, 0);
        for &g in &h {
            assert!(g > 1e-17 && g < 1e-7, "gain {g} out of band");
        }
    }

    #[test]
    fn growing_the_device_count_preserves_shared_draws() {
        let mut small = ScenarioConfig::default();
        small.device_count = 3;
        let mut large = small.clone();
        large.device_count = 5;
        let hs = generate_channels(&small, 11, 4);
        let hl = generate_channels(&large, 11, 4);
        assert_eq!(hs[..], hl[..3]);
        let ss = synthesize_statistics(&small, 11).unwrap();
        let sl = synthesize_statistics(&large, 11).unwrap();
        assert_eq!(ss.per_device[..], sl.per_device[..3]);
    }

    #[test]
    fn default_statistics_have_the_reference_shape() {
        let config = ScenarioConfig::default();
        let stats = synthesize_statistics(&config, 0).unwrap();
        assert_eq!(stats.num_classes, 4);
        assert_eq!(stats.per_device.len(), 3);
        for fs in &stats.per_device {
            assert_eq!(fs.centroids.len(), 4);
            assert!(fs.centroids.iter().all(|c| c.len() == 50));
            assert_eq!(fs.variances.len(), 50);
            assert!(fs.variances.iter().all(|&v| (0.5..=1.5).contains(&v)));
        }
    }

    #[test]
    fn zero_spread_collapses_the_gain() {
        let mut config = ScenarioConfig::default();
        config.statistics = StatisticsSource::Synthetic {
            num_classes: 3,
            centroid_spread: 0.0,
            variance_lo: 0.5,
            variance_hi: 1.5,
        };
        let scenario = build(&config, 0).unwrap();
        let k = scenario.devices.len();
        let ta = TransformedAllocation {
            sensing_distortion: alloc::vec![1.0; k],
            quant_distortion: alloc::vec![1.0; k],
            comm_energy: alloc::vec![0.01; k],
            comm_time: alloc::vec![0.01; k],
        };
        let gain = total_gain(&scenario.stats, &scenario.devices, &ta);
        assert_eq!(gain.total, 0.0);
    }

    #[test]
    fn invalid_variance_range_is_rejected() {
        let mut config = ScenarioConfig::default();
        config.statistics = StatisticsSource::Synthetic {
            num_classes: 3,
            centroid_spread: 1.0,
            variance_lo: 0.0,
            variance_hi: 1.0,
        };
        let err = synthesize_statistics(&config, 0).unwrap_err();
        assert!(matches!(err, SolverError::InvalidConfig { .. }), "{err}");
    }

    #[test]
    fn build_cycles_clutter_and_validates() {
        let mut config = ScenarioConfig::default();
        config.device_count = 5;
        config.feature_count = 4;
        let scenario = build(&config, 0).unwrap();
        let clutter: Vec<f64> = scenario
            .devices
            .iter()
            .map(|d| d.clutter_variance)
            .collect();
        assert_eq!(clutter, alloc::vec![1.0, 0.1, 0.5, 1.0, 0.1]);
        assert_eq!(scenario.sys.latency_budget, 1.85);
    }

    #[test]
    fn config_validation_names_the_offending_field() {
        let mut config = ScenarioConfig::default();
        config.bandwidth = -1.0;
        match config.validate().unwrap_err() {
            SolverError::InvalidConfig { what } => {
                assert!(what.contains("bandwidth"), "message: {what}")
            }
            other => panic!("wrong error: {other}"),
        }
    }
}
