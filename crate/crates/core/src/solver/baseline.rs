//! The comparison schemes: the full optimizer plus three baselines that
//! pin one resource and optimize the rest with the same machinery.
//!
//! * `power_aware` — sensing power drawn uniformly at random from its
//!   feasible range (seeded); every joule left after sensing and
//!   computation is committed to transmission.
//! * `time_aware` — the available communication time split equally.
//! * `quantization_aware` — 16-bit quantization everywhere.

use rand::Rng;

use crate::model::{ClassStatistics, DeviceProfile, SystemParams};
use crate::random::StreamLabel;

use super::inner::Pin;
use super::outer::{initial_allocation, maximize_with_pin};
use super::{SolveReport, SolverConfig, SolverError};

/// Quantization distortion of a 16-bit quantizer: `1 / (2^16 - 1)`.
const SIXTEEN_BIT_DISTORTION: f64 = 1.0 / 65535.0;

/// Resource-allocation scheme selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Scheme {
    /// Joint optimization over sensing power, transmit power,
    /// communication time, and quantization gain.
    Optimal,
    /// Random feasible sensing power, rest optimized.
    PowerAware,
    /// Equal communication-time split, rest optimized.
    TimeAware,
    /// Fixed 16-bit quantization, rest optimized.
    QuantizationAware,
}

impl Scheme {
    /// All schemes, in reporting order.
    pub const ALL: [Scheme; 4] = [
        Scheme::Optimal,
        Scheme::PowerAware,
        Scheme::TimeAware,
        Scheme::QuantizationAware,
    ];

    /// Stable machine-readable name.
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Optimal => "optimal",
            Scheme::PowerAware => "power_aware",
            Scheme::TimeAware => "time_aware",
            Scheme::QuantizationAware => "quantization_aware",
        }
    }
}

impl core::fmt::Display for Scheme {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

/// Error for unknown scheme names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseSchemeError;

impl core::fmt::Display for ParseSchemeError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(
            "unknown scheme (expected optimal, power_aware, time_aware, \
             or quantization_aware)",
        )
    }
}

impl core::error::Error for ParseSchemeError {}

impl core::str::FromStr for Scheme {
    type Err = ParseSchemeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scheme::ALL
            .into_iter()
            .find(|scheme| scheme.name() == s)
            .ok_or(ParseSchemeError)
    }
}

/// Solves a scenario under the given scheme.
///
/// The sensing-power baseline draws its pin from a dedicated random stream
/// of `config.seed`, so repeated runs are identical and the other schemes
/// are unaffected by the draw.
pub fn solve_scheme(
    scheme: Scheme,
    stats: &ClassStatistics,
    devices: &[DeviceProfile],
    sys: &SystemParams,
    config: &SolverConfig,
) -> Result<SolveReport, SolverError> {
    let start = initial_allocation(devices, sys)?;
    let pin = match scheme {
        Scheme::Optimal => Pin::None,
        Scheme::PowerAware => {
            let mut rng = StreamLabel::BaselinePin { repetition: 0 }.rng(config.seed);
            let sensing_distortion = devices
                .iter()
                .map(|dev| {
                    let hi = dev.disposable_energy() / dev.sensing_time;
                    let power = hi * (1.0 - rng.random::<f64>());
                    sys.sensing_noise / power
                })
                .collect();
            Pin::SensingPower { sensing_distortion }
        }
        Scheme::TimeAware => Pin::CommTime {
            comm_time: start.comm_time.clone(),
        },
        Scheme::QuantizationAware => Pin::Quantization {
            quant_distortion: alloc::vec![SIXTEEN_BIT_DISTORTION; devices.len()],
        },
    };
    maximize_with_pin(stats, devices, sys, start, &pin, config)
}
