//! Deterministic random-stream derivation.
//!
//! Every randomized stage (channel draws, statistics synthesis, baseline
//! pinning, Monte-Carlo sampling) runs on its own ChaCha stream derived from
//! a master seed and a stream label.  Streams are independent of evaluation
//! order, so sweeps produce identical results whether cells run serially or
//! in parallel, and nested designs (e.g. growing device counts) reuse the
//! same per-device draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer; decorrelates nearby integer labels.
fn splitmix64(seed: u64) -> u64 {
    let mut z = seed.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent sub-seed for the given stream label.
pub fn mix_seed(master: u64, stream: u64) -> u64 {
    splitmix64(master ^ splitmix64(stream))
}

/// A seeded generator for `(master, stream)`.
pub fn stream_rng(master: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix_seed(master, stream))
}

/// Stream labels for the randomized stages, kept in one place so no two
/// stages collide.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamLabel {
    /// Channel realization of one device: `(repetition, device)`.
    Channel { repetition: u64, device: u64 },
    /// Class-statistics synthesis of one device: `(repetition, device)`.
    Statistics { repetition: u64, device: u64 },
    /// Sensing-power pinning of the power-only baseline.
    BaselinePin { repetition: u64 },
    /// Monte-Carlo feature sampling of one sweep cell.
    Sampling { cell: u64 },
}

impl StreamLabel {
    /// Injective packing of the label into a 64-bit stream id.
    pub fn stream_id(self) -> u64 {
        match self {
            StreamLabel::Channel { repetition, device } => {
                (repetition << 20) | (device << 2)
            }
            StreamLabel::Statistics { repetition, device } => {
                (repetition << 20) | (device << 2) | 1
            }
            StreamLabel::BaselinePin { repetition } => (repetition << 20) | 2,
            StreamLabel::Sampling { cell } => (cell << 20) | 3,
        }
    }

    /// Seeded generator for this label under a master seed.
    pub fn rng(self, master: u64) -> ChaCha8Rng {
        stream_rng(master, self.stream_id())
    }
}
