//! Optimal division of the communication-time budget across devices.
//!
//! Each scheme's inner objective is separable across devices once the
//! per-device stage is folded in: device `k` contributes
//! `weight_k * value_k(t_k)` with `value_k` convex and decreasing in its
//! time share.  At the optimum all devices sit at a common marginal
//! `weight_k * |value_k'(t_k)| = level`, or at a bound.  The common level is
//! found by bisection: each candidate level maps to per-device time shares
//! (by inverting the decreasing marginal), and the total share is monotone
//! in the level.

use alloc::vec::Vec;

use super::device::{bisect_decreasing, CommLink};

/// Which per-device value function the split is balancing.
#[derive(Debug, Clone, Copy)]
pub(crate) enum TimeValueKind {
    /// `min_e [S(e) + D(t, e)]`: transmit energy re-optimized at every
    /// time share (full scheme).
    OptimalEnergy,
    /// `D(t, e)` at a fixed transmit energy (sensing-power-pinned scheme,
    /// where all residual energy is committed to transmission).
    FixedEnergy { energy: f64 },
    /// `S(required_energy(t))`: quantization pinned, so the time share
    /// sets the energy that must be spent on transmission and the rest
    /// buys sensing accuracy.
    RequiredEnergy { bits: f64 },
}

/// One device's stake in the time split.
pub(crate) struct TimeStake<'l> {
    pub link: &'l CommLink,
    /// Gain weight of the device; the split maximizes the weighted sum.
    pub weight: f64,
    pub kind: TimeValueKind,
    /// Smallest admissible time share (above 0 only when a pinned
    /// quantizer forces a minimum transmission time).
    pub min_time: f64,
}

/// Bisection depth for the transmit-energy solve nested inside marginal
/// evaluations.  The envelope theorem makes the marginal first-order
/// insensitive to the energy optimum, so a shallow solve already leaves
/// errors far below every outer tolerance; this caps the cost of the
/// triple-nested split search.
const ENERGY_ITERATIONS: usize = 28;

impl TimeStake<'_> {
    /// `weight * |d value / d t|`; strictly decreasing in `t` on the
    /// admissible range.
    fn marginal(&self, t: f64, iterations: usize) -> f64 {
        let raw = match self.kind {
            TimeValueKind::OptimalEnergy => {
                self.link.time_marginal_optimal(t, iterations.min(ENERGY_ITERATIONS))
            }
            TimeValueKind::FixedEnergy { energy } => {
                self.link.time_marginal_fixed_energy(t, energy)
            }
            TimeValueKind::RequiredEnergy { bits } => {
                let e = self.link.required_comm_energy(t, bits);
                let s = self.link.tight_sensing_distortion(e);
                s * s / self.link.sensing_energy
                    * self.link.required_energy_slope(t, bits)
            }
        };
        self.weight * raw
    }

    /// Time share at a given marginal level, clamped into `[min_time, hi]`.
    fn share_at_level(&self, level: f64, hi: f64, iterations: usize) -> f64 {
        let lo = self.min_time.max(hi * 1e-12);
        bisect_decreasing(lo, hi, level, iterations, |t| {
            self.marginal(t, iterations)
        })
    }
}

/// Splits `available` seconds across the stakes, maximizing the weighted
/// value sum.  Returns per-stake shares summing to `available` exactly.
///
/// Every stake must have positive weight; callers park zero-weight devices
/// on a token share beforehand.
pub(crate) fn optimize_split(
    stakes: &[TimeStake<'_>],
    available: f64,
    iterations: usize,
) -> Vec<f64> {
    assert!(!stakes.is_empty());
    assert!(available > 0.0);
    let floor_total: f64 = stakes.iter().map(|s| s.min_time).sum();
    assert!(
        floor_total < available,
        "minimum time shares {floor_total} exceed available {available}"
    );
    if stakes.len() == 1 {
        return alloc::vec![available];
    }

    // Per-device cap: everything the other devices' floors leave over.
    let caps: Vec<f64> = stakes
        .iter()
        .map(|s| available - (floor_total - s.min_time))
        .collect();

    // Bracket the common marginal level.  At the low end every device takes
    // its cap (total >= available); at the high end every device sits near
    // its floor (total < available).
    let mut level_lo = f64::INFINITY;
    let mut level_hi = 0.0f64;
    for (stake, &cap) in stakes.iter().zip(&caps) {
        level_lo = level_lo.min(stake.marginal(cap, iterations));
        let near_floor = stake.min_time.max(cap * 1e-9);
        let m = stake.marginal(near_floor, iterations);
        level_hi = level_hi.max(if m.is_finite() { m } else { 1e300 });
    }
    level_lo = level_lo.max(1e-300);
    level_hi = level_hi.max(level_lo * 2.0);

    let total_at = |level: f64| -> f64 {
        stakes
            .iter()
            .zip(&caps)
            .map(|(s, &cap)| s.share_at_level(level, cap, iterations))
            .sum()
    };

    // Bisect in log space: marginal levels span many decades.
    let mut ln_lo = crate::math::ln(level_lo);
    let mut ln_hi = crate::math::ln(level_hi);
    for _ in 0..iterations {
        let mid = 0.5 * (ln_lo + ln_hi);
        if total_at(crate::math::exp(mid)) > available {
            ln_lo = mid;
        } else {
            ln_hi = mid;
        }
    }
    let level = crate::math::exp(0.5 * (ln_lo + ln_hi));
    let mut shares: Vec<f64> = stakes
        .iter()
        .zip(&caps)
        .map(|(s, &cap)| s.share_at_level(level, cap, iterations))
        .collect();

    // Scale the excess above the floors so the total hits `available`
    // exactly; the bisection already placed it within rounding.
    let excess: f64 = shares
        .iter()
        .zip(stakes)
        .map(|(&t, s)| t - s.min_time)
        .sum();
    let target_excess = available - floor_total;
    if excess > 0.0 {
        let scale = target_excess / excess;
        for (share, stake) in shares.iter_mut().zip(stakes) {
            *share = stake.min_time + (*share - stake.min_time) * scale;
        }
    }
    shares
}

#[cfg(test)]
mod tests {
    use super::*;

    fn link(channel_gain: f64) -> CommLink {
        CommLink {
            n: 50.0,
            bandwidth: 200.0,
            channel_noise: 1e-12,
            channel_gain,
            sensing_energy: 0.5,
            disposable: 0.14,
        }
    }

    #[test]
    fn identical_stakes_split_evenly() {
        let l = link(3e-12);
        let stakes = [
            TimeStake {
                link: &l,
                weight: 1.0,
                kind: TimeValueKind::OptimalEnergy,
                min_time: 0.0,
            },
            TimeStake {
                link: &l,
                weight: 1.0,
                kind: TimeValueKind::OptimalEnergy,
                min_time: 0.0,
            },
        ];
        let shares = optimize_split(&stakes, 0.05, 50);
        assert!((shares[0] - shares[1]).abs() < 1e-9 * 0.05);
        assert!((shares[0] + shares[1] - 0.05).abs() < 1e-12);
    }

    #[test]
    fn heavier_weight_takes_more_time() {
        let l = link(3e-12);
        let stakes = [
            TimeStake {
                link: &l,
                weight: 4.0,
                kind: TimeValueKind::OptimalEnergy,
                min_time: 0.0,
            },
            TimeStake {
                link: &l,
                weight: 1.0,
                kind: TimeValueKind::OptimalEnergy,
                min_time: 0.0,
            },
        ];
        let shares = optimize_split(&stakes, 0.05, 50);
        assert!(shares[0] > shares[1]);
    }

    #[test]
    fn split_beats_equal_division() {
        // Unequal channels: the balanced split must not be worse than the
        // equal split for the weighted objective.
        let l1 = link(3e-12);
        let l2 = link(3e-11);
        let stakes = [
            TimeStake {
                link: &l1,
                weight: 1.0,
                kind: TimeValueKind::OptimalEnergy,
                min_time: 0.0,
            },
            TimeStake {
                link: &l2,
                weight: 1.0,
                kind: TimeValueKind::OptimalEnergy,
                min_time: 0.0,
            },
        ];
        let avail = 0.05;
        let shares = optimize_split(&stakes, avail, 50);
        let value = |t1: f64, t2: f64| {
            l1.phi(t1, l1.optimal_comm_energy(t1, 60))
                + l2.phi(t2, l2.optimal_comm_energy(t2, 60))
        };
        let balanced = value(shares[0], shares[1]);
        let equal = value(avail / 2.0, avail / 2.0);
        assert!(balanced <= equal + 1e-12);
        // And not worse than a few nearby perturbations.
        for delta in [-0.2, -0.05, 0.05, 0.2] {
            let t1 = (shares[0] * (1.0 + delta)).min(avail * 0.999);
            let t2 = avail - t1;
            if t2 > 0.0 {
                assert!(balanced <= value(t1, t2) + 1e-10);
            }
        }
    }

    #[test]
    fn respects_minimum_times() {
        let l = link(3e-12);
        let stakes = [
            TimeStake {
                link: &l,
                weight: 1.0,
                kind: TimeValueKind::RequiredEnergy { bits: 10.0 },
                min_time: 0.02,
            },
            TimeStake {
                link: &l,
                weight: 1.0,
                kind: TimeValueKind::RequiredEnergy { bits: 10.0 },
                min_time: 0.001,
            },
        ];
        let shares = optimize_split(&stakes, 0.05, 50);
        assert!(shares[0] >= 0.02);
        assert!(shares[1] >= 0.001);
        assert!((shares[0] + shares[1] - 0.05).abs() < 1e-12);
    }
}
