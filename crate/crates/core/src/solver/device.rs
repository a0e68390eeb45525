//! Per-device numerical kernel.
//!
//! At the per-device optimum of the power/quantization stage both
//! constraints bind: spending less on sensing or quantization always helps
//! the objective, so the energy budget pins the sensing distortion and the
//! capacity bound pins the quantization distortion.  That reduces the stage
//! to a single convex minimization over the transmit energy `e`:
//!
//! ```text
//! phi(e) = sensing_energy / (disposable - e)  +  D_tight(t, e)
//! ```
//!
//! with `D_tight` the smallest quantization distortion the channel supports
//! in time `t` with energy `e`.  `phi` blows up at both ends of
//! `(0, disposable)`, so its minimizer is interior and found by bisecting
//! the sign of the derivative.
//!
//! The same kernel supplies the marginal value of communication time
//! (`-d phi / d t` along the optimal-energy envelope), which the time stage
//! equalizes across devices.

use crate::math;
use crate::model::{DeviceProfile, SystemParams};

/// Fraction of the available span used as bisection floor; optima never sit
/// this close to a boundary because the objective diverges there.
pub(crate) const EDGE_FRACTION: f64 = 1e-9;

/// Per-device constants captured once per solve.
#[derive(Debug, Clone)]
pub(crate) struct CommLink {
    /// Feature count as f64.
    pub n: f64,
    /// Uplink bandwidth.
    pub bandwidth: f64,
    /// Receiver noise power.
    pub channel_noise: f64,
    /// Channel power gain.
    pub channel_gain: f64,
    /// `sensing_noise * sensing_time`: energy needed per unit of inverse
    /// sensing distortion.
    pub sensing_energy: f64,
    /// Energy available after computation.
    pub disposable: f64,
}

/// `ln(1 + x) - x / (1 + x)`, the concavity gap of the rate curve.
///
/// Strictly positive for `x > 0`; series expansion near zero avoids
/// catastrophic cancellation.
pub(crate) fn log_gap(x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if x < 1e-4 {
        // ln(1+x) - x/(1+x) = x^2/2 - 2x^3/3 + 3x^4/4 - ...
        x * x * (0.5 - x * (2.0 / 3.0 - 0.75 * x))
    } else {
        math::ln_1p(x) - x / (1.0 + x)
    }
}

/// `1 - e^u (1 - u)`, the convexity gap of the required-energy curve.
///
/// Strictly positive for `u > 0`; series expansion near zero avoids
/// cancellation.
pub(crate) fn exp_gap(u: f64) -> f64 {
    debug_assert!(u >= 0.0);
    if u < 1e-3 {
        // 1 - e^u (1 - u) = u^2/2 + u^3/3 + u^4/8 + ...
        u * u * (0.5 + u * (1.0 / 3.0 + 0.125 * u))
    } else {
        1.0 - math::exp(u) * (1.0 - u)
    }
}

impl CommLink {
    pub fn new(dev: &DeviceProfile, sys: &SystemParams) -> Self {
        CommLink {
            n: dev.feature_count as f64,
            bandwidth: sys.bandwidth,
            channel_noise: sys.channel_noise,
            channel_gain: dev.channel_gain,
            sensing_energy: sys.sensing_noise * dev.sensing_time,
            disposable: dev.disposable_energy(),
        }
    }

    /// Received SNR when spending energy `e` over time `t`.
    #[inline]
    pub fn snr(&self, t: f64, e: f64) -> f64 {
        e * self.channel_gain / (t * self.channel_noise)
    }

    /// Smallest quantization distortion the capacity bound allows in time
    /// `t` with energy `e`: `1 / (exp((t B / N) ln(1 + snr)) - 1)`.
    ///
    /// Underflows to `0.0` when the capacity is astronomically large.
    #[inline]
    pub fn tight_quant_distortion(&self, t: f64, e: f64) -> f64 {
        let exponent_bits = t * self.bandwidth / self.n;
        let rate = exponent_bits * math::ln_1p(self.snr(t, e));
        1.0 / math::exp_m1(rate)
    }

    /// Sensing distortion that exactly exhausts the energy left after
    /// transmitting with energy `e`.
    #[inline]
    pub fn tight_sensing_distortion(&self, e: f64) -> f64 {
        self.sensing_energy / (self.disposable - e)
    }

    /// Boundary objective `S(e) + D(t, e)`.  Production code works with
    /// [`CommLink::dphi_de`] only; tests difference this form against it.
    #[allow(dead_code)]
    #[inline]
    pub fn phi(&self, t: f64, e: f64) -> f64 {
        self.tight_sensing_distortion(e) + self.tight_quant_distortion(t, e)
    }

    /// Derivative of [`CommLink::phi`] in the transmit energy.
    ///
    /// `d S / d e = S^2 / sensing_energy` and
    /// `d D / d e = -D (D + 1) t B H / (N (t noise + e H))`.
    #[inline]
    pub fn dphi_de(&self, t: f64, e: f64) -> f64 {
        let s = self.tight_sensing_distortion(e);
        let d = self.tight_quant_distortion(t, e);
        let denom = t * self.channel_noise + e * self.channel_gain;
        s * s / self.sensing_energy
            - d * (d + 1.0) * t * self.bandwidth * self.channel_gain
                / (self.n * denom)
    }

    /// Transmit energy minimizing [`CommLink::phi`] at fixed time `t`.
    ///
    /// The derivative goes to `-inf` as `e -> 0` (no capacity) and `+inf`
    /// as `e -> disposable` (no sensing energy), so a sign bisection on the
    /// open interval always converges.
    pub fn optimal_comm_energy(&self, t: f64, iterations: usize) -> f64 {
        let mut lo = self.disposable * EDGE_FRACTION;
        let mut hi = self.disposable * (1.0 - EDGE_FRACTION);
        if self.dphi_de(t, lo) >= 0.0 {
            return lo;
        }
        if self.dphi_de(t, hi) <= 0.0 {
            return hi;
        }
        for _ in 0..iterations {
            let mid = 0.5 * (lo + hi);
            if self.dphi_de(t, mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Marginal value of communication time along the optimal-energy
    /// envelope: `-d/dt min_e phi(t, e) = D (D + 1) (B / N) log_gap(snr)`.
    ///
    /// Decreasing in `t` (the envelope is convex); the time stage equalizes
    /// `weight * marginal` across devices.
    pub fn time_marginal_optimal(&self, t: f64, iterations: usize) -> f64 {
        let e = self.optimal_comm_energy(t, iterations);
        self.time_marginal_fixed_energy(t, e)
    }

    /// Marginal value of communication time at a fixed transmit energy.
    pub fn time_marginal_fixed_energy(&self, t: f64, e: f64) -> f64 {
        let d = self.tight_quant_distortion(t, e);
        let x = self.snr(t, e);
        d * (d + 1.0) * (self.bandwidth / self.n) * log_gap(x)
    }

    /// Energy needed to deliver `bits` in time `t`:
    /// `(t noise / H) (exp(bits ln2 / (t B)) - 1)`.
    pub fn required_comm_energy(&self, t: f64, bits: f64) -> f64 {
        let u = bits * math::LN_2 / (t * self.bandwidth);
        t * self.channel_noise / self.channel_gain * math::exp_m1(u)
    }

    /// Magnitude of `d/dt required_comm_energy` (the required energy is
    /// decreasing and convex in time): `(noise / H) exp_gap(u)` scaled.
    pub fn required_energy_slope(&self, t: f64, bits: f64) -> f64 {
        let u = bits * math::LN_2 / (t * self.bandwidth);
        self.channel_noise / self.channel_gain * exp_gap(u)
    }

    /// Deliverable bits in time `t` with energy `e`.
    pub fn capacity_bits(&self, t: f64, e: f64) -> f64 {
        t * self.bandwidth * math::log2_1p(self.snr(t, e))
    }

    /// Upper bound of [`CommLink::capacity_bits`] over all times at fixed
    /// energy: `B e H / (noise ln2)`.
    pub fn capacity_bits_limit(&self, e: f64) -> f64 {
        self.bandwidth * e * self.channel_gain / (self.channel_noise * math::LN_2)
    }
}

/// Bisection for the root of a decreasing function on `[lo, hi]`, assuming
/// `f(lo) >= target >= f(hi)`; returns the clamped endpoint when the target
/// lies outside that range.
pub(crate) fn bisect_decreasing(
    mut lo: f64,
    mut hi: f64,
    target: f64,
    iterations: usize,
    f: impl Fn(f64) -> f64,
) -> f64 {
    if f(lo) <= target {
        return lo;
    }
    if f(hi) >= target {
        return hi;
    }
    for _ in 0..iterations {
        let mid = 0.5 * (lo + hi);
        if f(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn link() -> CommLink {
        CommLink {
            n: 50.0,
            bandwidth: 200.0,
            channel_noise: 1e-12,
            channel_gain: 3e-12,
            sensing_energy: 0.5,
            disposable: 0.14,
        }
    }

    #[test]
    fn gap_helpers_match_direct_forms() {
        // The naive direct forms suffer cancellation near zero (their own
        // rounding is ~1e-16 absolute), so the comparison band carries an
        // absolute floor alongside the relative term.
        for &x in &[1e-6, 1e-4, 1e-2, 0.5, 3.0, 100.0] {
            let direct = (1.0f64 + x).ln() - x / (1.0 + x);
            assert!(
                (log_gap(x) - direct).abs() < 1e-12 * direct.abs() + 5e-15,
                "log_gap({x})"
            );
        }
        for &u in &[1e-5f64, 1e-3, 0.1, 1.0, 5.0] {
            let direct = 1.0 - u.exp() * (1.0 - u);
            assert!(
                (exp_gap(u) - direct).abs() < 1e-10 * direct.abs() + 5e-15,
                "exp_gap({u})"
            );
        }
    }

    #[test]
    fn tight_quant_distortion_closes_the_capacity_bound() {
        let l = link();
        let (t, e) = (0.02, 0.05);
        let d = l.tight_quant_distortion(t, e);
        let required = l.n * math::log2_1p(1.0 / d);
        let capacity = l.capacity_bits(t, e);
        assert!((required - capacity).abs() < 1e-10 * capacity);
    }

    #[test]
    fn optimal_energy_is_interior_and_stationary() {
        let l = link();
        let t = 0.02;
        let e = l.optimal_comm_energy(t, 60);
        assert!(e > 0.0 && e < l.disposable);
        // The derivative changes sign across the solution.
        assert!(l.dphi_de(t, e * (1.0 - 1e-6)) < 0.0);
        assert!(l.dphi_de(t, e * (1.0 + 1e-6)) > 0.0);
        // Nearby energies are no better.
        let best = l.phi(t, e);
        for factor in [0.9, 0.99, 1.01, 1.1] {
            assert!(l.phi(t, e * factor) >= best);
        }
    }

    #[test]
    fn time_marginal_is_positive_and_decreasing() {
        let l = link();
        let m1 = l.time_marginal_optimal(0.01, 60);
        let m2 = l.time_marginal_optimal(0.02, 60);
        let m3 = l.time_marginal_optimal(0.05, 60);
        assert!(m1 > m2 && m2 > m3, "{m1} {m2} {m3}");
        assert!(m3 > 0.0);
    }

    #[test]
    fn time_marginal_matches_finite_difference() {
        let l = link();
        let t = 0.02;
        let h = 1e-7 * t;
        let fd = (l.phi(t + h, l.optimal_comm_energy(t + h, 80))
            - l.phi(t - h, l.optimal_comm_energy(t - h, 80)))
            / (2.0 * h);
        let analytic = -l.time_marginal_optimal(t, 80);
        assert!(
            (fd - analytic).abs() < 1e-5 * analytic.abs(),
            "fd {fd} vs analytic {analytic}"
        );
    }

    #[test]
    fn required_energy_inverts_capacity() {
        let l = link();
        let (t, e) = (0.02, 0.05);
        let bits = l.capacity_bits(t, e);
        let back = l.required_comm_energy(t, bits);
        assert!((back - e).abs() < 1e-10 * e);
    }

    #[test]
    fn required_energy_slope_matches_finite_difference() {
        let l = link();
        let (t, bits) = (0.02, 40.0);
        let h = 1e-7 * t;
        let fd = (l.required_comm_energy(t + h, bits)
            - l.required_comm_energy(t - h, bits))
            / (2.0 * h);
        assert!(fd < 0.0);
        let analytic = -l.required_energy_slope(t, bits);
        assert!((fd - analytic).abs() < 1e-6 * analytic.abs());
    }

    #[test]
    fn capacity_saturates_at_fixed_energy() {
        let l = link();
        let e = 0.05;
        let limit = l.capacity_bits_limit(e);
        assert!(l.capacity_bits(1.0, e) < limit);
        assert!(l.capacity_bits(1e6, e) < limit);
        assert!(l.capacity_bits(1e6, e) > 0.999 * limit);
    }
}
