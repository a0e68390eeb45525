//! The ratio structure of the gain objective and its auxiliary weights.
//!
//! Every (device, element, class-pair) triple with distinct centroids
//! contributes one ratio `1 / B_i` to the total gain, where
//! `B_i = coeff_i * (base_variance_i + S_k + D_k)` is affine in the
//! device's distortions.  The outer loop attaches an auxiliary weight `y_i`
//! to each ratio; for fixed weights the inner objective is
//! `sum_i y_i (1 - y_i B_i)`, which depends on the allocation only through
//! per-device totals `w_k = sum_{i in k} y_i^2 coeff_i` multiplying
//! `S_k + D_k`.
//!
//! Class pairs with identical centroids contribute zero gain for every
//! allocation and are excluded from the ratio set; a device all of whose
//! pairs are excluded is gain-inert.

use alloc::vec::Vec;

use crate::model::{ClassStatistics, DeviceProfile, TransformedAllocation};

/// One ratio of the gain objective.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioTerm {
    /// Device contributing the term.
    pub device: usize,
    /// Feature element within the device.
    pub element: usize,
    /// Unordered class pair `(class_a < class_b)`.
    pub class_a: usize,
    pub class_b: usize,
    /// Squared centroid gap of the pair on this element; strictly positive.
    pub gap_sq: f64,
    /// Allocation-independent variance `source + clutter`.
    pub base_variance: f64,
    /// Denominator slope: `B = coeff * (base_variance + S + D)` where
    /// `coeff = pair_count_scale / gap_sq`.
    pub coeff: f64,
}

/// All ratio terms of an instance plus device bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioSystem {
    pub terms: Vec<RatioTerm>,
    device_count: usize,
}

/// Auxiliary weights of the ratio transform, aligned with
/// [`RatioSystem::terms`].
///
/// The underlying transform carries a second multiplier per ratio that is
/// identically equal to `y` for unit numerators, so only `y` is stored.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxiliaryVars {
    pub y: Vec<f64>,
}

impl RatioSystem {
    /// Collects the ratio terms, skipping zero-gap pairs.
    ///
    /// # Panics
    ///
    /// Panics on shape mismatches; validate inputs first.
    pub fn build(stats: &ClassStatistics, devices: &[DeviceProfile]) -> Self {
        assert_eq!(stats.per_device.len(), devices.len());
        let l = stats.num_classes as f64;
        let pair_scale = l * (l - 1.0) / 2.0;
        let mut terms = Vec::new();
        for (k, dev) in devices.iter().enumerate() {
            let fs = &stats.per_device[k];
            for n in 0..dev.feature_count {
                let base_variance = fs.variances[n] + dev.clutter_variance;
                for (a, b) in stats.class_pairs() {
                    let gap = fs.centroids[a][n] - fs.centroids[b][n];
                    let gap_sq = gap * gap;
                    if gap_sq > 0.0 {
                        terms.push(RatioTerm {
                            device: k,
                            element: n,
                            class_a: a,
                            class_b: b,
                            gap_sq,
                            base_variance,
                            coeff: pair_scale / gap_sq,
                        });
                    }
                }
            }
        }
        RatioSystem {
            terms,
            device_count: devices.len(),
        }
    }

    pub fn device_count(&self) -> usize {
        self.device_count
    }

    /// Denominator of one term at the given device distortions.
    #[inline]
    pub fn denominator(&self, term: &RatioTerm, ta: &TransformedAllocation) -> f64 {
        let k = term.device;
        term.coeff
            * (term.base_variance
                + ta.sensing_distortion[k]
                + ta.quant_distortion[k])
    }

    /// Total gain restricted to the ratio set (equals the full gain, since
    /// excluded pairs contribute zero).
    pub fn ratio_gain(&self, ta: &TransformedAllocation) -> f64 {
        self.terms
            .iter()
            .map(|t| 1.0 / self.denominator(t, ta))
            .sum()
    }

    /// Fresh auxiliary weights `y_i = 1 / B_i` at an allocation.
    pub fn aux_at(&self, ta: &TransformedAllocation) -> AuxiliaryVars {
        AuxiliaryVars {
            y: self
                .terms
                .iter()
                .map(|t| 1.0 / self.denominator(t, ta))
                .collect(),
        }
    }

    /// Per-device weights `w_k = sum y_i^2 coeff_i`: the slope of the inner
    /// objective in the device's distortion total `S_k + D_k`.
    pub fn gain_weights(&self, aux: &AuxiliaryVars) -> Vec<f64> {
        let mut w = alloc::vec![0.0; self.device_count];
        for (term, &y) in self.terms.iter().zip(&aux.y) {
            w[term.device] += y * y * term.coeff;
        }
        w
    }

    /// Inner objective `sum_i y_i (1 - y_i B_i)` at an allocation.
    pub fn inner_objective(
        &self,
        aux: &AuxiliaryVars,
        ta: &TransformedAllocation,
    ) -> f64 {
        self.terms
            .iter()
            .zip(&aux.y)
            .map(|(t, &y)| y * (1.0 - y * self.denominator(t, ta)))
            .sum()
    }

    /// Fixed-point residual `max_i |y_i B_i - 1|`.
    pub fn residual(&self, aux: &AuxiliaryVars, ta: &TransformedAllocation) -> f64 {
        self.terms
            .iter()
            .zip(&aux.y)
            .map(|(t, &y)| (y * self.denominator(t, ta) - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FeatureStatistics;

    fn device(feature_count: usize) -> DeviceProfile {
        DeviceProfile {
            feature_count,
            clutter_variance: 0.5,
            quantization_variance: 1.0,
            sensing_time: 0.5,
            computation_time: 0.1,
            computation_energy: 0.01,
            energy_budget: 0.15,
            channel_gain: 3e-12,
        }
    }

    fn stats() -> ClassStatistics {
        ClassStatistics {
            num_classes: 3,
            per_device: vec![
                FeatureStatistics {
                    centroids: vec![vec![0.0], vec![2.0], vec![0.0]],
                    variances: vec![1.0],
                },
                FeatureStatistics {
                    // All-equal centroids: gain-inert device.
                    centroids: vec![vec![1.0], vec![1.0], vec![1.0]],
                    variances: vec![1.0],
                },
            ],
        }
    }

    fn allocation() -> TransformedAllocation {
        TransformedAllocation {
            sensing_distortion: vec![0.5, 0.5],
            quant_distortion: vec![0.5, 0.5],
            comm_energy: vec![0.05, 0.05],
            comm_time: vec![0.02, 0.02],
        }
    }

    #[test]
    fn zero_gap_pairs_are_excluded() {
        let sys = RatioSystem::build(&stats(), &[device(1), device(1)]);
        // Device 0 has pairs (0,1) and (1,2) with gap 2, pair (0,2) with gap
        // 0; device 1 has none.
        assert_eq!(sys.terms.len(), 2);
        assert!(sys.terms.iter().all(|t| t.device == 0));
    }

    #[test]
    fn ratio_gain_matches_model_total() {
        let devices = [device(1), device(1)];
        let st = stats();
        let sys = RatioSystem::build(&st, &devices);
        let ta = allocation();
        let from_ratios = sys.ratio_gain(&ta);
        let from_model = crate::model::total_gain(&st, &devices, &ta).total;
        assert!(
            (from_ratios - from_model).abs() < 1e-12 * from_model,
            "{from_ratios} vs {from_model}"
        );
    }

    #[test]
    fn fixed_point_weights_have_zero_residual() {
        let sys = RatioSystem::build(&stats(), &[device(1), device(1)]);
        let ta = allocation();
        let aux = sys.aux_at(&ta);
        assert!(sys.residual(&aux, &ta) < 1e-15);
        // At the fixed point the inner objective telescopes to zero.
        assert!(sys.inner_objective(&aux, &ta).abs() < 1e-15);
    }

    #[test]
    fn gain_weights_accumulate_per_device() {
        let sys = RatioSystem::build(&stats(), &[device(1), device(1)]);
        let aux = AuxiliaryVars {
            y: vec![1.0, 2.0],
        };
        let w = sys.gain_weights(&aux);
        // coeff = pair_scale / gap^2 = 3 / 4 for both terms.
        assert!((w[0] - (1.0 * 0.75 + 4.0 * 0.75)).abs() < 1e-15);
        assert_eq!(w[1], 0.0);
    }
}
