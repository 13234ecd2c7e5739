use serde::{Deserialize, Serialize};

use super::AccuracyReport;
use crate::{Error, Result, Tensor, TensorError};

pub const FUSION_METHOD: &str = "weighted arithmetic mean of softmax outputs";

/// Non-negative net weights, normalized to sum 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionConfig {
    w1: f64,
    w2: f64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self { w1: 0.5, w2: 0.5 }
    }
}

impl FusionConfig {
    pub fn new(w1: f64, w2: f64) -> Result<Self> {
        if !(w1 >= 0.0 && w2 >= 0.0 && w1 + w2 > 0.0 && (w1 + w2).is_finite()) {
            return Err(Error::InvalidArgument(format!("fusion weights ({w1}, {w2}) must be non-negative, not both 0")));
        }
        let s = w1 + w2;
        Ok(Self { w1: w1 / s, w2: w2 / s })
    }

    pub fn weights(&self) -> (f64, f64) {
        (self.w1, self.w2)
    }
}

/// `w1·p1 + w2·p2`.
pub fn fuse_scores(p1: &[f64], p2: &[f64], cfg: &FusionConfig) -> Result<Vec<f64>> {
    if p1.len() != p2.len() {
        return Err(Error::Tensor(TensorError::Shape(format!(
            "fusing distributions of length {} and {}",
            p1.len(),
            p2.len()
        ))));
    }
    let (w1, w2) = cfg.weights();
    Ok(p1
        .iter()
        .zip(p2)
        .map(|(a, b)| if w2 == 0.0 || a == b { *a } else if w1 == 0.0 { *b } else { w1 * a + w2 * b })
        .collect())
}

/// Row-wise [`fuse_scores`] on `[N, K]` score tables.
pub fn fuse_tensors(p1: &Tensor, p2: &Tensor, cfg: &FusionConfig) -> Result<Tensor> {
    if p1.shape() != p2.shape() {
        return Err(Error::Tensor(TensorError::Shape(format!(
            "fusing {:?} with {:?}",
            p1.shape(),
            p2.shape()
        ))));
    }
    Ok(Tensor::new(p1.shape(), fuse_scores(p1.data(), p2.data(), cfg)?)?)
}

/// `Δ = acc_fused − acc_best_single`.
pub fn absolute_improvement(acc_fused: f64, acc_best_single: f64) -> f64 {
    acc_fused - acc_best_single
}

/// Share of the remaining error removed by fusion: `Δ / (1 − acc_best_single)`.
pub fn residual_error_reduction(acc_fused: f64, acc_best_single: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&acc_fused) || !(0.0..=1.0).contains(&acc_best_single) {
        return Err(Error::InvalidArgument(format!(
            "accuracies {acc_fused}, {acc_best_single} outside [0, 1]"
        )));
    }
    if acc_best_single >= 1.0 {
        return Err(Error::UndefinedReduction);
    }
    Ok(absolute_improvement(acc_fused, acc_best_single) / (1.0 - acc_best_single))
}

/// Two single-net reports, the fused one, and the improvement metrics per
/// quality subset (plus `all`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionReport {
    pub method: String,
    pub weights: (f64, f64),
    pub net1: AccuracyReport,
    pub net2: AccuracyReport,
    pub fused: AccuracyReport,
    pub gains: Vec<FusionGain>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionGain {
    pub subset: String,
    pub best_single: f64,
    pub fused: f64,
    pub absolute_improvement: f64,
    /// `None` when the best single net is already perfect.
    pub residual_error_reduction: Option<f64>,
}

impl FusionReport {
    pub fn new(cfg: &FusionConfig, net1: AccuracyReport, net2: AccuracyReport, fused: AccuracyReport) -> Self {
        let mut gains = vec![gain("all", net1.top1, net2.top1, fused.top1)];
        for (q, f) in &fused.per_quality {
            let a = net1.per_quality.get(q).map_or(0.0, |s| s.top1);
            let b = net2.per_quality.get(q).map_or(0.0, |s| s.top1);
            gains.push(gain(q, a, b, f.top1));
        }
        Self {
            method: FUSION_METHOD.to_string(),
            weights: cfg.weights(),
            net1,
            net2,
            fused,
            gains,
        }
    }

    pub fn gain(&self, subset: &str) -> Option<&FusionGain> {
        self.gains.iter().find(|g| g.subset == subset)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain struct")
    }
}

fn gain(subset: &str, a: f64, b: f64, fused: f64) -> FusionGain {
    let best = a.max(b);
    FusionGain {
        subset: subset.to_string(),
        best_single: best,
        fused,
        absolute_improvement: absolute_improvement(fused, best),
        residual_error_reduction: residual_error_reduction(fused, best).ok(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_example() {
        let f = fuse_scores(&[0.6, 0.4], &[0.2, 0.8], &FusionConfig::default()).unwrap();
        assert!((f[0] - 0.4).abs() < 1e-15 && (f[1] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn full_weight_returns_first() {
        let p = [0.25, 0.7, 0.05];
        assert_eq!(fuse_scores(&p, &[0.1, 0.1, 0.8], &FusionConfig::new(3.0, 0.0).unwrap()).unwrap(), p);
        assert_eq!(fuse_scores(&p, &p, &FusionConfig::new(0.3, 0.9).unwrap()).unwrap(), p);
    }

    #[test]
    fn weights_are_normalized() {
        assert_eq!(FusionConfig::new(1.0, 3.0).unwrap().weights(), (0.25, 0.75));
        assert!(FusionConfig::new(0.0, 0.0).is_err());
        assert!(FusionConfig::new(-1.0, 2.0).is_err());
    }

    #[test]
    fn rer_edge_cases() {
        assert_eq!(residual_error_reduction(0.7, 0.7).unwrap(), 0.0);
        assert!(matches!(residual_error_reduction(1.0, 1.0), Err(Error::UndefinedReduction)));
        assert!(fuse_scores(&[1.0], &[0.5, 0.5], &FusionConfig::default()).is_err());
    }
}
