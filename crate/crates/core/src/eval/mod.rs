//! Score standardisation, fusion, PFA-anchored thresholds, morphological
//! cleanup and detection metrics.

mod fusion;
mod metrics;
mod morph;
mod threshold;

use alloc::string::String;
use alloc::vec::Vec;

pub use fusion::{
    calibration_mask, fuse, learn_weights, logistic_irls, znorm, FusionWeights, ZNorm, CALIB_BLOCK,
    LOGISTIC_L2, LOGISTIC_MAX_ITER,
};
pub use metrics::{average_precision, f1_at, f1_score, pr_curve, roc_auc, roc_curve, trapezoid};
pub use morph::{closing, dilate, erode, morph_clean, opening};
pub use threshold::{exceedance, quantile_threshold, threshold_at_pfa, MIN_EXPECTED_EXCEEDANCES};

use crate::detectors::ScoreMap;
use crate::error::{invalid, Result};
use crate::raster::Grid;

/// Metrics of one detector on one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub detector: String,
    pub roc_auc: f64,
    pub ap: f64,
    /// F1 of the morphologically cleaned detection mask.
    pub f1: f64,
    pub pfa_target: f64,
    pub threshold: f64,
}

/// Evaluation options.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalConfig {
    pub pfa: f64,
    /// Half-width of the square structuring element; 0 disables cleanup.
    pub morph_radius: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            pfa: 1e-3,
            morph_radius: 1,
        }
    }
}

/// Valid scores and their labels, in raster order.
pub fn labelled_scores(map: &ScoreMap, truth: &Grid<bool>) -> Result<(Vec<f64>, Vec<bool>)> {
    if !map.scores.same_dims(truth) {
        return Err(invalid!("truth mask size differs from score map"));
    }
    Ok(map
        .scores
        .iter()
        .zip(map.valid.iter())
        .zip(truth.iter())
        .filter(|((_, v), _)| **v)
        .map(|((s, _), t)| (*s, *t))
        .unzip())
}

/// `pfa`, raised to the smallest value `n_background` pixels can resolve.
pub fn effective_pfa(pfa: f64, n_background: usize) -> f64 {
    let floor = MIN_EXPECTED_EXCEEDANCES / n_background.max(1) as f64;
    pfa.max(floor).min(1.0)
}

/// ROC-AUC and AP on raw scores; F1 after thresholding at the background
/// PFA quantile and morphological cleanup. Background = valid pixels
/// outside `truth`. Scenes too small for the requested PFA use
/// [`effective_pfa`], which is what `pfa_target` reports.
pub fn evaluate(map: &ScoreMap, truth: &Grid<bool>, cfg: &EvalConfig) -> Result<MetricReport> {
    let (scores, labels) = labelled_scores(map, truth)?;
    let roc = roc_auc(&scores, &labels)?;
    let ap = average_precision(&scores, &labels)?;
    let background = truth.map(|t| !t);
    let n_bg = labels.iter().filter(|&&t| !t).count();
    let pfa = effective_pfa(cfg.pfa, n_bg);
    let threshold = threshold_at_pfa(map, &background, pfa)?;
    let detected = morph_clean(&map.detections(threshold), cfg.morph_radius);
    let f1 = f1_at(&detected, truth, &map.valid)?;
    Ok(MetricReport {
        detector: map.detector.clone(),
        roc_auc: roc,
        ap,
        f1,
        pfa_target: pfa,
        threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluate_clean_square() {
        let (w, h) = (120, 120);
        let truth = Grid::from_fn(w, h, |x, y| (40..55).contains(&x) && (40..55).contains(&y));
        let map = ScoreMap::dense(
            "toy",
            Grid::from_fn(w, h, |x, y| {
                let base = ((x * 31 + y * 17) % 97) as f64 / 97.0;
                if truth[(x, y)] {
                    base + 2.0
                } else {
                    base
                }
            }),
        );
        let r = evaluate(&map, &truth, &EvalConfig::default()).unwrap();
        assert_eq!(r.roc_auc, 1.0);
        assert_eq!(r.ap, 1.0);
        assert_eq!(r.f1, 1.0);
        assert_eq!(r.pfa_target, 1e-3);
    }

    #[test]
    fn small_scene_raises_pfa() {
        assert_eq!(effective_pfa(1e-3, 4000), 2.5e-3);
        assert_eq!(effective_pfa(1e-3, 20_000), 1e-3);
        assert_eq!(effective_pfa(1e-3, 3), 1.0);
    }
}
