//! ROC-AUC, average precision, F1 and the curves behind them.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::raster::Grid;

fn class_counts(truth: &[bool]) -> (usize, usize) {
    let p = truth.iter().filter(|&&t| t).count();
    (p, truth.len() - p)
}

fn check_inputs(scores: &[f64], truth: &[bool]) -> Result<(usize, usize)> {
    if scores.len() != truth.len() {
        return Err(Error::InvalidArgument("scores and labels differ in length".into()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidArgument("NaN score".into()));
    }
    let (p, n) = class_counts(truth);
    if p == 0 || n == 0 {
        return Err(Error::UndefinedMetric("both classes must be present".into()));
    }
    Ok((p, n))
}

/// Indices sorted by descending score.
fn order_desc(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    idx
}

/// Cumulative `(true positives, false positives)` after each block of tied
/// scores, walking from the highest score down.
fn tie_blocks(scores: &[f64], truth: &[bool]) -> Vec<(usize, usize)> {
    let idx = order_desc(scores);
    let mut out = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < idx.len() {
        let s = scores[idx[i]];
        while i < idx.len() && scores[idx[i]] == s {
            if truth[idx[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        out.push((tp, fp));
    }
    out
}

/// Area under the ROC curve as the normalised Mann–Whitney statistic;
/// ties count one half.
pub fn roc_auc(scores: &[f64], truth: &[bool]) -> Result<f64> {
    let (p, n) = check_inputs(scores, truth)?;
    // ascending walk: each positive earns the negatives strictly below it
    // plus half of the tied negatives
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut neg_below = 0u64;
    let mut twice_u = 0u64;
    let mut i = 0;
    while i < idx.len() {
        let s = scores[idx[i]];
        let (mut pos_tied, mut neg_tied) = (0u64, 0u64);
        while i < idx.len() && scores[idx[i]] == s {
            if truth[idx[i]] {
                pos_tied += 1;
            } else {
                neg_tied += 1;
            }
            i += 1;
        }
        twice_u += pos_tied * (2 * neg_below + neg_tied);
        neg_below += neg_tied;
    }
    Ok(twice_u as f64 / (2.0 * p as f64 * n as f64))
}

/// Average precision: `Σ (R_k − R_{k−1}) · P_k` over distinct thresholds.
pub fn average_precision(scores: &[f64], truth: &[bool]) -> Result<f64> {
    let (p, _) = check_inputs(scores, truth)?;
    let mut ap = 0.0;
    let mut prev_tp = 0usize;
    for (tp, fp) in tie_blocks(scores, truth) {
        if tp > prev_tp {
            let precision = tp as f64 / (tp + fp) as f64;
            ap += (tp - prev_tp) as f64 * precision;
        }
        prev_tp = tp;
    }
    Ok(ap / p as f64)
}

/// F1 of a binary detection mask against the truth; 0 when nothing is
/// detected.
pub fn f1_score(detected: &[bool], truth: &[bool]) -> Result<f64> {
    if detected.len() != truth.len() {
        return Err(Error::InvalidArgument("mask and labels differ in length".into()));
    }
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fneg = 0usize;
    for (&d, &t) in detected.iter().zip(truth) {
        match (d, t) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
            _ => {}
        }
    }
    if tp == 0 {
        return Ok(0.0);
    }
    Ok(2.0 * tp as f64 / (2 * tp + fp + fneg) as f64)
}

/// F1 over the pixels where `valid` holds.
pub fn f1_at(mask: &Grid<bool>, truth: &Grid<bool>, valid: &Grid<bool>) -> Result<f64> {
    if !mask.same_dims(truth) || !mask.same_dims(valid) {
        return Err(Error::InvalidArgument("mask sizes differ".into()));
    }
    let (d, t): (Vec<bool>, Vec<bool>) = mask
        .iter()
        .zip(truth.iter())
        .zip(valid.iter())
        .filter(|(_, v)| **v)
        .map(|((d, t), _)| (*d, *t))
        .unzip();
    f1_score(&d, &t)
}

/// ROC points `(false alarm rate, detection rate)` from `(0, 0)` to `(1, 1)`.
pub fn roc_curve(scores: &[f64], truth: &[bool]) -> Result<Vec<(f64, f64)>> {
    let (p, n) = check_inputs(scores, truth)?;
    let mut pts = Vec::with_capacity(scores.len() + 1);
    pts.push((0.0, 0.0));
    for (tp, fp) in tie_blocks(scores, truth) {
        pts.push((fp as f64 / n as f64, tp as f64 / p as f64));
    }
    Ok(pts)
}

/// Precision–recall points `(recall, precision)`, one per distinct threshold.
pub fn pr_curve(scores: &[f64], truth: &[bool]) -> Result<Vec<(f64, f64)>> {
    let (p, _) = check_inputs(scores, truth)?;
    Ok(tie_blocks(scores, truth)
        .into_iter()
        .map(|(tp, fp)| (tp as f64 / p as f64, tp as f64 / (tp + fp) as f64))
        .collect())
}

/// Trapezoid area under a piecewise-linear curve.
pub fn trapezoid(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) * 0.5)
        .sum()
}
