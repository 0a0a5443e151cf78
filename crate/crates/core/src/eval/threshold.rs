use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::detectors::ScoreMap;
use crate::error::{invalid, Error, Result};
use crate::raster::Grid;

/// Fewest expected exceedances for which a PFA quantile is accepted.
pub const MIN_EXPECTED_EXCEEDANCES: f64 = 10.0;

/// Empirical `(1 − pfa)` quantile of `background` with the higher-rank
/// convention: the `⌈(1 − pfa)·n⌉`-th order statistic. Detection is
/// `score > threshold`, so at most `⌊pfa·n⌋` background samples exceed it.
pub fn quantile_threshold(background: &mut [f64], pfa: f64) -> Result<f64> {
    if !(pfa > 0.0 && pfa <= 1.0) {
        return Err(invalid!("pfa {pfa} outside (0, 1]"));
    }
    let n = background.len();
    if (n as f64) * pfa < MIN_EXPECTED_EXCEEDANCES {
        return Err(Error::InsufficientData(format!(
            "{n} background pixels cannot resolve pfa {pfa}"
        )));
    }
    if background.iter().any(|v| v.is_nan()) {
        return Err(invalid!("NaN background score"));
    }
    background.sort_by(f64::total_cmp);
    let rank = ((1.0 - pfa) * n as f64 - 1e-9).ceil().max(0.0) as usize;
    Ok(background[rank.saturating_sub(1).min(n - 1)])
}

/// Threshold from the valid pixels of `map` that lie in `background`.
pub fn threshold_at_pfa(map: &ScoreMap, background: &Grid<bool>, pfa: f64) -> Result<f64> {
    if !map.scores.same_dims(background) {
        return Err(invalid!("background mask size differs from score map"));
    }
    let mut bg: Vec<f64> = map
        .scores
        .iter()
        .zip(map.valid.iter())
        .zip(background.iter())
        .filter(|((_, v), b)| **v && **b)
        .map(|((s, _), _)| *s)
        .collect();
    quantile_threshold(&mut bg, pfa)
}

/// Fraction of `scores` strictly above `threshold`.
pub fn exceedance(scores: &[f64], threshold: f64) -> f64 {
    if scores.is_empty() {
        return 0.0;
    }
    scores.iter().filter(|&&s| s > threshold).count() as f64 / scores.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_statistic_arithmetic() {
        let mut s: Vec<f64> = (1..=1000).map(f64::from).collect();
        let t = quantile_threshold(&mut s, 1e-2).unwrap();
        assert_eq!(t, 990.0);
        assert_eq!(s.iter().filter(|&&v| v > t).count(), 10);
    }

    #[test]
    fn pfa_one_is_minimum() {
        let mut s: Vec<f64> = (0..20).map(|i| f64::from(i) * 0.5 + 3.0).rev().collect();
        assert_eq!(quantile_threshold(&mut s, 1.0).unwrap(), 3.0);
    }

    #[test]
    fn constant_background() {
        let mut s = alloc::vec![2.5; 500];
        let t = quantile_threshold(&mut s, 0.05).unwrap();
        assert_eq!(t, 2.5);
        assert_eq!(exceedance(&s, t), 0.0);
    }

    #[test]
    fn too_few_pixels() {
        let mut s = alloc::vec![0.0; 999];
        assert!(matches!(quantile_threshold(&mut s, 1e-2), Err(Error::InsufficientData(_))));
        assert!(quantile_threshold(&mut s, 0.0).is_err());
    }

    #[test]
    fn exceedance_bounds() {
        for n in [1000usize, 1234, 5003] {
            for pfa in [0.01, 0.013, 0.1, 0.37] {
                let mut s: Vec<f64> = (0..n).map(|i| ((i * 7919) % n) as f64).collect();
                let t = quantile_threshold(&mut s, pfa).unwrap();
                let e = exceedance(&s, t);
                assert!(e <= pfa + 1e-12, "n={n} pfa={pfa} e={e}");
                assert!(e > pfa - 2.0 / n as f64);
            }
        }
    }
}
