use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use super::background::{fit_rows, BackgroundModel, FitConfig, ScatterKind};
use super::ScoreMap;
use crate::error::{invalid, Result};
use crate::features::{FeatureStack, PixelVector};
use crate::raster::Grid;

/// Global RX options.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RxConfig {
    pub fit: FitConfig,
    /// Z-score every plane before fitting so the identity shrinkage target
    /// weighs planes evenly.
    pub standardize: bool,
}

impl RxConfig {
    pub fn sample() -> Self {
        Self {
            fit: FitConfig::sample(),
            standardize: true,
        }
    }

    pub fn robust() -> Self {
        Self {
            fit: FitConfig::tyler(),
            standardize: true,
        }
    }
}

/// Squared Mahalanobis distance of `x` from the background model.
pub fn rx_score(x: &PixelVector, model: &BackgroundModel) -> f64 {
    let mut scratch = vec![0.0; 2 * model.dim()];
    model.mahalanobis(&x.x, &mut scratch)
}

/// Per-plane mean and standard deviation; zero spread maps to 1.
pub(crate) fn plane_moments(rows: &[f64], d: usize) -> (Vec<f64>, Vec<f64>) {
    let n = (rows.len() / d).max(1) as f64;
    let mut mean = vec![0.0; d];
    for r in rows.chunks_exact(d) {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; d];
    for r in rows.chunks_exact(d) {
        for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    let sd = var
        .iter()
        .map(|s| {
            let sd = (s / n).sqrt();
            if sd > 0.0 && sd.is_finite() {
                sd
            } else {
                1.0
            }
        })
        .collect();
    (mean, sd)
}

pub(crate) fn standardize_rows(rows: &mut [f64], d: usize) {
    let (mean, sd) = plane_moments(rows, d);
    for r in rows.chunks_exact_mut(d) {
        for ((v, m), s) in r.iter_mut().zip(&mean).zip(&sd) {
            *v = (*v - m) / s;
        }
    }
}

/// RX with one background model for the whole scene.
///
/// The model is fitted on every pixel, or on `fit_mask` pixels when given.
/// The map is named `rx` for sample scatter and `rxrob` for Tyler scatter.
pub fn global_rx_map(stack: &FeatureStack, cfg: &RxConfig, fit_mask: Option<&Grid<bool>>) -> Result<ScoreMap> {
    let d = stack.depth();
    let mut rows = stack.to_rows();
    if cfg.standardize {
        standardize_rows(&mut rows, d);
    }
    let model = match fit_mask {
        Some(mask) => {
            if mask.dims() != stack.dims() {
                return Err(invalid!("fit mask does not match stack size"));
            }
            let subset: Vec<f64> = rows
                .chunks_exact(d)
                .zip(mask.iter())
                .filter(|(_, m)| **m)
                .flat_map(|(r, _)| r.iter().copied())
                .collect();
            fit_rows(&subset, d, &cfg.fit)?
        }
        None => fit_rows(&rows, d, &cfg.fit)?,
    };
    let mut scratch = vec![0.0; 2 * d];
    let scores: Vec<f64> = rows
        .chunks_exact(d)
        .map(|r| model.mahalanobis(r, &mut scratch))
        .collect();
    let name = match cfg.fit.kind {
        ScatterKind::Sample => "rx",
        ScatterKind::Tyler => "rxrob",
    };
    let (w, h) = stack.dims();
    Ok(ScoreMap::dense(name, Grid::from_vec(w, h, scores)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::Plane;
    use crate::linalg::Matrix;

    #[test]
    fn score_at_mean_is_zero() {
        let m = BackgroundModel::new(vec![1.0, -2.0], Matrix::identity(2), ScatterKind::Sample).unwrap();
        let x = PixelVector {
            index: 0,
            x: vec![1.0, -2.0],
        };
        assert_eq!(rx_score(&x, &m), 0.0);
    }

    #[test]
    fn identity_scatter_gives_squared_norm() {
        let m = BackgroundModel::new(vec![0.0, 0.0], Matrix::identity(2), ScatterKind::Sample).unwrap();
        let x = PixelVector {
            index: 0,
            x: vec![3.0, 4.0],
        };
        assert!((rx_score(&x, &m) - 25.0).abs() < 1e-12);
    }

    #[test]
    fn diagonal_scatter() {
        let m = BackgroundModel::new(vec![0.0, 0.0], Matrix::diag(&[4.0, 1.0]), ScatterKind::Sample).unwrap();
        let x = PixelVector {
            index: 0,
            x: vec![2.0, 1.0],
        };
        assert!((rx_score(&x, &m) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn identical_pixels_score_zero() {
        let st = FeatureStack::from_planes(vec![
            (Plane::LogI1, Grid::filled(6, 6, 2.0)),
            (Plane::Coherence, Grid::filled(6, 6, 0.4)),
        ])
        .unwrap();
        for cfg in [RxConfig::sample(), RxConfig::robust()] {
            let map = global_rx_map(&st, &cfg, None).unwrap();
            assert!(map.scores.iter().all(|&s| s == 0.0));
        }
    }
}
