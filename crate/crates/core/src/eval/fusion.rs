use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::seq::index;

use crate::detectors::ScoreMap;
use crate::error::{invalid, Error, Result};
use crate::linalg::{Cholesky, Matrix};
use crate::raster::Grid;
use crate::rng::{substream, Stage};

/// Side of the blocks the calibration sample is stratified over.
pub const CALIB_BLOCK: usize = 8;
pub const LOGISTIC_MAX_ITER: usize = 100;
pub const LOGISTIC_L2: f64 = 1e-3;

/// A z-normalised map.
#[derive(Debug, Clone, PartialEq)]
pub struct ZNorm {
    pub map: ScoreMap,
    pub mean: f64,
    pub std: f64,
    /// Set when the valid scores had zero spread; the map is then all zero.
    pub degenerate: bool,
}

/// `(s − mean) / std` over the valid pixels (population standard deviation).
pub fn znorm(map: &ScoreMap) -> Result<ZNorm> {
    let vals: Vec<f64> = map.valid_scores().collect();
    if vals.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} valid pixels in `{}`",
            vals.len(),
            map.detector
        )));
    }
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    let degenerate = !(std > 1e-300) || !std.is_finite();
    let scores = Grid::from_fn(map.scores.width(), map.scores.height(), |x, y| {
        if degenerate || !map.valid[(x, y)] {
            0.0
        } else {
            (map.scores[(x, y)] - mean) / std
        }
    });
    Ok(ZNorm {
        map: ScoreMap {
            detector: map.detector.clone(),
            scores,
            valid: map.valid.clone(),
        },
        mean,
        std,
        degenerate,
    })
}

/// Score-level fusion weights.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionWeights {
    pub detectors: Vec<String>,
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl FusionWeights {
    pub fn new(detectors: Vec<String>, weights: Vec<f64>, intercept: f64) -> Result<Self> {
        let w = Self {
            detectors,
            weights,
            intercept,
        };
        w.validate()?;
        Ok(w)
    }

    /// Weight `1/k` on each of `k` detectors.
    pub fn equal(detectors: &[&str]) -> Result<Self> {
        let k = detectors.len().max(1) as f64;
        Self::new(
            detectors.iter().map(|d| d.to_string()).collect(),
            vec![1.0 / k; detectors.len()],
            0.0,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.detectors.len() < 2 {
            return Err(invalid!("fusion needs at least two detectors"));
        }
        if self.detectors.len() != self.weights.len() {
            return Err(invalid!("one weight per detector is required"));
        }
        if !self.weights.iter().all(|w| w.is_finite()) || !self.intercept.is_finite() {
            return Err(invalid!("fusion weights must be finite"));
        }
        Ok(())
    }
}

fn check_maps(maps: &[ScoreMap]) -> Result<(usize, usize)> {
    let first = maps.first().ok_or_else(|| invalid!("no score maps"))?;
    let dims = first.dims();
    if maps.iter().any(|m| m.dims() != dims) {
        return Err(invalid!("score maps differ in size"));
    }
    Ok(dims)
}

/// `intercept + Σ wᵢ sᵢ` per pixel, valid where every input is valid.
pub fn fuse(name: &str, maps: &[ScoreMap], weights: &FusionWeights) -> Result<ScoreMap> {
    weights.validate()?;
    if maps.len() != weights.weights.len() {
        return Err(invalid!(
            "{} maps for {} weights",
            maps.len(),
            weights.weights.len()
        ));
    }
    let (w, h) = check_maps(maps)?;
    let valid = Grid::from_fn(w, h, |x, y| maps.iter().all(|m| m.valid[(x, y)]));
    let scores = Grid::from_fn(w, h, |x, y| {
        if !valid[(x, y)] {
            return 0.0;
        }
        maps.iter()
            .zip(&weights.weights)
            .fold(weights.intercept, |acc, (m, wt)| acc + wt * m.scores[(x, y)])
    });
    Ok(ScoreMap {
        detector: name.to_string(),
        scores,
        valid,
    })
}

/// Spatially stratified sample: in every `8 × 8` block (truncated at the
/// border) `⌈fraction · |block|⌉` pixels are drawn without replacement.
pub fn calibration_mask(width: usize, height: usize, fraction: f64, seed: u64) -> Result<Grid<bool>> {
    if !(fraction > 0.0 && fraction <= 0.5) {
        return Err(invalid!("calibration fraction {fraction} outside (0, 0.5]"));
    }
    let mut mask = Grid::filled(width, height, false);
    let bx = width.div_ceil(CALIB_BLOCK);
    let by = height.div_ceil(CALIB_BLOCK);
    for j in 0..by {
        for i in 0..bx {
            let x0 = i * CALIB_BLOCK;
            let y0 = j * CALIB_BLOCK;
            let bw = CALIB_BLOCK.min(width - x0);
            let bh = CALIB_BLOCK.min(height - y0);
            let count = bw * bh;
            let k = ((fraction * count as f64).ceil() as usize).min(count);
            let mut rng = substream(seed, Stage::Calibration, (j * bx + i) as u64);
            for p in index::sample(&mut rng, count, k) {
                mask[(x0 + p % bw, y0 + p / bw)] = true;
            }
        }
    }
    Ok(mask)
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// L2-penalised logistic regression by iteratively reweighted least squares.
///
/// `rows` holds `n × k` predictors. Minimises the mean negative
/// log-likelihood plus `λ/2 ‖w‖²`; the intercept is not penalised.
/// Returns `(weights, intercept)`.
pub fn logistic_irls(rows: &[f64], k: usize, labels: &[bool], l2: f64, max_iter: usize) -> Result<(Vec<f64>, f64)> {
    let n = labels.len();
    if rows.len() != n * k || n == 0 {
        return Err(invalid!("predictor matrix does not match labels"));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    if pos == 0 || pos == n {
        return Err(Error::FitFailed("calibration sample has a single class".into()));
    }
    let m = k + 1;
    let mut beta = vec![0.0; m];
    let prior = pos as f64 / n as f64;
    beta[k] = (prior / (1.0 - prior)).ln();
    let inv_n = 1.0 / n as f64;
    let objective = |b: &[f64]| -> f64 {
        let mut ll = 0.0;
        for (r, &y) in rows.chunks_exact(k).zip(labels) {
            let z = r.iter().zip(b).map(|(a, c)| a * c).sum::<f64>() + b[k];
            // log σ(z) for positives, log σ(−z) for negatives
            let t = if y { -z } else { z };
            ll -= if t > 0.0 { t + (-t).exp().ln_1p() } else { t.exp().ln_1p() };
        }
        ll * inv_n - 0.5 * l2 * b[..k].iter().map(|w| w * w).sum::<f64>()
    };
    let mut current = objective(&beta);
    let mut xi = vec![0.0; m];
    let mut trial = vec![0.0; m];
    for _ in 0..max_iter {
        let mut hess = Matrix::zeros(m);
        let mut grad = vec![0.0; m];
        for (r, &y) in rows.chunks_exact(k).zip(labels) {
            xi[..k].copy_from_slice(r);
            xi[k] = 1.0;
            let z: f64 = xi.iter().zip(&beta).map(|(a, b)| a * b).sum();
            let p = sigmoid(z);
            let resid = f64::from(u8::from(y)) - p;
            for (g, v) in grad.iter_mut().zip(&xi) {
                *g += resid * v * inv_n;
            }
            hess.add_outer(&xi, (p * (1.0 - p)).max(1e-12) * inv_n);
        }
        for j in 0..k {
            grad[j] -= l2 * beta[j];
            hess.set(j, j, hess.get(j, j) + l2);
        }
        let chol = Cholesky::new(&hess).map_err(|_| Error::FitFailed("singular Hessian".into()))?;
        let step = chol.solve(&grad);
        // step halving keeps the penalised likelihood non-decreasing
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            for ((tb, b), s) in trial.iter_mut().zip(&beta).zip(&step) {
                *tb = b + t * s;
            }
            let value = objective(&trial);
            if value.is_finite() && value >= current {
                current = value;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
        let largest = step.iter().fold(0.0f64, |a, s| a.max((t * s).abs()));
        beta.copy_from_slice(&trial);
        if largest < 1e-10 {
            break;
        }
    }
    if !beta.iter().all(|b| b.is_finite()) {
        return Err(Error::FitFailed("diverged".into()));
    }
    let intercept = beta.pop().unwrap_or(0.0);
    Ok((beta, intercept))
}

/// Learns fusion weights on a stratified `calib_fraction` sample of the
/// valid pixels. Inputs are expected to be z-normalised already.
pub fn learn_weights(
    maps: &[ScoreMap],
    truth: &Grid<bool>,
    calib_fraction: f64,
    seed: u64,
) -> Result<FusionWeights> {
    if maps.len() < 2 {
        return Err(invalid!("fusion needs at least two detectors"));
    }
    let (w, h) = check_maps(maps)?;
    if truth.dims() != (w, h) {
        return Err(invalid!("truth mask size differs from score maps"));
    }
    let calib = calibration_mask(w, h, calib_fraction, seed)?;
    let k = maps.len();
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for i in 0..w * h {
        let (x, y) = (i % w, i / w);
        if !calib[(x, y)] || !maps.iter().all(|m| m.valid[(x, y)]) {
            continue;
        }
        rows.extend(maps.iter().map(|m| m.scores[(x, y)]));
        labels.push(truth[(x, y)]);
    }
    let (weights, intercept) = logistic_irls(&rows, k, &labels, LOGISTIC_L2, LOGISTIC_MAX_ITER)?;
    FusionWeights::new(
        maps.iter().map(|m| m.detector.clone()).collect(),
        weights,
        intercept,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn map(name: &str, w: usize, h: usize, f: impl FnMut(usize, usize) -> f64) -> ScoreMap {
        ScoreMap::dense(name, Grid::from_fn(w, h, f))
    }

    #[test]
    fn znorm_moments_and_order() {
        let m = map("a", 7, 5, |x, y| ((x * 13 + y * 7) % 11) as f64 + 0.1 * x as f64);
        let z = znorm(&m).unwrap();
        let v: Vec<f64> = z.map.valid_scores().collect();
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let sd = (v.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n).sqrt();
        assert!(mean.abs() < 1e-12 && (sd - 1.0).abs() < 1e-12);
        let argmax = |s: &Grid<f64>| (0..s.len()).max_by(|&a, &b| s.as_slice()[a].total_cmp(&s.as_slice()[b]));
        assert_eq!(argmax(&m.scores), argmax(&z.map.scores));
        assert!(!z.degenerate);
    }

    #[test]
    fn znorm_constant_is_degenerate() {
        let z = znorm(&map("c", 4, 4, |_, _| 3.0)).unwrap();
        assert!(z.degenerate);
        assert!(z.map.scores.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn unit_weight_passes_first_map() {
        let a = map("a", 6, 6, |x, y| (x * y) as f64);
        let b = map("b", 6, 6, |x, _| x as f64 * -2.0);
        let w = FusionWeights::new(alloc::vec!["a".into(), "b".into()], alloc::vec![1.0, 0.0], 0.0).unwrap();
        let f = fuse("f", &[a.clone(), b], &w).unwrap();
        assert_eq!(f.scores, a.scores);
    }

    #[test]
    fn fuse_rejects_mismatch() {
        let a = map("a", 6, 6, |_, _| 0.0);
        let b = map("b", 5, 6, |_, _| 0.0);
        assert!(fuse("f", &[a, b], &FusionWeights::equal(&["a", "b"]).unwrap()).is_err());
        assert!(FusionWeights::equal(&["a"]).is_err());
    }

    #[test]
    fn calibration_sample_is_stratified() {
        let m = calibration_mask(64, 40, 0.1, 9).unwrap();
        for j in 0..5 {
            for i in 0..8 {
                let mut c = 0;
                for y in j * 8..j * 8 + 8 {
                    for x in i * 8..i * 8 + 8 {
                        c += usize::from(m[(x, y)]);
                    }
                }
                assert_eq!(c, 7);
            }
        }
        assert_eq!(m, calibration_mask(64, 40, 0.1, 9).unwrap());
        assert!(calibration_mask(8, 8, 0.6, 0).is_err());
    }

    #[test]
    fn separating_detector_dominates() {
        let (w, h) = (64, 64);
        let truth = Grid::from_fn(w, h, |x, y| (20..40).contains(&x) && (20..40).contains(&y));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let good = map("good", w, h, |x, y| if truth[(x, y)] { 1.0 } else { -1.0 });
        let noise = map("noise", w, h, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        let z: Vec<ScoreMap> = [good, noise].iter().map(|m| znorm(m).unwrap().map).collect();
        let fw = learn_weights(&z, &truth, 0.1, 1).unwrap();
        assert!(fw.weights[0].abs() >= 5.0 * fw.weights[1].abs(), "{:?}", fw.weights);
        assert_eq!(fw, learn_weights(&z, &truth, 0.1, 1).unwrap());
    }

    #[test]
    fn single_class_fit_fails() {
        let truth = Grid::filled(16, 16, false);
        let a = map("a", 16, 16, |x, _| x as f64);
        let b = map("b", 16, 16, |_, y| y as f64);
        assert!(matches!(learn_weights(&[a, b], &truth, 0.1, 0), Err(Error::FitFailed(_))));
    }
}
