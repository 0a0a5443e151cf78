use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{invalid, Error, Result};
use crate::features::PixelVector;
use crate::linalg::{Cholesky, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScatterKind {
    /// Sample mean and covariance.
    Sample,
    /// Coordinatewise median and Tyler's M-estimator of scatter.
    Tyler,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    pub kind: ScatterKind,
    /// Weight of the scaled-identity target.
    pub shrinkage: f64,
    /// Tyler fixed-point iterations.
    pub max_iter: usize,
}

impl FitConfig {
    pub fn sample() -> Self {
        Self {
            kind: ScatterKind::Sample,
            shrinkage: 0.05,
            max_iter: 30,
        }
    }

    pub fn tyler() -> Self {
        Self {
            kind: ScatterKind::Tyler,
            ..Self::sample()
        }
    }
}

/// Location and scatter of the background, with its factorisation.
#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundModel {
    pub mean: Vec<f64>,
    pub scatter: Matrix,
    pub kind: ScatterKind,
    chol: Cholesky,
}

impl BackgroundModel {
    pub fn new(mean: Vec<f64>, scatter: Matrix, kind: ScatterKind) -> Result<Self> {
        if mean.len() != scatter.dim() {
            return Err(invalid!("mean and scatter dimensions differ"));
        }
        let chol = Cholesky::new(&scatter)?;
        Ok(Self {
            mean,
            scatter,
            kind,
            chol,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// `(x−μ)ᵀ Σ⁻¹ (x−μ)`; `scratch` needs `2d` slots.
    #[inline]
    pub fn mahalanobis(&self, x: &[f64], scratch: &mut [f64]) -> f64 {
        let d = self.dim();
        let (diff, work) = scratch.split_at_mut(d);
        for ((o, a), m) in diff.iter_mut().zip(x).zip(&self.mean) {
            *o = a - m;
        }
        self.chol.quad_form(diff, work)
    }
}

/// Fits a background model to pixel vectors.
pub fn fit_background(vectors: &[PixelVector], cfg: &FitConfig) -> Result<BackgroundModel> {
    let Some(first) = vectors.first() else {
        return Err(Error::InsufficientData("no background vectors".into()));
    };
    let d = first.x.len();
    let mut rows = Vec::with_capacity(vectors.len() * d);
    for v in vectors {
        if v.x.len() != d {
            return Err(invalid!("background vectors differ in length"));
        }
        rows.extend_from_slice(&v.x);
    }
    fit_rows(&rows, d, cfg)
}

/// Fits a background model to `rows.len() / d` row-major samples.
///
/// Needs at least `d + 1` samples; with positive shrinkage any two samples
/// suffice because the identity target keeps the scatter definite.
pub fn fit_rows(rows: &[f64], d: usize, cfg: &FitConfig) -> Result<BackgroundModel> {
    if d == 0 || rows.len() % d != 0 {
        return Err(invalid!("sample buffer is not a whole number of {d}-vectors"));
    }
    if !(0.0..1.0).contains(&cfg.shrinkage) {
        return Err(invalid!("shrinkage {} outside [0, 1)", cfg.shrinkage));
    }
    let n = rows.len() / d;
    let needed = if cfg.shrinkage > 0.0 { 2 } else { d + 1 };
    if n < needed.max(2) {
        return Err(Error::InsufficientData(alloc::format!(
            "{n} background samples for dimension {d}"
        )));
    }
    match cfg.kind {
        ScatterKind::Sample => fit_sample(rows, d, n, cfg.shrinkage),
        ScatterKind::Tyler => fit_tyler(rows, d, n, cfg),
    }
}

fn column_mean(rows: &[f64], d: usize, n: usize) -> Vec<f64> {
    let mut mean = vec![0.0; d];
    for r in rows.chunks_exact(d) {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    mean
}

fn column_median(rows: &[f64], d: usize, n: usize) -> Vec<f64> {
    let mut col = vec![0.0; n];
    (0..d)
        .map(|k| {
            for (c, r) in col.iter_mut().zip(rows.chunks_exact(d)) {
                *c = r[k];
            }
            col.sort_by(f64::total_cmp);
            if n % 2 == 1 {
                col[n / 2]
            } else {
                0.5 * (col[n / 2 - 1] + col[n / 2])
            }
        })
        .collect()
}

/// `(1/m) Σ (x−c)(x−c)ᵀ` with `m = n − 1` when `unbiased`.
fn scatter_about(rows: &[f64], d: usize, center: &[f64], unbiased: bool) -> Matrix {
    let n = rows.len() / d;
    let mut s = Matrix::zeros(d);
    let mut u = vec![0.0; d];
    for r in rows.chunks_exact(d) {
        for ((o, a), c) in u.iter_mut().zip(r).zip(center) {
            *o = a - c;
        }
        s.add_outer(&u, 1.0);
    }
    let m = if unbiased { n - 1 } else { n };
    s.scale(1.0 / m as f64);
    s.symmetrize();
    s
}

fn identity_scale(m: &Matrix) -> f64 {
    let t = m.trace() / m.dim() as f64;
    if t > 0.0 && t.is_finite() {
        t
    } else {
        1.0
    }
}

fn fit_sample(rows: &[f64], d: usize, n: usize, shrinkage: f64) -> Result<BackgroundModel> {
    let mean = column_mean(rows, d, n);
    let mut cov = scatter_about(rows, d, &mean, true);
    let target = identity_scale(&cov);
    cov.add_diagonal(shrinkage * target);
    BackgroundModel::new(mean, cov, ScatterKind::Sample)
}

/// Convex blend with the scaled identity, then rescale to trace `d`.
fn shrink_normalize(m: &mut Matrix, shrinkage: f64) {
    let d = m.dim() as f64;
    let target = identity_scale(m);
    if shrinkage > 0.0 {
        m.scale(1.0 - shrinkage);
        m.add_diagonal(shrinkage * target);
    }
    let tr = m.trace();
    if tr > 0.0 && tr.is_finite() {
        m.scale(d / tr);
    }
    m.symmetrize();
}

/// One application of the Tyler map: `(d/n) Σ u uᵀ / (uᵀ Σ⁻¹ u)`.
fn tyler_step(rows: &[f64], d: usize, center: &[f64], chol: &Cholesky) -> Matrix {
    let mut next = Matrix::zeros(d);
    let mut u = vec![0.0; d];
    let mut work = vec![0.0; d];
    let mut used = 0usize;
    for r in rows.chunks_exact(d) {
        for ((o, a), c) in u.iter_mut().zip(r).zip(center) {
            *o = a - c;
        }
        let q = chol.quad_form(&u, &mut work);
        // samples sitting on the centre carry no direction
        if !(q > 1e-300) || !q.is_finite() {
            continue;
        }
        next.add_outer(&u, 1.0 / q);
        used += 1;
    }
    if used > 0 {
        next.scale(d as f64 / used as f64);
    }
    next.symmetrize();
    next
}

fn fit_tyler(rows: &[f64], d: usize, n: usize, cfg: &FitConfig) -> Result<BackgroundModel> {
    let center = column_median(rows, d, n);
    let mut sigma = scatter_about(rows, d, &center, false);
    if !(sigma.trace() > 0.0) {
        sigma = Matrix::identity(d);
    }
    shrink_normalize(&mut sigma, cfg.shrinkage);
    for _ in 0..cfg.max_iter {
        let chol = Cholesky::new(&sigma)?;
        let mut next = tyler_step(rows, d, &center, &chol);
        if !(next.trace() > 0.0) {
            break;
        }
        shrink_normalize(&mut next, cfg.shrinkage);
        sigma = next;
    }
    BackgroundModel::new(center, sigma, ScatterKind::Tyler)
}

/// Frobenius distance between `sigma` and the trace-`d` normalised Tyler map
/// applied to it; zero at an exact (unshrunk) fixed point.
pub fn tyler_residual(rows: &[f64], d: usize, center: &[f64], sigma: &Matrix) -> Result<f64> {
    let chol = Cholesky::new(sigma)?;
    let mut next = tyler_step(rows, d, center, &chol);
    shrink_normalize(&mut next, 0.0);
    Ok(next.sub(sigma).frobenius())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pv(x: &[f64]) -> PixelVector {
        PixelVector {
            index: 0,
            x: x.to_vec(),
        }
    }

    #[test]
    fn too_few_samples() {
        let v = [pv(&[1.0, 2.0]), pv(&[2.0, 1.0])];
        let cfg = FitConfig {
            shrinkage: 0.0,
            ..FitConfig::sample()
        };
        assert!(matches!(fit_background(&v, &cfg), Err(Error::InsufficientData(_))));
        assert!(matches!(
            fit_background(&v[..1], &FitConfig::tyler()),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn two_points_with_shrinkage_stay_definite() {
        let v = [pv(&[1.0, 2.0]), pv(&[3.0, -1.0])];
        let m = fit_background(&v, &FitConfig::tyler()).unwrap();
        assert!((m.scatter.trace() - 2.0).abs() < 1e-12);
        assert!(Cholesky::new(&m.scatter).is_ok());
        assert!(m.scatter.asymmetry() < 1e-10);
    }

    #[test]
    fn sample_model_matches_hand_computation() {
        let v = [pv(&[0.0, 0.0]), pv(&[2.0, 0.0]), pv(&[0.0, 4.0]), pv(&[2.0, 4.0])];
        let cfg = FitConfig {
            shrinkage: 0.0,
            ..FitConfig::sample()
        };
        let m = fit_background(&v, &cfg).unwrap();
        assert_eq!(m.mean, [1.0, 2.0]);
        // unbiased variances 4/3 and 16/3, no covariance
        assert!((m.scatter.get(0, 0) - 4.0 / 3.0).abs() < 1e-12);
        assert!((m.scatter.get(1, 1) - 16.0 / 3.0).abs() < 1e-12);
        assert!(m.scatter.get(0, 1).abs() < 1e-12);
    }

    #[test]
    fn shrinkage_adds_scaled_identity() {
        let v = [pv(&[0.0, 0.0]), pv(&[2.0, 0.0]), pv(&[0.0, 4.0]), pv(&[2.0, 4.0])];
        let m = fit_background(&v, &FitConfig::sample()).unwrap();
        let tr = 20.0 / 3.0;
        assert!((m.scatter.get(0, 0) - (4.0 / 3.0 + 0.05 * tr / 2.0)).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_shrinkage() {
        let v = [pv(&[0.0]), pv(&[1.0]), pv(&[3.0])];
        let cfg = FitConfig {
            shrinkage: 1.0,
            ..FitConfig::sample()
        };
        assert!(fit_background(&v, &cfg).is_err());
    }

    #[test]
    fn median_centre() {
        let rows = [1.0, 10.0, 2.0, 30.0, 100.0, 20.0];
        assert_eq!(column_median(&rows, 2, 3), [2.0, 20.0]);
        let rows = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(column_median(&rows, 1, 4), [2.5]);
    }
}
