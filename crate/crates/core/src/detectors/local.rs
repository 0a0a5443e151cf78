use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use super::background::{fit_rows, FitConfig, ScatterKind};
use super::rx::standardize_rows;
use super::ScoreMap;
use crate::error::{invalid, Result};
use crate::features::FeatureStack;
use crate::linalg::{Cholesky, Matrix};
use crate::raster::{box_count, box_sum, Grid};

/// Outer and guard window sides of the dual ring.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LocalRxGeometry {
    pub outer: usize,
    pub guard: usize,
}

impl Default for LocalRxGeometry {
    fn default() -> Self {
        Self { outer: 21, guard: 9 }
    }
}

impl LocalRxGeometry {
    pub fn new(outer: usize, guard: usize) -> Result<Self> {
        let g = Self { outer, guard };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.outer % 2 == 0 || self.guard % 2 == 0 {
            return Err(invalid!("ring windows must be odd, got {}/{}", self.outer, self.guard));
        }
        if self.guard >= self.outer {
            return Err(invalid!("guard window {} must be smaller than outer window {}", self.guard, self.outer));
        }
        Ok(())
    }

    /// Ring sample count away from the border.
    pub fn ring_size(&self) -> usize {
        self.outer * self.outer - self.guard * self.guard
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalRxConfig {
    pub geometry: LocalRxGeometry,
    pub fit: FitConfig,
    pub standardize: bool,
}

impl Default for LocalRxConfig {
    fn default() -> Self {
        Self {
            geometry: LocalRxGeometry::default(),
            fit: FitConfig::sample(),
            standardize: true,
        }
    }
}

/// Local RX: each pixel is scored against a model fitted on its ring
/// (outer window minus guard window). Pixels whose ring holds fewer than
/// `d + 1` samples, or whose ring scatter cannot be factorised, are left
/// invalid.
pub fn local_rx_map(stack: &FeatureStack, cfg: &LocalRxConfig) -> Result<ScoreMap> {
    cfg.geometry.validate()?;
    let (w, h) = stack.dims();
    if w <= cfg.geometry.outer || h <= cfg.geometry.outer {
        return Err(invalid!(
            "{w}x{h} scene is not larger than the {} px outer window",
            cfg.geometry.outer
        ));
    }
    let d = stack.depth();
    let mut rows = stack.to_rows();
    if cfg.standardize {
        standardize_rows(&mut rows, d);
    } else {
        // centring keeps the moment sums well conditioned
        let mut mean = vec![0.0; d];
        for r in rows.chunks_exact(d) {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        let n = (rows.len() / d) as f64;
        for r in rows.chunks_exact_mut(d) {
            for (v, m) in r.iter_mut().zip(&mean) {
                *v -= m / n;
            }
        }
    }
    match cfg.fit.kind {
        ScatterKind::Sample => sample_ring(&rows, d, w, h, cfg),
        ScatterKind::Tyler => tyler_ring(&rows, d, w, h, cfg),
    }
}

fn ring_count(w: usize, h: usize, x: usize, y: usize, g: &LocalRxGeometry) -> usize {
    box_count(w, h, x, y, g.outer / 2) - box_count(w, h, x, y, g.guard / 2)
}

fn sample_ring(rows: &[f64], d: usize, w: usize, h: usize, cfg: &LocalRxConfig) -> Result<ScoreMap> {
    let g = cfg.geometry;
    let (ro, rg) = (g.outer / 2, g.guard / 2);
    let pairs: Vec<(usize, usize)> = (0..d).flat_map(|i| (i..d).map(move |j| (i, j))).collect();

    // ring sums of x_k and x_i x_j as outer-box minus guard-box sums
    let ring = |f: &dyn Fn(&[f64]) -> f64| -> Grid<f64> {
        let plane = Grid::from_vec(w, h, rows.chunks_exact(d).map(f).collect()).expect("plane size");
        let outer = box_sum(&plane, ro);
        let guard = box_sum(&plane, rg);
        Grid::from_vec(w, h, outer.iter().zip(guard.iter()).map(|(a, b)| a - b).collect()).expect("plane size")
    };
    let firsts: Vec<Grid<f64>> = (0..d).map(|k| ring(&|r: &[f64]| r[k])).collect();
    let seconds: Vec<Grid<f64>> = pairs.iter().map(|&(i, j)| ring(&|r: &[f64]| r[i] * r[j])).collect();

    let mut scores = Grid::filled(w, h, 0.0);
    let mut valid = Grid::filled(w, h, false);
    let mut mean = vec![0.0; d];
    let mut diff = vec![0.0; d];
    let mut work = vec![0.0; d];
    let mut cov = Matrix::zeros(d);
    for y in 0..h {
        for x in 0..w {
            let n = ring_count(w, h, x, y, &g);
            if n < d + 1 {
                continue;
            }
            let i = y * w + x;
            let nf = n as f64;
            for k in 0..d {
                mean[k] = firsts[k].as_slice()[i] / nf;
            }
            for (p, &(a, b)) in pairs.iter().enumerate() {
                let c = (seconds[p].as_slice()[i] - nf * mean[a] * mean[b]) / (nf - 1.0);
                cov.set(a, b, c);
                cov.set(b, a, c);
            }
            let tr = cov.trace() / d as f64;
            let target = if tr > 0.0 { tr } else { 1.0 };
            cov.add_diagonal(cfg.fit.shrinkage * target);
            let Ok(chol) = Cholesky::new(&cov) else {
                continue;
            };
            let r = &rows[i * d..(i + 1) * d];
            for k in 0..d {
                diff[k] = r[k] - mean[k];
            }
            let s = chol.quad_form(&diff, &mut work);
            if s.is_finite() {
                scores[(x, y)] = s;
                valid[(x, y)] = true;
            }
        }
    }
    Ok(ScoreMap {
        detector: "lrx".into(),
        scores,
        valid,
    })
}

fn tyler_ring(rows: &[f64], d: usize, w: usize, h: usize, cfg: &LocalRxConfig) -> Result<ScoreMap> {
    let g = cfg.geometry;
    let (ro, rg) = ((g.outer / 2) as isize, (g.guard / 2) as isize);
    let mut scores = Grid::filled(w, h, 0.0);
    let mut valid = Grid::filled(w, h, false);
    let mut buf = Vec::with_capacity(g.ring_size() * d);
    let mut scratch = vec![0.0; 2 * d];
    for y in 0..h as isize {
        for x in 0..w as isize {
            buf.clear();
            for yy in (y - ro).max(0)..=(y + ro).min(h as isize - 1) {
                for xx in (x - ro).max(0)..=(x + ro).min(w as isize - 1) {
                    if (xx - x).abs() <= rg && (yy - y).abs() <= rg {
                        continue;
                    }
                    let i = yy as usize * w + xx as usize;
                    buf.extend_from_slice(&rows[i * d..(i + 1) * d]);
                }
            }
            if buf.len() / d < d + 1 {
                continue;
            }
            let Ok(model) = fit_rows(&buf, d, &cfg.fit) else {
                continue;
            };
            let i = y as usize * w + x as usize;
            let s = model.mahalanobis(&rows[i * d..(i + 1) * d], &mut scratch);
            if s.is_finite() {
                scores[(x as usize, y as usize)] = s;
                valid[(x as usize, y as usize)] = true;
            }
        }
    }
    Ok(ScoreMap {
        detector: "lrx".into(),
        scores,
        valid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::Plane;

    #[test]
    fn geometry_invariants() {
        assert!(LocalRxGeometry::new(21, 9).is_ok());
        assert!(LocalRxGeometry::new(9, 9).is_err());
        assert!(LocalRxGeometry::new(9, 21).is_err());
        assert!(LocalRxGeometry::new(20, 9).is_err());
        assert_eq!(LocalRxGeometry::default().ring_size(), 360);
    }

    #[test]
    fn scene_must_exceed_outer_window() {
        let st = FeatureStack::from_planes(vec![(Plane::LogI1, Grid::filled(21, 30, 1.0))]).unwrap();
        assert!(local_rx_map(&st, &LocalRxConfig::default()).is_err());
    }

    #[test]
    fn ring_moments_match_explicit_fit() {
        let w = 30;
        let h = 27;
        let a = Grid::from_fn(w, h, |x, y| ((x * 7 + y * 13) % 17) as f64 * 0.3);
        let b = Grid::from_fn(w, h, |x, y| (((x * x + y) % 11) as f64).sqrt());
        let st = FeatureStack::from_planes(vec![(Plane::LogI1, a), (Plane::LogI2, b)]).unwrap();
        let cfg = LocalRxConfig {
            geometry: LocalRxGeometry::new(7, 3).unwrap(),
            ..LocalRxConfig::default()
        };
        let fast = local_rx_map(&st, &cfg).unwrap();

        let mut rows = st.to_rows();
        standardize_rows(&mut rows, 2);
        for &(x, y) in &[(0usize, 0usize), (10, 10), (29, 5), (14, 26)] {
            let mut buf = Vec::new();
            for yy in y.saturating_sub(3)..=(y + 3).min(h - 1) {
                for xx in x.saturating_sub(3)..=(x + 3).min(w - 1) {
                    if xx.abs_diff(x) <= 1 && yy.abs_diff(y) <= 1 {
                        continue;
                    }
                    let i = yy * w + xx;
                    buf.extend_from_slice(&rows[i * 2..i * 2 + 2]);
                }
            }
            let model = fit_rows(&buf, 2, &cfg.fit).unwrap();
            let i = y * w + x;
            let mut s = [0.0; 4];
            let expect = model.mahalanobis(&rows[i * 2..i * 2 + 2], &mut s);
            assert!(fast.valid[(x, y)]);
            assert!((fast.scores[(x, y)] - expect).abs() < 1e-8 * expect.max(1.0), "{x},{y}");
        }
    }
}
