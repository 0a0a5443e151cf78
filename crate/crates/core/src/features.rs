//! Per-pixel feature stack: log-intensities, log-ratio, windowed texture
//! statistics, incidence angle and sample coherence magnitude.

use alloc::vec::Vec;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{invalid, Result};
use crate::raster::{box_mean, box_sum, Grid};
use crate::slc::{multilook_intensity, Epoch, SlcPair};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Plane {
    LogI1,
    LogI2,
    LogRatio,
    TextureMean,
    TextureVar,
    Incidence,
    Coherence,
}

impl Plane {
    pub const ALL: [Plane; 7] = [
        Plane::LogI1,
        Plane::LogI2,
        Plane::LogRatio,
        Plane::TextureMean,
        Plane::TextureVar,
        Plane::Incidence,
        Plane::Coherence,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Plane::LogI1 => "log_i1",
            Plane::LogI2 => "log_i2",
            Plane::LogRatio => "log_ratio",
            Plane::TextureMean => "texture_mean",
            Plane::TextureVar => "texture_var",
            Plane::Incidence => "incidence",
            Plane::Coherence => "coherence_mag",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Plane::ALL.into_iter().find(|p| p.name() == s)
    }
}

/// Stabiliser added to intensities before taking logs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Epsilon {
    /// Multiple of the scene-mean intensity (both epochs).
    Relative(f64),
    Absolute(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureConfig {
    /// Texture window side (odd, ≥ 3).
    pub window: usize,
    /// Coherence boxcar side (odd, ≥ 3).
    pub coh_window: usize,
    pub epsilon: Epsilon,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            window: 7,
            coh_window: 7,
            epsilon: Epsilon::Relative(1e-6),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStack {
    planes: Vec<(Plane, Grid<f64>)>,
    pub epsilon: f64,
    pub window: usize,
    pub coh_window: usize,
}

impl FeatureStack {
    /// Assembles a stack from named planes of identical size.
    pub fn from_planes(planes: Vec<(Plane, Grid<f64>)>) -> Result<Self> {
        let Some((_, first)) = planes.first() else {
            return Err(invalid!("a feature stack needs at least one plane"));
        };
        let dims = first.dims();
        if planes.iter().any(|(_, g)| g.dims() != dims) {
            return Err(invalid!("feature planes differ in size"));
        }
        Ok(Self {
            planes,
            epsilon: 0.0,
            window: 0,
            coh_window: 0,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        self.planes[0].1.dims()
    }

    pub fn width(&self) -> usize {
        self.dims().0
    }

    pub fn height(&self) -> usize {
        self.dims().1
    }

    pub fn pixels(&self) -> usize {
        self.planes[0].1.len()
    }

    /// Feature dimension `d`.
    pub fn depth(&self) -> usize {
        self.planes.len()
    }

    pub fn plane(&self, which: Plane) -> Option<&Grid<f64>> {
        self.planes.iter().find(|(p, _)| *p == which).map(|(_, g)| g)
    }

    pub fn planes(&self) -> impl Iterator<Item = (Plane, &Grid<f64>)> {
        self.planes.iter().map(|(p, g)| (*p, g))
    }

    pub fn plane_ids(&self) -> Vec<Plane> {
        self.planes.iter().map(|(p, _)| *p).collect()
    }

    /// Sub-stack holding only `which`, in the given order.
    pub fn select(&self, which: &[Plane]) -> Result<Self> {
        let mut planes = Vec::with_capacity(which.len());
        for p in which {
            let g = self
                .plane(*p)
                .ok_or_else(|| invalid!("plane {} not in stack", p.name()))?;
            planes.push((*p, g.clone()));
        }
        let mut out = Self::from_planes(planes)?;
        out.epsilon = self.epsilon;
        out.window = self.window;
        out.coh_window = self.coh_window;
        Ok(out)
    }

    /// Feature vector of the pixel at flat index `i`.
    pub fn vector_at(&self, i: usize, out: &mut [f64]) {
        for (o, (_, g)) in out.iter_mut().zip(&self.planes) {
            *o = g.as_slice()[i];
        }
    }

    /// Pixel-major copy of the whole stack (`pixels × depth`).
    pub fn to_rows(&self) -> Vec<f64> {
        let d = self.depth();
        let mut rows = alloc::vec![0.0; self.pixels() * d];
        for (k, (_, g)) in self.planes.iter().enumerate() {
            for (i, v) in g.iter().enumerate() {
                rows[i * d + k] = *v;
            }
        }
        rows
    }
}

/// A feature vector and the flat pixel index it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelVector {
    pub index: usize,
    pub x: Vec<f64>,
}

fn check_window(n: usize, what: &str) -> Result<usize> {
    if n < 3 || n % 2 == 0 {
        return Err(invalid!("{what} must be odd and >= 3, got {n}"));
    }
    Ok(n / 2)
}

/// Sample coherence magnitude over an `n × n` boxcar, pooling looks.
///
/// Border pixels use the truncated window. A window whose power sums are
/// zero has coherence 0.
pub fn sample_coherence(slc: &SlcPair, coh_window: usize) -> Result<Grid<f64>> {
    let r = check_window(coh_window, "coherence window")?;
    let (w, h) = slc.dims();
    let mut cross = Grid::filled(w, h, Complex64::new(0.0, 0.0));
    let mut p1 = Grid::filled(w, h, 0.0);
    let mut p2 = Grid::filled(w, h, 0.0);
    for (a, b) in slc.s1.iter().zip(&slc.s2) {
        for i in 0..a.len() {
            let (u, v) = (a.as_slice()[i], b.as_slice()[i]);
            cross.as_mut_slice()[i] += u * v.conj();
            p1.as_mut_slice()[i] += u.norm_sqr();
            p2.as_mut_slice()[i] += v.norm_sqr();
        }
    }
    let cross = box_sum(&cross, r);
    let p1 = box_sum(&p1, r);
    let p2 = box_sum(&p2, r);
    Ok(Grid::from_fn(w, h, |x, y| {
        let den = (p1[(x, y)] * p2[(x, y)]).sqrt();
        if den > 0.0 {
            (cross[(x, y)].norm() / den).min(1.0)
        } else {
            0.0
        }
    }))
}

/// Moving mean and variance over an `n × n` truncated window.
pub fn texture_stats(plane: &Grid<f64>, window: usize) -> Result<(Grid<f64>, Grid<f64>)> {
    let r = check_window(window, "texture window")?;
    let mean = box_mean(plane, r);
    let sq = box_mean(&plane.map(|v| v * v), r);
    let mut var = sq;
    for (v, m) in var.as_mut_slice().iter_mut().zip(mean.iter()) {
        *v = (*v - m * m).max(0.0);
    }
    Ok((mean, var))
}

pub fn build_feature_stack(slc: &SlcPair, theta: &Grid<f64>, cfg: &FeatureConfig) -> Result<FeatureStack> {
    check_window(cfg.window, "texture window")?;
    if theta.dims() != slc.dims() {
        return Err(invalid!("incidence raster does not match SLC size"));
    }
    let i1 = multilook_intensity(slc, Epoch::First);
    let i2 = multilook_intensity(slc, Epoch::Second);
    let eps = match cfg.epsilon {
        // an all-zero scene has no scale to borrow from
        Epsilon::Relative(f) if f > 0.0 => (f * 0.5 * (i1.mean() + i2.mean())).max(f64::MIN_POSITIVE),
        Epsilon::Absolute(e) if e > 0.0 => e,
        _ => return Err(invalid!("epsilon must be positive")),
    };
    let log1 = i1.map(|v| (v + eps).ln());
    let log2 = i2.map(|v| (v + eps).ln());
    let ratio = Grid::from_fn(i1.width(), i1.height(), |x, y| {
        ((i2[(x, y)] + eps) / (i1[(x, y)] + eps)).ln()
    });
    let (tmean, tvar) = texture_stats(&log2, cfg.window)?;
    let coh = sample_coherence(slc, cfg.coh_window)?;
    let mut stack = FeatureStack::from_planes(alloc::vec![
        (Plane::LogI1, log1),
        (Plane::LogI2, log2),
        (Plane::LogRatio, ratio),
        (Plane::TextureMean, tmean),
        (Plane::TextureVar, tvar),
        (Plane::Incidence, theta.clone()),
        (Plane::Coherence, coh),
    ])?;
    stack.epsilon = eps;
    stack.window = cfg.window;
    stack.coh_window = cfg.coh_window;
    Ok(stack)
}

/// Row-major feature vectors of the selected pixels (all when `mask` is
/// `None`).
pub fn flatten(stack: &FeatureStack, mask: Option<&Grid<bool>>) -> Result<Vec<PixelVector>> {
    if let Some(m) = mask {
        if m.dims() != stack.dims() {
            return Err(invalid!("mask does not match stack size"));
        }
    }
    let d = stack.depth();
    let mut out = Vec::new();
    for i in 0..stack.pixels() {
        if mask.is_some_and(|m| !m.as_slice()[i]) {
            continue;
        }
        let mut x = alloc::vec![0.0; d];
        stack.vector_at(i, &mut x);
        out.push(PixelVector { index: i, x });
    }
    Ok(out)
}

/// Scatters vectors back into planes; pixels without a vector get `fill`.
pub fn reassemble(
    vectors: &[PixelVector],
    planes: &[Plane],
    width: usize,
    height: usize,
    fill: f64,
) -> Result<FeatureStack> {
    let mut grids: Vec<(Plane, Grid<f64>)> = planes
        .iter()
        .map(|p| (*p, Grid::filled(width, height, fill)))
        .collect();
    for v in vectors {
        if v.x.len() != planes.len() || v.index >= width * height {
            return Err(invalid!("vector {} does not fit the target stack", v.index));
        }
        for (k, (_, g)) in grids.iter_mut().enumerate() {
            g.as_mut_slice()[v.index] = v.x[k];
        }
    }
    FeatureStack::from_planes(grids)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::em::BackscatterMap;
    use crate::slc::{form_slc_pair, SlcParams};

    fn pair_from(s1: Grid<Complex64>, s2: Grid<Complex64>) -> SlcPair {
        let (w, h) = s1.dims();
        SlcPair {
            s1: alloc::vec![s1],
            s2: alloc::vec![s2],
            true_gamma: Grid::filled(w, h, 1.0),
            params: SlcParams::clean(1),
            shift: (0.0, 0.0),
            seed: 0,
        }
    }

    fn noisy(w: usize, h: usize) -> Grid<Complex64> {
        Grid::from_fn(w, h, |x, y| {
            let t = (x * 31 + y * 17) as f64;
            Complex64::new((t * 0.37).sin() + 1.1, (t * 0.11).cos())
        })
    }

    #[test]
    fn identical_epochs_are_fully_coherent() {
        let s = noisy(16, 12);
        let coh = sample_coherence(&pair_from(s.clone(), s), 7).unwrap();
        assert!(coh.iter().all(|&c| (c - 1.0).abs() < 1e-12));
    }

    #[test]
    fn complex_scaling_cancels() {
        let s = noisy(16, 12);
        let c = Complex64::new(-0.3, 2.0);
        let scaled = s.map(|v| v * c);
        let coh = sample_coherence(&pair_from(s, scaled), 5).unwrap();
        assert!(coh.iter().all(|&v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn zero_windows_have_zero_coherence() {
        let z = Grid::filled(9, 9, Complex64::new(0.0, 0.0));
        let coh = sample_coherence(&pair_from(z.clone(), z), 3).unwrap();
        assert!(coh.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn even_windows_are_rejected() {
        let z = Grid::filled(9, 9, Complex64::new(1.0, 0.0));
        assert!(sample_coherence(&pair_from(z.clone(), z), 4).is_err());
    }

    #[test]
    fn identical_epochs_have_zero_log_ratio() {
        let m = BackscatterMap {
            sigma0: Grid::filled(20, 20, 0.2),
        };
        let g = Grid::filled(20, 20, 1.0);
        let slc = form_slc_pair(&m, &m, &g, &SlcParams::clean(2), 3).unwrap();
        let theta = Grid::filled(20, 20, 0.6);
        let st = build_feature_stack(&slc, &theta, &FeatureConfig::default()).unwrap();
        assert!(st.plane(Plane::LogRatio).unwrap().iter().all(|&v| v == 0.0));
        assert_eq!(st.depth(), 7);
        assert_eq!(st.plane(Plane::Incidence).unwrap(), &theta);
    }

    #[test]
    fn scaled_second_epoch_gives_unit_log_ratio() {
        let s = noisy(12, 12);
        let e = core::f64::consts::E;
        let s2 = s.map(|v| v * e.sqrt());
        let slc = pair_from(s, s2);
        let theta = Grid::filled(12, 12, 0.6);
        let cfg = FeatureConfig {
            epsilon: Epsilon::Absolute(1e-12),
            ..FeatureConfig::default()
        };
        let st = build_feature_stack(&slc, &theta, &cfg).unwrap();
        assert!(st.plane(Plane::LogRatio).unwrap().iter().all(|&v| (v - 1.0).abs() < 1e-9));
    }

    #[test]
    fn constant_image_has_zero_texture_variance() {
        let g = Grid::filled(15, 15, -3.7);
        let (m, v) = texture_stats(&g, 7).unwrap();
        assert!(v.iter().all(|&x| x.abs() < 1e-12));
        assert!(m.iter().all(|&x| (x + 3.7).abs() < 1e-12));
    }

    #[test]
    fn texture_variance_is_translation_covariant() {
        let g = Grid::from_fn(30, 30, |x, y| ((x * x + 3 * y) % 11) as f64);
        let shifted = Grid::from_fn(30, 30, |x, y| g[((x + 2) % 30, (y + 3) % 30)]);
        let (_, v) = texture_stats(&g, 5).unwrap();
        let (_, vs) = texture_stats(&shifted, 5).unwrap();
        for y in 3..24 {
            for x in 3..25 {
                assert!((vs[(x, y)] - v[(x + 2, y + 3)]).abs() < 1e-9);
            }
        }
    }

    fn small_stack() -> FeatureStack {
        FeatureStack::from_planes(alloc::vec![
            (Plane::LogI1, Grid::from_fn(4, 4, |x, y| (x + 4 * y) as f64)),
            (Plane::Coherence, Grid::from_fn(4, 4, |x, y| (x * y) as f64 * 0.1)),
        ])
        .unwrap()
    }

    #[test]
    fn flatten_counts_and_order() {
        let st = small_stack();
        let all = flatten(&st, None).unwrap();
        assert_eq!(all.len(), 16);
        assert!(all.iter().enumerate().all(|(i, v)| v.index == i && v.x[0] == i as f64));
        let mut mask = Grid::filled(4, 4, false);
        mask[(1, 0)] = true;
        mask[(3, 2)] = true;
        mask[(0, 3)] = true;
        let some = flatten(&st, Some(&mask)).unwrap();
        assert_eq!(some.iter().map(|v| v.index).collect::<Vec<_>>(), [1, 11, 12]);
    }

    #[test]
    fn flatten_reassemble_round_trip() {
        let st = small_stack();
        let back = reassemble(&flatten(&st, None).unwrap(), &st.plane_ids(), 4, 4, f64::NAN).unwrap();
        assert_eq!(back.plane(Plane::LogI1), st.plane(Plane::LogI1));
        assert_eq!(back.plane(Plane::Coherence), st.plane(Plane::Coherence));
    }
}
