//! Labelled material scenes: per-pixel permittivity and roughness rasters
//! for two epochs, a smooth incidence field, vegetation blobs, and a compact
//! injected change region with its ground-truth mask.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{invalid, Result};
use crate::field::{cosine_modes, smooth_noise};
use crate::raster::Grid;
use crate::rng::Stage;

/// Range of the smooth background decorrelation factor.
pub const BG_DECORR_RANGE: (f64, f64) = (0.75, 0.90);

/// Extra coherence multiplier on vegetated pixels.
pub const VEG_COHERENCE_FACTOR: f64 = 0.75;

/// Bulk electromagnetic and roughness parameters of one terrain material.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialClass {
    pub name: String,
    pub eps: Complex64,
    /// Surface rms height in metres.
    pub rms_height: f64,
    /// Surface correlation length in metres.
    pub corr_length: f64,
}

impl MaterialClass {
    pub fn new(name: &str, eps: Complex64, rms_height: f64, corr_length: f64) -> Result<Self> {
        let m = Self {
            name: name.to_string(),
            eps,
            rms_height,
            corr_length,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        check_params(self.eps, self.rms_height, self.corr_length)
            .map_err(|why| invalid!("material `{}`: {why}", self.name))
    }

    // Illustrative C-band values; the roughness figures are chosen so the
    // surrogate stays in its smooth-surface regime at 35° incidence.

    pub fn dry_soil() -> Self {
        Self::preset("dry soil", 6.0, 1.0, 0.006, 0.10)
    }

    pub fn wet_soil() -> Self {
        Self::preset("wet soil", 20.0, 4.0, 0.006, 0.10)
    }

    pub fn asphalt() -> Self {
        Self::preset("asphalt", 5.0, 0.5, 0.003, 0.06)
    }

    pub fn gravel() -> Self {
        Self::preset("gravel", 4.0, 0.3, 0.008, 0.04)
    }

    pub fn vegetation_over_soil() -> Self {
        Self::preset("vegetation over soil", 8.0, 2.0, 0.007, 0.08)
    }

    /// Looks a preset up by its short key (`dry_soil`, `wet_soil`, `asphalt`,
    /// `gravel`, `vegetation`).
    pub fn by_key(key: &str) -> Option<Self> {
        Some(match key {
            "dry_soil" => Self::dry_soil(),
            "wet_soil" => Self::wet_soil(),
            "asphalt" => Self::asphalt(),
            "gravel" => Self::gravel(),
            "vegetation" => Self::vegetation_over_soil(),
            _ => return None,
        })
    }

    fn preset(name: &str, re: f64, im: f64, rms_height: f64, corr_length: f64) -> Self {
        Self {
            name: name.to_string(),
            eps: Complex64::new(re, im),
            rms_height,
            corr_length,
        }
    }
}

fn check_params(eps: Complex64, sigma: f64, lc: f64) -> core::result::Result<(), &'static str> {
    if !(eps.re >= 1.0) {
        return Err("real permittivity must be >= 1");
    }
    if !(eps.im >= 0.0) {
        return Err("imaginary permittivity must be >= 0");
    }
    if !(sigma > 0.0) {
        return Err("rms height must be > 0");
    }
    if !(lc > 0.0) {
        return Err("correlation length must be > 0");
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChangeShape {
    Square,
    Rectangle,
    Ellipse,
}

impl ChangeShape {
    pub fn name(self) -> &'static str {
        match self {
            ChangeShape::Square => "square",
            ChangeShape::Rectangle => "rectangle",
            ChangeShape::Ellipse => "ellipse",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "square" => Some(ChangeShape::Square),
            "rectangle" => Some(ChangeShape::Rectangle),
            "ellipse" => Some(ChangeShape::Ellipse),
            _ => None,
        }
    }
}

/// Compact change region and the parameter perturbation applied inside it.
#[derive(Debug, Clone, PartialEq)]
pub struct ChangeSpec {
    pub shape: ChangeShape,
    /// Centre `(x, y)` in pixel coordinates (pixel centres are integers).
    pub center: (f64, f64),
    /// Half-widths `(x, y)` in pixels.
    pub extent: (f64, f64),
    pub eps_delta: Complex64,
    pub sigma_delta: f64,
    pub lc_delta: f64,
}

impl ChangeSpec {
    /// Continuous area of the shape in square pixels.
    pub fn analytic_area(&self) -> f64 {
        let (ax, ay) = self.extent;
        match self.shape {
            ChangeShape::Square | ChangeShape::Rectangle => 4.0 * ax * ay,
            ChangeShape::Ellipse => PI * ax * ay,
        }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (cx, cy) = self.center;
        let (ax, ay) = self.extent;
        let dx = x - cx;
        let dy = y - cy;
        match self.shape {
            ChangeShape::Square | ChangeShape::Rectangle => dx.abs() <= ax && dy.abs() <= ay,
            ChangeShape::Ellipse => (dx / ax).powi(2) + (dy / ay).powi(2) <= 1.0,
        }
    }

    /// Checks geometry against a `width × height` raster and the allowed
    /// fraction of scene area `area_bounds = (lo, hi)`.
    pub fn validate(&self, width: usize, height: usize, area_bounds: (f64, f64)) -> Result<()> {
        let (cx, cy) = self.center;
        let (ax, ay) = self.extent;
        if !(ax > 0.0 && ay > 0.0) {
            return Err(invalid!("change extent must be positive, got ({ax}, {ay})"));
        }
        if self.shape == ChangeShape::Square && ax != ay {
            return Err(invalid!("square change region needs equal half-widths"));
        }
        if cx - ax < 0.0 || cy - ay < 0.0 || cx + ax > (width - 1) as f64 || cy + ay > (height - 1) as f64 {
            return Err(invalid!("change region does not lie inside the {width}x{height} raster"));
        }
        let frac = self.analytic_area() / (width * height) as f64;
        if frac < area_bounds.0 || frac > area_bounds.1 {
            return Err(invalid!(
                "change region covers {:.4} of the scene, outside [{}, {}]",
                frac,
                area_bounds.0,
                area_bounds.1
            ));
        }
        Ok(())
    }

    pub fn mask(&self, width: usize, height: usize) -> Grid<bool> {
        Grid::from_fn(width, height, |x, y| self.contains(x as f64, y as f64))
    }
}

/// Everything needed to synthesise one bi-temporal scene pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub base: MaterialClass,
    /// Material assigned to vegetation blobs.
    pub vegetation: MaterialClass,
    pub change: ChangeSpec,
    pub veg_fraction: f64,
    pub gamma_bg: f64,
    pub gamma_chg: f64,
    /// Level of the smooth background decorrelation factor.
    pub bg_decorr: f64,
    /// Spatial swing of the decorrelation factor around `bg_decorr`.
    pub bg_decorr_spread: f64,
    pub theta_center: f64,
    pub theta_ripple: f64,
    /// Allowed change-region area as a fraction of the scene.
    pub area_bounds: (f64, f64),
}

impl SceneSpec {
    /// A scene with the given base material and change, default incidence
    /// (35° ± 3°) and the default coherence levels.
    pub fn new(width: usize, height: usize, base: MaterialClass, change: ChangeSpec) -> Self {
        Self {
            width,
            height,
            base,
            vegetation: MaterialClass::vegetation_over_soil(),
            change,
            veg_fraction: 0.10,
            gamma_bg: 0.92,
            gamma_chg: 0.55,
            bg_decorr: 0.82,
            bg_decorr_spread: 0.10,
            theta_center: 35f64.to_radians(),
            theta_ripple: 3f64.to_radians(),
            area_bounds: (0.005, 0.05),
        }
    }
}

/// Per-pixel physical parameters of one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialScene {
    pub width: usize,
    pub height: usize,
    pub eps: Grid<Complex64>,
    pub sigma_s: Grid<f64>,
    pub l_c: Grid<f64>,
    pub theta: Grid<f64>,
    pub veg_mask: Grid<bool>,
    pub change_mask: Grid<bool>,
    pub gamma_bg: f64,
    pub gamma_chg: f64,
    pub bg_decorr: f64,
    /// Smooth per-pixel background decorrelation factor.
    pub bg_decorr_field: Grid<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenePair {
    pub epoch1: MaterialScene,
    pub epoch2: MaterialScene,
}

impl ScenePair {
    pub fn change_mask(&self) -> &Grid<bool> {
        &self.epoch1.change_mask
    }

    pub fn theta(&self) -> &Grid<f64> {
        &self.epoch1.theta
    }
}

/// Smooth incidence-angle raster within `theta_center ± ripple_amplitude`.
pub fn make_incidence_field(
    width: usize,
    height: usize,
    theta_center: f64,
    ripple_amplitude: f64,
    seed: u64,
) -> Result<Grid<f64>> {
    if width == 0 || height == 0 {
        return Err(invalid!("raster dimensions must be positive, got {width}x{height}"));
    }
    if !(theta_center > 0.0 && theta_center < FRAC_PI_2) {
        return Err(invalid!("incidence centre {theta_center} rad outside (0, pi/2)"));
    }
    if !(ripple_amplitude >= 0.0 && ripple_amplitude < theta_center && theta_center + ripple_amplitude < FRAC_PI_2) {
        return Err(invalid!("incidence ripple {ripple_amplitude} rad too large"));
    }
    if ripple_amplitude == 0.0 {
        return Ok(Grid::filled(width, height, theta_center));
    }
    let modes = cosine_modes(width, height, seed, Stage::Incidence);
    Ok(modes.map(|m| theta_center + ripple_amplitude * m))
}

/// Vegetation blobs covering `fraction` of the raster (to the nearest pixel).
pub fn vegetation_mask(width: usize, height: usize, fraction: f64, seed: u64) -> Grid<bool> {
    let n = width * height;
    let k = ((fraction * n as f64).round() as usize).min(n);
    if k == 0 {
        return Grid::filled(width, height, false);
    }
    if k == n {
        return Grid::filled(width, height, true);
    }
    let radius = (width.min(height) / 32).max(2);
    let noise = smooth_noise(width, height, radius, seed, Stage::Vegetation);
    let mut sorted: Vec<f64> = noise.as_slice().to_vec();
    sorted.sort_by(f64::total_cmp);
    let cut = sorted[n - k];
    noise.map(|&v| v >= cut)
}

/// Smooth background decorrelation factor around `level`.
///
/// Values are clamped to [`BG_DECORR_RANGE`] widened, if necessary, to
/// include `level` itself.
pub fn decorrelation_field(width: usize, height: usize, level: f64, spread: f64, seed: u64) -> Grid<f64> {
    let lo = BG_DECORR_RANGE.0.min(level);
    let hi = BG_DECORR_RANGE.1.max(level);
    if spread == 0.0 {
        return Grid::filled(width, height, level);
    }
    cosine_modes(width, height, seed, Stage::Decorrelation).map(|m| (level + spread * m).clamp(lo, hi))
}

/// Builds the epoch-1 and epoch-2 scenes.
pub fn build_scene(spec: &SceneSpec, seed: u64) -> Result<ScenePair> {
    let (w, h) = (spec.width, spec.height);
    spec.base.validate()?;
    spec.vegetation.validate()?;
    if !(0.0..=1.0).contains(&spec.veg_fraction) {
        return Err(invalid!("vegetation fraction {} outside [0, 1]", spec.veg_fraction));
    }
    for (name, g) in [
        ("gamma_bg", spec.gamma_bg),
        ("gamma_chg", spec.gamma_chg),
        ("bg_decorr", spec.bg_decorr),
    ] {
        if !(0.0..=1.0).contains(&g) {
            return Err(invalid!("{name} = {g} outside [0, 1]"));
        }
    }
    if spec.gamma_chg > spec.gamma_bg {
        return Err(invalid!(
            "changed coherence {} exceeds background coherence {}",
            spec.gamma_chg,
            spec.gamma_bg
        ));
    }
    if !(spec.bg_decorr_spread >= 0.0) {
        return Err(invalid!("decorrelation spread must be >= 0"));
    }
    spec.change.validate(w, h, spec.area_bounds)?;

    let theta = make_incidence_field(w, h, spec.theta_center, spec.theta_ripple, seed)?;
    let veg_mask = vegetation_mask(w, h, spec.veg_fraction, seed);
    let change_mask = spec.change.mask(w, h);
    let bg_decorr_field = decorrelation_field(w, h, spec.bg_decorr, spec.bg_decorr_spread, seed);

    let material = |veg: bool| if veg { &spec.vegetation } else { &spec.base };
    let eps = veg_mask.map(|&v| material(v).eps);
    let sigma_s = veg_mask.map(|&v| material(v).rms_height);
    let l_c = veg_mask.map(|&v| material(v).corr_length);

    let epoch1 = MaterialScene {
        width: w,
        height: h,
        eps,
        sigma_s,
        l_c,
        theta,
        veg_mask,
        change_mask,
        gamma_bg: spec.gamma_bg,
        gamma_chg: spec.gamma_chg,
        bg_decorr: spec.bg_decorr,
        bg_decorr_field,
    };

    let mut epoch2 = epoch1.clone();
    let ch = &spec.change;
    for i in 0..epoch2.change_mask.len() {
        if !epoch2.change_mask.as_slice()[i] {
            continue;
        }
        let eps = epoch2.eps.as_slice()[i] + ch.eps_delta;
        let sigma = epoch2.sigma_s.as_slice()[i] + ch.sigma_delta;
        let lc = epoch2.l_c.as_slice()[i] + ch.lc_delta;
        check_params(eps, sigma, lc).map_err(|why| invalid!("change deltas invalid: {why}"))?;
        epoch2.eps.as_mut_slice()[i] = eps;
        epoch2.sigma_s.as_mut_slice()[i] = sigma;
        epoch2.l_c.as_mut_slice()[i] = lc;
    }

    Ok(ScenePair { epoch1, epoch2 })
}

/// Per-pixel magnitude of the cross-epoch coherence used to correlate
/// speckle.
///
/// Background pixels get `gamma_bg × decorrelation factor`, times
/// [`VEG_COHERENCE_FACTOR`] on vegetation. Changed pixels get `gamma_chg`,
/// capped at the background value of that pixel: a change never raises
/// coherence, so `gamma_chg = gamma_bg` with zero deltas is a null change.
pub fn true_coherence_field(pair: &ScenePair) -> Grid<f64> {
    let s = &pair.epoch1;
    Grid::from_fn(s.width, s.height, |x, y| {
        let veg = if s.veg_mask[(x, y)] { VEG_COHERENCE_FACTOR } else { 1.0 };
        let bg = (s.gamma_bg * s.bg_decorr_field[(x, y)] * veg).clamp(0.0, 1.0);
        if s.change_mask[(x, y)] {
            s.gamma_chg.min(bg)
        } else {
            bg
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(cx: f64, cy: f64, a: f64) -> ChangeSpec {
        ChangeSpec {
            shape: ChangeShape::Square,
            center: (cx, cy),
            extent: (a, a),
            eps_delta: Complex64::new(0.0, 0.0),
            sigma_delta: 0.0,
            lc_delta: 0.0,
        }
    }

    #[test]
    fn zero_ripple_gives_constant_incidence() {
        let t = make_incidence_field(16, 8, 0.6, 0.0, 1).unwrap();
        assert!(t.iter().all(|&v| v == 0.6));
    }

    #[test]
    fn incidence_stays_within_ripple_band() {
        let c = 35f64.to_radians();
        let r = 3f64.to_radians();
        for seed in 0..5 {
            let t = make_incidence_field(128, 96, c, r, seed).unwrap();
            let (lo, hi) = t.min_max();
            assert!(lo >= 32f64.to_radians() - 1e-12, "{lo}");
            assert!(hi <= 38f64.to_radians() + 1e-12, "{hi}");
            assert_eq!(t, make_incidence_field(128, 96, c, r, seed).unwrap());
        }
    }

    #[test]
    fn incidence_rejects_bad_arguments() {
        assert!(make_incidence_field(0, 4, 0.6, 0.1, 0).is_err());
        assert!(make_incidence_field(4, 4, 1.7, 0.1, 0).is_err());
        assert!(make_incidence_field(4, 4, 0.3, 0.4, 0).is_err());
    }

    #[test]
    fn null_change_keeps_epochs_identical() {
        let spec = SceneSpec::new(64, 64, MaterialClass::dry_soil(), square(30.0, 30.0, 5.0));
        let pair = build_scene(&spec, 9).unwrap();
        assert_eq!(pair.epoch1.eps, pair.epoch2.eps);
        assert_eq!(pair.epoch1.sigma_s, pair.epoch2.sigma_s);
        assert_eq!(pair.epoch1.l_c, pair.epoch2.l_c);
        assert_eq!(pair.epoch2.change_mask.count_true(), 121);
    }

    #[test]
    fn dry_to_wet_soil_delta() {
        let mut ch = square(40.0, 40.0, 6.0);
        ch.eps_delta = Complex64::new(14.0, 3.0);
        let mut spec = SceneSpec::new(128, 128, MaterialClass::dry_soil(), ch);
        spec.veg_fraction = 0.0;
        let pair = build_scene(&spec, 2).unwrap();
        assert_eq!(pair.epoch2.eps[(40, 40)], Complex64::new(20.0, 4.0));
        assert_eq!(pair.epoch2.eps[(10, 10)], Complex64::new(6.0, 1.0));
        for i in 0..pair.epoch1.eps.len() {
            if !pair.epoch1.change_mask.as_slice()[i] {
                assert_eq!(pair.epoch1.eps.as_slice()[i], pair.epoch2.eps.as_slice()[i]);
            }
        }
    }

    #[test]
    fn vegetation_fraction_within_one_point() {
        let mut spec = SceneSpec::new(256, 256, MaterialClass::dry_soil(), square(100.0, 100.0, 10.0));
        spec.veg_fraction = 0.10;
        let pair = build_scene(&spec, 4).unwrap();
        let n = pair.epoch1.veg_mask.count_true();
        assert!((5898..=7209).contains(&n), "{n}");
    }

    #[test]
    fn deltas_breaking_invariants_are_rejected() {
        let mut ch = square(30.0, 30.0, 5.0);
        ch.eps_delta = Complex64::new(-10.0, 0.0);
        let spec = SceneSpec::new(64, 64, MaterialClass::dry_soil(), ch);
        assert!(matches!(build_scene(&spec, 0), Err(crate::Error::InvalidArgument(_))));
        let mut ch = square(30.0, 30.0, 5.0);
        ch.sigma_delta = -1.0;
        let spec = SceneSpec::new(64, 64, MaterialClass::dry_soil(), ch);
        assert!(build_scene(&spec, 0).is_err());
    }

    #[test]
    fn change_region_bounds_are_checked() {
        // outside raster
        assert!(square(2.0, 30.0, 5.0).validate(64, 64, (0.0, 1.0)).is_err());
        // too small / too large a fraction
        assert!(square(30.0, 30.0, 1.0).validate(64, 64, (0.005, 0.05)).is_err());
        assert!(square(30.0, 30.0, 20.0).validate(64, 64, (0.005, 0.05)).is_err());
        let mut sq = square(30.0, 30.0, 5.0);
        sq.extent = (5.0, 6.0);
        assert!(sq.validate(64, 64, (0.0, 1.0)).is_err());
    }

    #[test]
    fn mask_area_within_one_boundary_ring() {
        for (shape, ext) in [
            (ChangeShape::Square, (9.0, 9.0)),
            (ChangeShape::Rectangle, (12.0, 6.5)),
            (ChangeShape::Ellipse, (14.0, 8.0)),
        ] {
            let spec = ChangeSpec {
                shape,
                center: (60.3, 50.7),
                extent: ext,
                eps_delta: Complex64::new(0.0, 0.0),
                sigma_delta: 0.0,
                lc_delta: 0.0,
            };
            let count = spec.mask(128, 128).count_true() as f64;
            let area = spec.analytic_area();
            let ring = match shape {
                ChangeShape::Ellipse => PI * (ext.0 + ext.1) + 4.0,
                _ => 2.0 * (2.0 * ext.0 + 2.0 * ext.1) + 4.0,
            };
            assert!((count - area).abs() <= ring, "{shape:?}: {count} vs {area}");
        }
    }

    #[test]
    fn true_coherence_values() {
        let mut spec = SceneSpec::new(64, 64, MaterialClass::dry_soil(), square(30.0, 30.0, 5.0));
        spec.gamma_bg = 0.92;
        spec.gamma_chg = 0.55;
        spec.bg_decorr = 0.80;
        spec.bg_decorr_spread = 0.0;
        spec.veg_fraction = 0.15;
        let pair = build_scene(&spec, 5).unwrap();
        let g = true_coherence_field(&pair);
        assert_eq!(g[(30, 30)], 0.55);
        let s = &pair.epoch1;
        for y in 0..64 {
            for x in 0..64 {
                let v = g[(x, y)];
                assert!((0.0..=1.0).contains(&v));
                if !s.change_mask[(x, y)] {
                    let expect = if s.veg_mask[(x, y)] { 0.736 * VEG_COHERENCE_FACTOR } else { 0.736 };
                    assert!((v - expect).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn decorrelation_field_stays_in_range() {
        let f = decorrelation_field(64, 64, 0.85, 0.05, 3);
        let (lo, hi) = f.min_max();
        assert!(lo >= 0.75 && hi <= 0.90);
        assert!(hi - lo > 0.02);
    }

    #[test]
    fn null_trial_coherence_equals_background() {
        let mut spec = SceneSpec::new(64, 64, MaterialClass::dry_soil(), square(30.0, 30.0, 5.0));
        spec.gamma_chg = spec.gamma_bg;
        spec.veg_fraction = 0.0;
        spec.bg_decorr_spread = 0.0;
        let pair = build_scene(&spec, 5).unwrap();
        let g = true_coherence_field(&pair);
        assert_eq!(g[(30, 30)], g[(5, 5)]);
    }
}
