//! Mean backscatter surrogate: a VV Fresnel reflectivity times an
//! exponential roughness attenuation and a correlation-length factor.

use core::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{invalid, Result};
use crate::raster::Grid;
use crate::scene::MaterialScene;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarization {
    Vv,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadarConfig {
    pub frequency: f64,
    pub polarization: Polarization,
    /// Reference correlation length (m) of the `l / (l + lc_ref)` factor.
    pub lc_ref: f64,
}

impl Default for RadarConfig {
    /// C-band (5.4 GHz), VV, `lc_ref = 0.10 m`.
    fn default() -> Self {
        Self {
            frequency: 5.4e9,
            polarization: Polarization::Vv,
            lc_ref: 0.10,
        }
    }
}

impl RadarConfig {
    pub fn new(frequency: f64, lc_ref: f64) -> Result<Self> {
        if !(frequency > 0.0) {
            return Err(invalid!("radar frequency must be positive"));
        }
        if !(lc_ref > 0.0) {
            return Err(invalid!("reference correlation length must be positive"));
        }
        Ok(Self {
            frequency,
            polarization: Polarization::Vv,
            lc_ref,
        })
    }

    /// `k = 2πf/c` in rad/m.
    pub fn wavenumber(&self) -> f64 {
        2.0 * PI * self.frequency / SPEED_OF_LIGHT
    }
}

/// `|(ε cosθ − √(ε − sin²θ)) / (ε cosθ + √(ε − sin²θ))|²`, principal branch.
pub fn fresnel_term(eps: Complex64, theta: f64) -> Result<f64> {
    if !(eps.re >= 1.0) {
        return Err(invalid!("real permittivity {} < 1", eps.re));
    }
    if !(0.0..FRAC_PI_2).contains(&theta) {
        return Err(invalid!("incidence {theta} rad outside [0, pi/2)"));
    }
    let (sin_t, cos_t) = theta.sin_cos();
    let root = (eps - sin_t * sin_t).sqrt();
    let a = eps * cos_t;
    let r = (a - root) / (a + root);
    Ok(r.norm_sqr())
}

/// Correlation-length factor `l / (l + lc_ref)`.
#[inline]
pub fn correlation_factor(l_c: f64, lc_ref: f64) -> f64 {
    l_c / (l_c + lc_ref)
}

/// `exp[−(2kσ cosθ)²] · l / (l + lc_ref)`.
pub fn roughness_term(theta: f64, sigma_s: f64, l_c: f64, cfg: &RadarConfig) -> f64 {
    let x = 2.0 * cfg.wavenumber() * sigma_s * theta.cos();
    (-(x * x)).exp() * correlation_factor(l_c, cfg.lc_ref)
}

/// Linear-power mean backscatter raster.
#[derive(Debug, Clone, PartialEq)]
pub struct BackscatterMap {
    pub sigma0: Grid<f64>,
}

impl BackscatterMap {
    pub fn dims(&self) -> (usize, usize) {
        self.sigma0.dims()
    }
}

/// Roughness attenuation callback: `(theta, sigma_s, l_c, cfg) -> G`.
pub type RoughnessFn = dyn Fn(f64, f64, f64, &RadarConfig) -> f64;

pub fn backscatter_map(scene: &MaterialScene, cfg: &RadarConfig) -> Result<BackscatterMap> {
    backscatter_map_with(scene, cfg, &roughness_term)
}

/// [`backscatter_map`] with a substitute roughness term.
pub fn backscatter_map_with(
    scene: &MaterialScene,
    cfg: &RadarConfig,
    roughness: &RoughnessFn,
) -> Result<BackscatterMap> {
    let n = scene.eps.len();
    let mut out = alloc::vec::Vec::with_capacity(n);
    let eps = scene.eps.as_slice();
    let theta = scene.theta.as_slice();
    let sigma = scene.sigma_s.as_slice();
    let lc = scene.l_c.as_slice();
    for i in 0..n {
        if !(sigma[i] >= 0.0 && lc[i] > 0.0) {
            return Err(invalid!("roughness parameters out of range at pixel {i}"));
        }
        let f = fresnel_term(eps[i], theta[i])?;
        out.push(f * roughness(theta[i], sigma[i], lc[i], cfg));
    }
    Ok(BackscatterMap {
        sigma0: Grid::from_vec(scene.width, scene.height, out)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{build_scene, ChangeShape, ChangeSpec, MaterialClass, SceneSpec};

    #[test]
    fn vacuum_reflects_nothing() {
        for t in [0.0, 0.3, 1.2] {
            assert!(fresnel_term(Complex64::new(1.0, 0.0), t).unwrap().abs() < 1e-15);
        }
    }

    #[test]
    fn normal_incidence_value() {
        let f = fresnel_term(Complex64::new(4.0, 0.0), 0.0).unwrap();
        assert!((f - 1.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn conductor_limit() {
        let f = fresnel_term(Complex64::new(1e6, 0.0), 0.3).unwrap();
        assert!((f - 1.0).abs() < 1e-2);
    }

    #[test]
    fn grazing_is_rejected() {
        assert!(fresnel_term(Complex64::new(4.0, 0.0), FRAC_PI_2).is_err());
        assert!(fresnel_term(Complex64::new(0.5, 0.0), 0.2).is_err());
    }

    #[test]
    fn smooth_surface_gives_correlation_factor() {
        let cfg = RadarConfig::default();
        assert_eq!(roughness_term(0.6, 0.0, 0.05, &cfg), correlation_factor(0.05, 0.10));
        assert!((correlation_factor(0.05, 0.10) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn unit_roughness_argument() {
        let cfg = RadarConfig::default();
        let theta = 0.5;
        let sigma = 1.0 / (2.0 * cfg.wavenumber() * theta.cos());
        let g = roughness_term(theta, sigma, cfg.lc_ref, &cfg);
        assert!((g - (-1.0f64).exp() * 0.5).abs() < 1e-15);
        assert!((g - 0.18393972058572117).abs() < 1e-12);
    }

    #[test]
    fn wavenumber_uses_exact_speed_of_light() {
        let cfg = RadarConfig::default();
        assert_eq!(cfg.wavenumber(), 2.0 * PI * 5.4e9 / 299_792_458.0);
    }

    #[test]
    fn wetter_soil_is_brighter() {
        let ch = ChangeSpec {
            shape: ChangeShape::Square,
            center: (32.0, 32.0),
            extent: (5.0, 5.0),
            eps_delta: Complex64::new(14.0, 3.0),
            sigma_delta: 0.0,
            lc_delta: 0.0,
        };
        let mut spec = SceneSpec::new(64, 64, MaterialClass::dry_soil(), ch);
        spec.veg_fraction = 0.0;
        let pair = build_scene(&spec, 1).unwrap();
        let cfg = RadarConfig::default();
        let m1 = backscatter_map(&pair.epoch1, &cfg).unwrap();
        let m2 = backscatter_map(&pair.epoch2, &cfg).unwrap();
        assert!(m2.sigma0[(32, 32)] > m1.sigma0[(32, 32)]);
        assert_eq!(m2.sigma0[(3, 3)], m1.sigma0[(3, 3)]);
    }
}
