//! Bi-temporal SLC formation: correlated circular-Gaussian speckle, shared
//! gamma texture (K-family intensities), receiver noise, and epoch-2
//! coregistration and phase jitter.

use alloc::vec::Vec;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::em::BackscatterMap;
use crate::error::{invalid, Result};
use crate::field::smooth_noise;
use crate::raster::{bilinear, Grid};
use crate::rng::{derive_seed, stream, substream, Stage};

const HALF_SQRT: f64 = core::f64::consts::FRAC_1_SQRT_2;

#[inline]
fn circular_gaussian(rng: &mut ChaCha8Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * HALF_SQRT, im * HALF_SQRT)
}

/// Unit-power speckle for both epochs of one look.
#[derive(Debug, Clone, PartialEq)]
pub struct SpecklePair {
    pub w1: Grid<Complex64>,
    pub w2: Grid<Complex64>,
}

/// `w2 = γ·w1 + √(1−γ²)·w⊥` per pixel with independent `CN(0, 1)` draws.
pub fn correlated_speckle(gamma: &Grid<f64>, seed: u64) -> Result<SpecklePair> {
    if let Some(bad) = gamma.iter().find(|g| !(0.0..=1.0).contains(*g)) {
        return Err(invalid!("coherence {bad} outside [0, 1]"));
    }
    let mut rng = stream(seed, Stage::Speckle);
    let (w, h) = gamma.dims();
    let mut w1 = Vec::with_capacity(gamma.len());
    let mut w2 = Vec::with_capacity(gamma.len());
    for &g in gamma.iter() {
        let a = circular_gaussian(&mut rng);
        let b = circular_gaussian(&mut rng);
        w1.push(a);
        w2.push(if g == 1.0 { a } else { a * g + b * (1.0 - g * g).sqrt() });
    }
    Ok(SpecklePair {
        w1: Grid::from_vec(w, h, w1)?,
        w2: Grid::from_vec(w, h, w2)?,
    })
}

/// Acquisition and nuisance knobs for one SLC pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlcParams {
    pub looks: usize,
    /// Texture shape ν; `f64::INFINITY` disables texture.
    pub nu: f64,
    /// Complex SNR in dB; `f64::INFINITY` disables noise.
    pub snr_db: f64,
    /// Standard deviation of the rigid epoch-2 shift, in pixels.
    pub sigma_xy: f64,
    /// Per-pixel standard deviation of the epoch-2 phase screen, in radians.
    pub sigma_phi: f64,
}

impl SlcParams {
    /// Noise, texture and jitter all disabled.
    pub fn clean(looks: usize) -> Self {
        Self {
            looks,
            nu: f64::INFINITY,
            snr_db: f64::INFINITY,
            sigma_xy: 0.0,
            sigma_phi: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlcPair {
    pub s1: Vec<Grid<Complex64>>,
    pub s2: Vec<Grid<Complex64>>,
    pub true_gamma: Grid<f64>,
    pub params: SlcParams,
    /// Realised epoch-2 shift `(dx, dy)` in pixels.
    pub shift: (f64, f64),
    pub seed: u64,
}

impl SlcPair {
    pub fn looks(&self) -> usize {
        self.s1.len()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.true_gamma.dims()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Epoch {
    First,
    Second,
}

/// Per-pixel texture `τ ~ Gamma(ν, 1/ν)` (unit mean), shared by both epochs
/// and all looks.
pub fn texture_field(width: usize, height: usize, nu: f64, seed: u64) -> Result<Grid<f64>> {
    if !(nu > 0.0) {
        return Err(invalid!("texture shape must be positive, got {nu}"));
    }
    if nu.is_infinite() {
        return Ok(Grid::filled(width, height, 1.0));
    }
    let gamma = Gamma::new(nu, 1.0 / nu).map_err(|_| invalid!("bad texture shape {nu}"))?;
    let mut rng = stream(seed, Stage::Texture);
    Ok(Grid::from_fn(width, height, |_, _| gamma.sample(&mut rng)))
}

/// Forms `looks` SLC images per epoch from two backscatter maps.
pub fn form_slc_pair(
    sigma0_t1: &BackscatterMap,
    sigma0_t2: &BackscatterMap,
    gamma: &Grid<f64>,
    params: &SlcParams,
    seed: u64,
) -> Result<SlcPair> {
    let (w, h) = sigma0_t1.dims();
    if sigma0_t2.dims() != (w, h) || gamma.dims() != (w, h) {
        return Err(invalid!("backscatter maps and coherence field differ in size"));
    }
    if w == 0 || h == 0 {
        return Err(invalid!("empty raster"));
    }
    if params.looks == 0 {
        return Err(invalid!("at least one look is required"));
    }
    if !(params.sigma_xy >= 0.0 && params.sigma_phi >= 0.0) {
        return Err(invalid!("jitter standard deviations must be >= 0"));
    }
    if params.snr_db.is_nan() {
        return Err(invalid!("SNR must be a number"));
    }

    let tau = texture_field(w, h, params.nu, seed)?;
    let amp1: Vec<f64> = sigma0_t1
        .sigma0
        .iter()
        .zip(tau.iter())
        .map(|(s, t)| (s * t).sqrt())
        .collect();
    let amp2: Vec<f64> = sigma0_t2
        .sigma0
        .iter()
        .zip(tau.iter())
        .map(|(s, t)| (s * t).sqrt())
        .collect();

    let shift = if params.sigma_xy > 0.0 {
        let mut rng = stream(seed, Stage::Coregistration);
        let dx: f64 = rng.sample(StandardNormal);
        let dy: f64 = rng.sample(StandardNormal);
        (dx * params.sigma_xy, dy * params.sigma_xy)
    } else {
        (0.0, 0.0)
    };

    let phase = if params.sigma_phi > 0.0 {
        let radius = (w.min(h) / 16).max(2);
        let screen = smooth_noise(w, h, radius, seed, Stage::PhaseScreen);
        Some(screen.map(|p| Complex64::from_polar(1.0, p * params.sigma_phi)))
    } else {
        None
    };

    let noise_power = if params.snr_db.is_finite() {
        let mean = (sigma0_t1.sigma0.mean() + sigma0_t2.sigma0.mean()) * 0.5;
        mean * 10f64.powf(-params.snr_db / 10.0)
    } else {
        0.0
    };
    let noise_amp = noise_power.sqrt();

    let speckle_seed = derive_seed(seed, Stage::Speckle as u64);
    let mut s1 = Vec::with_capacity(params.looks);
    let mut s2 = Vec::with_capacity(params.looks);
    for look in 0..params.looks {
        let sp = correlated_speckle(gamma, derive_seed(speckle_seed, look as u64))?;
        let mut a = sp.w1;
        let mut b = sp.w2;
        for (i, v) in a.as_mut_slice().iter_mut().enumerate() {
            *v *= amp1[i];
        }
        for (i, v) in b.as_mut_slice().iter_mut().enumerate() {
            *v *= amp2[i];
        }
        if shift != (0.0, 0.0) {
            let src = b.clone();
            b = Grid::from_fn(w, h, |x, y| bilinear(&src, x as f64 + shift.0, y as f64 + shift.1));
        }
        if let Some(screen) = &phase {
            for (v, p) in b.as_mut_slice().iter_mut().zip(screen.iter()) {
                *v *= *p;
            }
        }
        if noise_amp > 0.0 {
            let mut rng = substream(seed, Stage::Noise, look as u64);
            for v in a.as_mut_slice() {
                *v += circular_gaussian(&mut rng) * noise_amp;
            }
            for v in b.as_mut_slice() {
                *v += circular_gaussian(&mut rng) * noise_amp;
            }
        }
        s1.push(a);
        s2.push(b);
    }

    Ok(SlcPair {
        s1,
        s2,
        true_gamma: gamma.clone(),
        params: *params,
        shift,
        seed,
    })
}

/// Mean of `|S_ℓ|²` over looks.
pub fn multilook_intensity(slc: &SlcPair, epoch: Epoch) -> Grid<f64> {
    let looks = match epoch {
        Epoch::First => &slc.s1,
        Epoch::Second => &slc.s2,
    };
    let (w, h) = slc.dims();
    let mut out = Grid::filled(w, h, 0.0);
    for look in looks {
        for (o, v) in out.as_mut_slice().iter_mut().zip(look.iter()) {
            *o += v.norm_sqr();
        }
    }
    let l = looks.len().max(1) as f64;
    for o in out.as_mut_slice() {
        *o /= l;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn complex_corr(a: &Grid<Complex64>, b: &Grid<Complex64>) -> Complex64 {
        let mut num = Complex64::new(0.0, 0.0);
        let (mut pa, mut pb) = (0.0, 0.0);
        for (x, y) in a.iter().zip(b.iter()) {
            num += x * y.conj();
            pa += x.norm_sqr();
            pb += y.norm_sqr();
        }
        num / (pa * pb).sqrt()
    }

    fn flat(c: f64, n: usize) -> BackscatterMap {
        BackscatterMap {
            sigma0: Grid::filled(n, n, c),
        }
    }

    #[test]
    fn unit_coherence_copies_speckle() {
        let g = Grid::filled(32, 32, 1.0);
        let sp = correlated_speckle(&g, 3).unwrap();
        assert_eq!(sp.w1, sp.w2);
    }

    #[test]
    fn speckle_rejects_bad_coherence() {
        let g = Grid::filled(4, 4, 1.2);
        assert!(correlated_speckle(&g, 0).is_err());
    }

    #[test]
    fn speckle_has_unit_power_and_target_correlation() {
        let g = Grid::filled(1000, 1000, 0.6);
        let sp = correlated_speckle(&g, 17).unwrap();
        let n = 1e6;
        let p1 = sp.w1.iter().map(|v| v.norm_sqr()).sum::<f64>() / n;
        let p2 = sp.w2.iter().map(|v| v.norm_sqr()).sum::<f64>() / n;
        assert!((p1 - 1.0).abs() < 0.01 && (p2 - 1.0).abs() < 0.01);
        let c = complex_corr(&sp.w1, &sp.w2).norm();
        assert!((0.595..=0.605).contains(&c), "{c}");

        let g0 = Grid::filled(1000, 1000, 0.0);
        let sp0 = correlated_speckle(&g0, 18).unwrap();
        assert!(complex_corr(&sp0.w1, &sp0.w2).norm() < 0.005);
    }

    #[test]
    fn all_perturbations_off_gives_identical_epochs() {
        let m = flat(0.3, 24);
        let g = Grid::filled(24, 24, 1.0);
        let p = SlcParams::clean(3);
        let slc = form_slc_pair(&m, &m, &g, &p, 5).unwrap();
        assert_eq!(slc.s1, slc.s2);
        assert_eq!(slc.looks(), 3);
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let m = flat(0.3, 32);
        let g = Grid::filled(32, 32, 0.7);
        let p = SlcParams {
            looks: 2,
            nu: 0.8,
            snr_db: 15.0,
            sigma_xy: 0.2,
            sigma_phi: 0.2,
        };
        let a = form_slc_pair(&m, &m, &g, &p, 99).unwrap();
        let b = form_slc_pair(&m, &m, &g, &p, 99).unwrap();
        assert_eq!(a, b);
        let c = form_slc_pair(&m, &m, &g, &p, 100).unwrap();
        assert_ne!(a.s1, c.s1);
    }

    #[test]
    fn single_look_intensity_is_norm_squared() {
        let m = flat(0.5, 8);
        let g = Grid::filled(8, 8, 0.5);
        let slc = form_slc_pair(&m, &m, &g, &SlcParams::clean(1), 1).unwrap();
        let i = multilook_intensity(&slc, Epoch::Second);
        for (a, b) in i.iter().zip(slc.s2[0].iter()) {
            assert_eq!(*a, b.norm_sqr());
        }
    }

    #[test]
    fn zero_slc_gives_zero_intensity() {
        let m = flat(0.0, 8);
        let g = Grid::filled(8, 8, 0.5);
        let slc = form_slc_pair(&m, &m, &g, &SlcParams::clean(2), 1).unwrap();
        assert!(multilook_intensity(&slc, Epoch::First).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let g = Grid::filled(8, 8, 0.5);
        assert!(form_slc_pair(&flat(1.0, 8), &flat(1.0, 9), &g, &SlcParams::clean(1), 0).is_err());
    }

    #[test]
    fn texture_is_shared_between_epochs() {
        // with gamma = 1 and no noise or jitter, per-pixel intensities match
        // across epochs even when texture is heavy-tailed
        let m = flat(1.0, 64);
        let g = Grid::filled(64, 64, 1.0);
        let mut p = SlcParams::clean(2);
        p.nu = 0.4;
        let slc = form_slc_pair(&m, &m, &g, &p, 8).unwrap();
        let i1 = multilook_intensity(&slc, Epoch::First);
        let i2 = multilook_intensity(&slc, Epoch::Second);
        assert_eq!(i1, i2);
    }
}
