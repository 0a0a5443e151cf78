//! Smooth random fields: low-frequency cosine modes and blurred noise.

use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::raster::{box_mean, Grid};
use crate::rng::{stream, Stage};

/// Sum of 2–4 low-frequency 2-D cosine modes with random phases and
/// orientations, rescaled so the largest absolute value is exactly 1.
///
/// Spatial frequencies lie between 0.5 and 2 cycles across the larger
/// raster side. A field that vanishes identically is returned as zeros.
pub fn cosine_modes(width: usize, height: usize, seed: u64, stage: Stage) -> Grid<f64> {
    let mut rng = stream(seed, stage);
    let n_modes = rng.random_range(2..=4);
    let side = width.max(height) as f64;
    let modes: Vec<(f64, f64, f64, f64)> = (0..n_modes)
        .map(|_| {
            let cycles = rng.random_range(0.5..2.0);
            let angle = rng.random_range(0.0..PI);
            let phase = rng.random_range(0.0..2.0 * PI);
            let amp = rng.random_range(0.5..1.0);
            let k = 2.0 * PI * cycles / side;
            (k * angle.cos(), k * angle.sin(), phase, amp)
        })
        .collect();
    let raw = Grid::from_fn(width, height, |x, y| {
        modes
            .iter()
            .map(|&(kx, ky, ph, a)| a * (kx * x as f64 + ky * y as f64 + ph).cos())
            .sum::<f64>()
    });
    let peak = raw.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return Grid::filled(width, height, 0.0);
    }
    raw.map(|v| (v / peak).clamp(-1.0, 1.0))
}

/// White Gaussian noise blurred by two passes of a `(2r+1)²` box filter,
/// then standardised to zero mean and unit standard deviation.
pub fn smooth_noise(width: usize, height: usize, radius: usize, seed: u64, stage: Stage) -> Grid<f64> {
    let mut rng = stream(seed, stage);
    let white = Grid::from_fn(width, height, |_, _| rng.sample::<f64, _>(StandardNormal));
    let blurred = box_mean(&box_mean(&white, radius), radius);
    let mean = blurred.mean();
    let var = blurred.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / blurred.len() as f64;
    let sd = var.sqrt();
    if sd == 0.0 {
        return Grid::filled(width, height, 0.0);
    }
    blurred.map(|v| (v - mean) / sd)
}
