//! Dense row-major 2-D rasters and the windowed sums used throughout.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{AddAssign, Index, IndexMut};

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{invalid, Result};

/// A `width × height` raster stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Clone> Grid<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }
}

impl<T> Grid<T> {
    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != width * height {
            return Err(invalid!(
                "raster data length {} does not match {width}x{height}",
                data.len()
            ));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index_of(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn same_dims<U>(&self, other: &Grid<U>) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Grid<U> {
        Grid {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn iter(&self) -> core::slice::Iter<'_, T> {
        self.data.iter()
    }
}

impl<T> Index<(usize, usize)> for Grid<T> {
    type Output = T;

    #[inline]
    fn index(&self, (x, y): (usize, usize)) -> &T {
        &self.data[y * self.width + x]
    }
}

impl<T> IndexMut<(usize, usize)> for Grid<T> {
    #[inline]
    fn index_mut(&mut self, (x, y): (usize, usize)) -> &mut T {
        &mut self.data[y * self.width + x]
    }
}

impl Grid<bool> {
    pub fn count_true(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }
}

impl Grid<f64> {
    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }
}

/// Windowed sum over a `(2r+1) × (2r+1)` box centred on every pixel.
///
/// Windows are truncated at the raster border. The sum is separable
/// (rows, then columns) and accumulated directly rather than as a running
/// difference.
pub fn box_sum<T>(grid: &Grid<T>, radius: usize) -> Grid<T>
where
    T: Copy + Default + AddAssign,
{
    let (w, h) = grid.dims();
    let mut rows = Grid::filled(w, h, T::default());
    for y in 0..h {
        let src = &grid.data[y * w..(y + 1) * w];
        let dst = &mut rows.data[y * w..(y + 1) * w];
        for x in 0..w {
            let lo = x.saturating_sub(radius);
            let hi = (x + radius).min(w - 1);
            let mut acc = T::default();
            for v in &src[lo..=hi] {
                acc += *v;
            }
            dst[x] = acc;
        }
    }
    let mut out = Grid::filled(w, h, T::default());
    for y in 0..h {
        let lo = y.saturating_sub(radius);
        let hi = (y + radius).min(h - 1);
        for yy in lo..=hi {
            let src = &rows.data[yy * w..(yy + 1) * w];
            let dst = &mut out.data[y * w..(y + 1) * w];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += *s;
            }
        }
    }
    out
}

/// Number of in-raster pixels inside the truncated box at `(x, y)`.
#[inline]
pub fn box_count(width: usize, height: usize, x: usize, y: usize, radius: usize) -> usize {
    let nx = (x + radius).min(width - 1) - x.saturating_sub(radius) + 1;
    let ny = (y + radius).min(height - 1) - y.saturating_sub(radius) + 1;
    nx * ny
}

/// Moving mean with truncated, renormalised windows.
pub fn box_mean(grid: &Grid<f64>, radius: usize) -> Grid<f64> {
    let (w, h) = grid.dims();
    let mut sums = box_sum(grid, radius);
    for y in 0..h {
        for x in 0..w {
            sums[(x, y)] /= box_count(w, h, x, y, radius) as f64;
        }
    }
    sums
}

/// Bilinear sample at fractional coordinates, clamping to the border.
pub fn bilinear<T>(grid: &Grid<T>, fx: f64, fy: f64) -> T
where
    T: Copy + core::ops::Add<Output = T> + core::ops::Mul<f64, Output = T>,
{
    let (w, h) = grid.dims();
    let fx = fx.clamp(0.0, (w - 1) as f64);
    let fy = fy.clamp(0.0, (h - 1) as f64);
    let x0 = fx.floor() as usize;
    let y0 = fy.floor() as usize;
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let tx = fx - x0 as f64;
    let ty = fy - y0 as f64;
    let top = grid[(x0, y0)] * (1.0 - tx) + grid[(x1, y0)] * tx;
    let bottom = grid[(x0, y1)] * (1.0 - tx) + grid[(x1, y1)] * tx;
    top * (1.0 - ty) + bottom * ty
}
