//! Binary opening and closing with a square structuring element.

use crate::raster::{box_sum, Grid};

/// Erosion; pixels outside the raster count as set.
pub fn erode(mask: &Grid<bool>, radius: usize) -> Grid<bool> {
    let holes = box_sum(&mask.map(|&b| u32::from(!b)), radius);
    holes.map(|&n| n == 0)
}

/// Dilation; pixels outside the raster count as clear.
pub fn dilate(mask: &Grid<bool>, radius: usize) -> Grid<bool> {
    let hits = box_sum(&mask.map(|&b| u32::from(b)), radius);
    hits.map(|&n| n > 0)
}

pub fn opening(mask: &Grid<bool>, radius: usize) -> Grid<bool> {
    dilate(&erode(mask, radius), radius)
}

pub fn closing(mask: &Grid<bool>, radius: usize) -> Grid<bool> {
    erode(&dilate(mask, radius), radius)
}

/// Opening then closing with a `(2r+1) × (2r+1)` square; `radius = 0` is
/// the identity.
pub fn morph_clean(mask: &Grid<bool>, radius: usize) -> Grid<bool> {
    if radius == 0 || mask.is_empty() {
        return mask.clone();
    }
    closing(&opening(mask, radius), radius)
}
