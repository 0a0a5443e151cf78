use super::ScoreMap;
use crate::error::{Error, Result};
use crate::raster::Grid;

/// `1 − |γ̂|` per pixel.
pub fn ccd_map(coherence_mag: &Grid<f64>) -> ScoreMap {
    ScoreMap::dense("ccd", coherence_mag.map(|c| 1.0 - c))
}

/// Slot for the finite-look maximum-likelihood CCD statistic. The statistic
/// is not provided; requesting it is an error.
pub fn ccd_ml_map(_coherence_mag: &Grid<f64>) -> Result<ScoreMap> {
    Err(Error::Unsupported("ccdml".into()))
}
