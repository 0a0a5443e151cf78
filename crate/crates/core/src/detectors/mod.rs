//! Unsupervised detector bank: global and robust RX, dual-ring Local-RX,
//! and coherence-based CCD.

mod background;
mod ccd;
mod local;
mod rx;

use alloc::string::{String, ToString};

use crate::raster::Grid;

pub use background::{fit_background, fit_rows, tyler_residual, BackgroundModel, FitConfig, ScatterKind};
pub use ccd::{ccd_map, ccd_ml_map};
pub use local::{local_rx_map, LocalRxConfig, LocalRxGeometry};
pub use rx::{global_rx_map, rx_score, RxConfig};

/// Per-pixel anomaly scores of one detector (higher = more anomalous).
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMap {
    pub detector: String,
    pub scores: Grid<f64>,
    /// Pixels with a defined score.
    pub valid: Grid<bool>,
}

impl ScoreMap {
    /// A map whose every pixel is valid.
    pub fn dense(detector: &str, scores: Grid<f64>) -> Self {
        let (w, h) = scores.dims();
        Self {
            detector: detector.to_string(),
            scores,
            valid: Grid::filled(w, h, true),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        self.scores.dims()
    }

    /// Scores of valid pixels, in raster order.
    pub fn valid_scores(&self) -> impl Iterator<Item = f64> + '_ {
        self.scores
            .iter()
            .zip(self.valid.iter())
            .filter(|(_, v)| **v)
            .map(|(s, _)| *s)
    }

    /// Valid pixels scoring strictly above `threshold`.
    pub fn detections(&self, threshold: f64) -> Grid<bool> {
        Grid::from_fn(self.scores.width(), self.scores.height(), |x, y| {
            self.valid[(x, y)] && self.scores[(x, y)] > threshold
        })
    }
}

/// Every detector the harness knows, in canonical reporting order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DetectorKind {
    /// Global RX with sample covariance.
    Rx,
    /// Global RX with Tyler scatter.
    RxRob,
    /// Dual-ring Local-RX.
    Lrx,
    /// `1 − |γ̂|`.
    Ccd,
    /// Maximum-likelihood CCD statistic (slot only).
    CcdMl,
    /// Convolutional autoencoder reconstruction error.
    Ae,
    /// Equal-weight fusion of RXrob and CCD.
    Fuse,
    /// Learned fusion of RXrob and CCD.
    FuseW,
    /// Learned fusion of RXrob, CCD and AE.
    Fuse3W,
}

impl DetectorKind {
    pub const ALL: [DetectorKind; 9] = [
        DetectorKind::Rx,
        DetectorKind::RxRob,
        DetectorKind::Lrx,
        DetectorKind::Ccd,
        DetectorKind::CcdMl,
        DetectorKind::Ae,
        DetectorKind::Fuse,
        DetectorKind::FuseW,
        DetectorKind::Fuse3W,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DetectorKind::Rx => "rx",
            DetectorKind::RxRob => "rxrob",
            DetectorKind::Lrx => "lrx",
            DetectorKind::Ccd => "ccd",
            DetectorKind::CcdMl => "ccdml",
            DetectorKind::Ae => "ae",
            DetectorKind::Fuse => "fuse",
            DetectorKind::FuseW => "fusew",
            DetectorKind::Fuse3W => "fuse3w",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|d| d.name() == s)
    }

    /// Base detectors a fused detector is built from.
    pub fn inputs(self) -> &'static [DetectorKind] {
        match self {
            DetectorKind::Fuse | DetectorKind::FuseW => &[DetectorKind::RxRob, DetectorKind::Ccd],
            DetectorKind::Fuse3W => &[DetectorKind::RxRob, DetectorKind::Ccd, DetectorKind::Ae],
            _ => &[],
        }
    }
}
