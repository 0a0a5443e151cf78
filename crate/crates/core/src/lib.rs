//! Physics-informed simulator and detector bank for material change
//! detection in coherent (SLC) radar image pairs.
//!
//! The pipeline runs scene synthesis ([`scene`]) through the Fresnel ×
//! roughness backscatter surrogate ([`em`]), correlated-speckle SLC
//! formation ([`slc`]), coherence-aware feature stacks ([`features`]),
//! unsupervised detectors ([`detectors`], [`ae`]), and score fusion and
//! metrics ([`eval`]). [`montecarlo`] ties these into seeded trials.
//!
//! The crate is `no_std` with `alloc`; enable the `std` feature to use the
//! platform math library instead of `libm`.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod ae;
pub mod detectors;
pub mod em;
mod error;
pub mod eval;
pub mod features;
pub mod field;
pub mod linalg;
pub mod montecarlo;
pub mod raster;
pub mod rng;
pub mod scene;
pub mod slc;

pub use error::{Error, Result};
pub use raster::Grid;
