//! Command-line front end of the matchange simulator: experiment
//! configuration, the raster and CSV formats, the parallel trial runner
//! and figure-data export.

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod output;
pub mod raster;
pub mod runner;
