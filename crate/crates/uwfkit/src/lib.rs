//! File formats, configuration, manifests and batch processing around
//! `uwfkit-core`.

pub mod batch;
pub mod cli;
pub mod config;
pub mod io;
pub mod manifest;
