//! Analysis pipeline for panels of correlated time series: ingestion and
//! cleaning of price data, cross-correlation estimation, random-matrix
//! spectral analysis, annealing-based matrix seriation with consensus
//! clustering, and eigenportfolio/index construction. A `synth` module
//! generates panels with known ground truth for end-to-end verification.

pub mod correlation;
pub mod error;
pub mod ingest;
pub mod portfolio;
pub mod report;
pub mod seriation;
pub mod spectra;
pub mod synth;

pub use error::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
