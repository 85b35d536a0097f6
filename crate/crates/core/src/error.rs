//! Error type shared by every stage of the pipeline.

use thiserror::Error;

/// All failures the library can report. Variants are grouped by the kind of
/// problem so a caller (e.g. the CLI) can map them to coarse exit codes:
/// input problems vs numerical problems.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("series {label:?} has no usable observations")]
    EmptySeries { label: String },

    #[error("series {label:?} has a non-positive price at {date} that cannot be repaired")]
    NonPositivePrice { label: String, date: String },

    #[error("series {label:?} has zero return variance")]
    ZeroVariance { label: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("eigenportfolio {k} is ill-defined: eigenvector components sum to {sum:e}")]
    IllDefinedPortfolio { k: usize, sum: f64 },
}

impl Error {
    /// True for errors caused by bad input files or parameters (as opposed
    /// to numerical breakdowns on well-formed input).
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Io(_)
                | Error::Parse(_)
                | Error::Csv(_)
                | Error::InvalidInput(_)
                | Error::EmptySeries { .. }
                | Error::NonPositivePrice { .. }
                | Error::InvalidParameter(_)
        )
    }
}
