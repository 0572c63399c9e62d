use std::io;

use thiserror::Error;

use crate::mcquant::TableKind;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Param(String),

    /// Support scan ran past the configured ceiling.
    #[error("negative binomial support exceeded ceiling {ceiling} (d={d}, R={r})")]
    Overflow { d: u64, r: f64, ceiling: u64 },

    #[error("no {kind} quantile for gamma={gamma}, d_max={d_max}, R={r} in the calibration table")]
    Coverage {
        kind: TableKind,
        gamma: f64,
        d_max: u64,
        r: f64,
    },

    #[error("no {kind} calibration table given (pass --table, set FDP_BANDS_TABLE, or use KR only)")]
    MissingTable { kind: TableKind },

    #[error("{kind} table was calibrated for R={table}, analysis needs R={wanted}")]
    RMismatch {
        kind: TableKind,
        table: f64,
        wanted: f64,
    },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("unsupported table version: {0}")]
    Version(String),

    #[error("table checksum mismatch (expected {expected}, found {found})")]
    Checksum { expected: String, found: String },

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Param(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }

    /// True for errors caused by a calibration table that does not cover the request.
    pub fn is_coverage(&self) -> bool {
        matches!(self, Error::Coverage { .. } | Error::RMismatch { .. } | Error::MissingTable { .. })
    }
}
