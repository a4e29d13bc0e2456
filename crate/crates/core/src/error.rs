//! Crate-wide error type.

use crate::ingest::Reject;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error in {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: missing required column `{column}`")]
    MissingColumn { path: String, column: String },

    /// Reject fraction reached the fatal threshold while loading outages.
    #[error("{path}: {rejected} of {total} rows rejected, at or above the {limit_percent}% limit")]
    TooManyRejects {
        path: String,
        rejected: usize,
        total: usize,
        limit_percent: f64,
        rejects: Vec<Reject>,
    },

    #[error("{path} line {line}: {reason}")]
    BadRow {
        path: String,
        line: u64,
        reason: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("no stations provided")]
    NoStations,

    #[error("outage `{id}` has neither coordinates nor a station assignment")]
    MissingLocation { id: String },

    #[error("no events")]
    NoEvents,

    #[error("insufficient tail: {available} costs at or above x_min, need at least {required}")]
    InsufficientTail { available: usize, required: usize },

    #[error("degenerate tail: every tail cost equals x_min, slope is undefined")]
    DegenerateTail,

    #[error("x = {x} is below x_min = {x_min}; the tail model is defined for x >= x_min")]
    BelowXmin { x: f64, x_min: f64 },

    /// Mean-of-tail computations are refused when the fitted tail is too
    /// heavy: a power-law CCDF with slope magnitude alpha <= 1 has an
    /// infinite mean.
    #[error(
        "tail mean is infinite: fitted alpha = {alpha} is <= 1, so the power-law tail has no \
         finite mean and mean-based summaries are not usable"
    )]
    InfiniteMean { alpha: f64 },

    #[error("cannot fit outage rate curve: {0}")]
    RateFit(String),

    #[error("shift undefined: fitted gamma = {gamma} is not positive")]
    ShiftUndefined { gamma: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
