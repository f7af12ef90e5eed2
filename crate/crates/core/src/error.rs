use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Caller broke an operation's contract (mismatched generations, missing data, ...).
    #[error("usage error: {0}")]
    Usage(String),

    #[error(
        "parameter {value} for cell {cell} of generation {generation} lies outside [1, {ceiling}]"
    )]
    ParameterOutOfRange {
        generation: usize,
        cell: usize,
        value: f64,
        ceiling: f64,
    },

    /// The oscillation of a profile exceeds what the spacing range can compensate.
    #[error("infeasible at generation {generation}: oscillation {oscillation:e} exceeds budget {budget:e}")]
    Infeasible {
        generation: usize,
        oscillation: f64,
        budget: f64,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate geometry: cells {first} and {second} coincide at generation {generation}")]
    Degenerate {
        generation: usize,
        first: usize,
        second: usize,
    },

    #[error("ring kernel singularity at (t, R) = ({t:e}, {radius})")]
    Singularity { t: f64, radius: f64 },

    #[error("error budget {requested:e} unattainable; best certified bound is {attainable:e}")]
    Budget { requested: f64, attainable: f64 },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("generation {generation} needs {points} points, above the configured cap of {cap}")]
    MemoryGuard {
        generation: usize,
        points: usize,
        cap: usize,
    },

    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
