use thiserror::Error;

use crate::domain::Quarter;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("degenerate filter step at t={t}")]
    DegenerateFilter { t: usize },

    #[error("ill-posed regression")]
    IllPosedRegression,

    #[error("sweep {sweep}: {source}")]
    Sweep {
        sweep: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(
        "bridge sampling did not converge after {iterations} iterations \
         (last log-change {last_change:e}, log estimate {estimate})"
    )]
    BridgeNotConverged {
        iterations: usize,
        last_change: f64,
        estimate: f64,
    },

    #[error("view {view_id}, window {start}..{end}: {source}")]
    Window {
        view_id: u32,
        start: Quarter,
        end: Quarter,
        #[source]
        source: Box<Error>,
    },

    #[error("all prior mass sits on views with -inf evidence")]
    NoEvidence,

    #[error("objective is non-finite at every start")]
    NonFiniteObjective,

    #[error("zero variance")]
    ZeroVariance,

    #[error("archive: {0}")]
    Archive(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    /// True for failures of the numerical machinery, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::DegenerateFilter { .. }
            | Error::IllPosedRegression
            | Error::BridgeNotConverged { .. }
            | Error::NoEvidence
            | Error::NonFiniteObjective
            | Error::ZeroVariance => true,
            Error::Sweep { source, .. } | Error::Window { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
