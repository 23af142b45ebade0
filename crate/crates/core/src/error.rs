use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error(
        "quadrature did not converge: best estimate {value:e} with error {error:e} after {evaluations} evaluations"
    )]
    NonConvergence {
        value: f64,
        error: f64,
        evaluations: u64,
    },

    #[error("non-finite Monte-Carlo sample at {point:?}")]
    NonFiniteSample { point: Vec<f64> },

    #[error("probe failed at r = {r:e}: {source}")]
    Probe {
        r: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("fit rejected: {0}")]
    Fit(String),

    #[error("root finding failed: {0}")]
    Root(String),

    #[error("routes disagree: {0}")]
    Consistency(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("report schema version {found} does not match expected {expected}")]
    Schema { found: u64, expected: u64 },

    #[error("experiment {name} failed: {source}")]
    Experiment {
        name: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Process exit code for the command line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Schema { .. } => 2,
            Error::Experiment { source, .. } => source.exit_code(),
            _ => 3,
        }
    }
}
