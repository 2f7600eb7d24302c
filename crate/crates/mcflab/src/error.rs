use thiserror::Error;

/// Errors produced by geometry, flow, and diagnostic operations.
#[derive(Debug, Error)]
pub enum Error {
    /// Profile or mesh violates a geometric precondition.
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    /// Operation requires a different topology than the input has.
    #[error("invalid topology: {0}")]
    InvalidTopology(String),

    /// Constructor parameters do not satisfy the documented preconditions.
    #[error("construction error: {0}")]
    Construction(String),

    /// A quadrature failed its node-doubling accuracy check.
    #[error("quadrature accuracy failure: {0}")]
    Accuracy(String),

    /// Requested spacetime slice lies outside the trace.
    #[error("range error: {0}")]
    Range(String),

    /// Point lies outside a tubular-coordinate chart.
    #[error("chart domain error: {0}")]
    ChartDomain(String),

    /// Speed law cannot be evaluated pointwise (e.g. pushforward barriers).
    #[error("unsupported speed law: {0}")]
    UnsupportedLaw(String),

    /// Mesh dimension other than n = 2 requested.
    #[error("unsupported dimension: {0}")]
    UnsupportedDimension(String),

    /// Scenario configuration could not be parsed or resolved.
    #[error("config error at line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
