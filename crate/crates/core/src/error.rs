use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("delay a = {a} is outside the legal interval (0, π)")]
    DelayOutOfRange { a: f64 },

    #[error("x = {x} is outside [0, π]")]
    OutOfDomain { x: f64 },

    #[error("invalid piecewise function: {0}")]
    InvalidFunction(String),

    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    #[error("invalid option: {0}")]
    InvalidOption(String),

    #[error("non-finite solution value at x = {x} (|Im λ| too large?)")]
    NonFinite { x: f64 },

    #[error("series depth k = {k} is not supported (max 3); use the solver for deeper terms")]
    UnsupportedDepth { k: usize },

    #[error("|λ| = {abs:.3} exceeds the series limit {limit}; use the solver")]
    OscillationLimit { abs: f64, limit: f64 },

    #[error("matrix index ({row}, {col}) outside {{1, 2}}")]
    IndexOutOfRange { row: usize, col: usize },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("degenerate kernel: all Nyström eigenvalues are below {threshold:e}")]
    DegenerateKernel { threshold: f64 },

    #[error("not found: {0}")]
    NotFound(String),

    #[error("family construction failed: no eigenpair with eigenvalue {sign}1 ({detail})")]
    MissingEigenpair { sign: char, detail: String },

    #[error("spectrum has unresolved entries at n = {0:?}")]
    FlaggedSpectrum(Vec<i64>),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
