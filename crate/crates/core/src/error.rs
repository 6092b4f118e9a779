use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid time series: {0}")]
    InvalidSeries(String),

    #[error("variable `{variable}` has zero variance")]
    ZeroVariance { variable: String },

    #[error("variable `{variable}` is identically zero in both series")]
    AllZero { variable: String },

    #[error("window [{start}, {end}) with lead {lead} does not fit a record of {len} steps")]
    OutOfBounds {
        start: usize,
        end: usize,
        lead: usize,
        len: usize,
    },

    #[error("no valid window: {needed} steps required, record has {available}")]
    NoValidWindow { needed: usize, available: usize },

    #[error("insufficient history: {needed} steps required, {available} supplied")]
    InsufficientHistory { needed: usize, available: usize },

    #[error("training window has {0} snapshots, at least 2 are required")]
    EmptyWindow(usize),

    #[error("snapshot matrix is numerically zero")]
    DegenerateData,

    #[error("eigendecomposition failed to converge")]
    EigFailure,

    #[error("all modal amplitudes are zero")]
    DegenerateAmplitudes,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("configuration infeasible: {0}")]
    ConfigInfeasible(String),

    #[error("no successful configuration in cell niw={niw}, now={now}")]
    MissingCell { niw: usize, now: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerical pipeline rather than of the input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::DegenerateData
                | Error::EigFailure
                | Error::DegenerateAmplitudes
                | Error::DimensionMismatch { .. }
                | Error::ZeroVariance { .. }
                | Error::AllZero { .. }
        )
    }

    /// Short stable tag used for failure accounting in reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidSeries(_) => "InvalidSeries",
            Error::ZeroVariance { .. } => "ZeroVariance",
            Error::AllZero { .. } => "AllZero",
            Error::OutOfBounds { .. } => "OutOfBounds",
            Error::NoValidWindow { .. } => "NoValidWindow",
            Error::InsufficientHistory { .. } => "InsufficientHistory",
            Error::EmptyWindow(_) => "EmptyWindow",
            Error::DegenerateData => "DegenerateData",
            Error::EigFailure => "EigFailure",
            Error::DegenerateAmplitudes => "DegenerateAmplitudes",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::ShapeMismatch(_) => "ShapeMismatch",
            Error::ConfigInfeasible(_) => "ConfigInfeasible",
            Error::MissingCell { .. } => "MissingCell",
            Error::Io { .. } => "Io",
            Error::Csv(_) => "Csv",
            Error::Json(_) => "Json",
        }
    }
}
