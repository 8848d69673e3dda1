use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or inconsistent input values.
    #[error("validation error: {0}")]
    Validation(String),

    /// Arguments outside the domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("insufficient points: have {have}, need at least {need}")]
    InsufficientPoints { have: usize, need: usize },

    #[error("point {point} has only {found} reachable neighbours, K = {k}")]
    InsufficientNeighbours { point: usize, k: usize, found: usize },

    #[error("point {point} has zero K-th nearest-neighbour volume at K = {k} (co-located points)")]
    ZeroVolume { point: usize, k: usize },

    /// A mixture component collapsed during EM.
    #[error("degenerate mixture fit: {0}")]
    Degenerate(String),

    #[error("time budget of {0:.1} s exceeded")]
    TimeBudget(f64),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("toml error: {0}")]
    Toml(#[from] toml::de::Error),

    #[error("geojson error: {0}")]
    GeoJson(String),
}

impl Error {
    /// Machine-readable error kind used in error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Validation(_) => "validation",
            Error::Domain(_) => "domain",
            Error::InsufficientPoints { .. } => "insufficient_points",
            Error::InsufficientNeighbours { .. } => "insufficient_neighbours",
            Error::ZeroVolume { .. } => "zero_volume",
            Error::Degenerate(_) => "degenerate",
            Error::TimeBudget(_) => "time_budget",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
            Error::Toml(_) => "toml",
            Error::GeoJson(_) => "geojson",
        }
    }

    /// Process exit code: 2 for input problems, 3 for degenerate fits.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Degenerate(_) => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn validation(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}
