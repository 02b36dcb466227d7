use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Shapes or lengths that do not fit together.
    #[error("configuration error: {0}")]
    Config(String),

    /// A primitive produced NaN or an infinity.
    #[error("non-finite value produced by primitive `{primitive}`")]
    NonFinite { primitive: String },

    /// Arguments that are individually valid but not usable together.
    #[error("usage error: {0}")]
    Usage(String),

    /// Input values outside an operation's domain.
    #[error("input error: {0}")]
    Input(String),

    #[error("coordinate {coordinate} has variance {variance:e} below the floor {floor:e}")]
    DegenerateCoordinate {
        coordinate: usize,
        variance: f64,
        floor: f64,
    },

    #[error("matrix is rank deficient; null direction {null_direction:?}")]
    RankDeficient { null_direction: Vec<f64> },

    #[error("unsupported dimension: {0}")]
    UnsupportedDimension(String),

    #[error("problem size {size} exceeds the limit {limit}")]
    Scale { size: usize, limit: usize },

    #[error("optimization diverged at iteration {iteration}: objective {objective:e} exceeds 10x the initial {initial:e}")]
    Divergence {
        iteration: usize,
        initial: f64,
        objective: f64,
        trace: Vec<f64>,
    },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }

    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    /// Whether the error comes from numerical trouble rather than bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::NonFinite { .. } | Error::Divergence { .. } | Error::RankDeficient { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
