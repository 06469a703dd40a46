use std::io;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: String, actual: String },

    #[error("no channels survive rejection")]
    NoChannelsSurvive,

    #[error("degenerate discriminant: class means coincide")]
    DegenerateDiscriminant,

    #[error("too few trials: {0}")]
    TooFewTrials(String),

    #[error("unusable thresholds: t_idle {t_idle} > t_walk {t_walk}")]
    UnusableThresholds { t_idle: f64, t_walk: f64 },

    #[error("simulation already finished")]
    SimulationFinished,

    #[error("malformed data: {0}")]
    Format(String),

    #[error("{:.1}% of runs are censored; density estimation needs at most {:.1}%, use the Monte Carlo p-value", 100.0 * .fraction, 100.0 * .limit)]
    TooCensored { fraction: f64, limit: f64 },

    #[error("collinear regressors")]
    Collinear,

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }
}
