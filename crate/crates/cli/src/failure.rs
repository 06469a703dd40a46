use std::fmt;

use ambulate::Error;

/// Process exit codes.
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_PIPELINE: i32 = 3;

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Data(String),
    Pipeline(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Data(_) => EXIT_DATA,
            Failure::Pipeline(_) => EXIT_PIPELINE,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "usage error: {m}"),
            Failure::Data(m) => write!(f, "data error: {m}"),
            Failure::Pipeline(m) => write!(f, "pipeline error: {m}"),
        }
    }
}

/// Malformed or unusable inputs are data errors; failures while computing are
/// pipeline errors.
fn classify(context: &str, err: Error) -> Failure {
    let msg = format!("{context}: {err}");
    match err {
        Error::Io(_) | Error::Format(_) | Error::InvalidInput(_) | Error::ShapeMismatch { .. } => Failure::Data(msg),
        _ => Failure::Pipeline(msg),
    }
}

pub trait Context<T> {
    fn context(self, stage: &str) -> Result<T, Failure>;
}

impl<T> Context<T> for Result<T, Error> {
    fn context(self, stage: &str) -> Result<T, Failure> {
        self.map_err(|e| classify(stage, e))
    }
}

impl<T> Context<T> for Result<T, std::io::Error> {
    fn context(self, stage: &str) -> Result<T, Failure> {
        self.map_err(|e| Failure::Data(format!("{stage}: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_classes() {
        let r: Result<(), Error> = Err(Error::Format("x".into()));
        assert_eq!(r.context("load").unwrap_err().exit_code(), EXIT_DATA);
        let r: Result<(), Error> = Err(Error::NoChannelsSurvive);
        let f = r.context("train").unwrap_err();
        assert_eq!(f.exit_code(), EXIT_PIPELINE);
        assert!(f.to_string().starts_with("pipeline error: train:"));
    }
}
