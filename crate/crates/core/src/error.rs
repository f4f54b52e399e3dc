use std::fmt;

/// A single violated configuration bound.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl Violation {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self { field: field.into(), message: message.into() }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration:\n{}", list(.0))]
    Config(Vec<Violation>),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("no output coupling (kappa_out = 0)")]
    NoOutputCoupling,
    #[error("straddling/resonant regime: dispersive shift estimate is singular")]
    SingularChi,
    #[error("beam splitter coefficients are not unitary: |t|^2 + |r|^2 = {0}")]
    NonUnitary(f64),
    #[error("photon-number truncation overflow, use n_max >= {suggested}")]
    TruncationOverflow { suggested: u64 },
    #[error("non-finite {0}")]
    NonFinite(&'static str),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("operation requires {0} mode")]
    WrongMode(&'static str),
    #[error("record: {0}")]
    Record(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn list(v: &[Violation]) -> String {
    v.iter().map(|x| format!("  {x}")).collect::<Vec<_>>().join("\n")
}

impl Error {
    /// True for errors caused by user input (bad config, malformed records).
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::GridMismatch(_)
                | Error::WrongMode(_)
                | Error::Record(_)
                | Error::Json(_)
                | Error::Csv(_)
                | Error::InvalidState(_)
                | Error::NoOutputCoupling
                | Error::Io(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
