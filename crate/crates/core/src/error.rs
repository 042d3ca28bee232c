use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("unknown name `{name}` (candidates: {})", candidates.join(", "))]
    UnknownName { name: String, candidates: Vec<String> },

    #[error("matrix is not positive definite: {what} (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { what: String, min_eigenvalue: f64 },

    #[error("singular {what} at frequency index {index}")]
    SingularAt { what: String, index: usize },

    #[error("evaluation hits the pole of mode {mode}")]
    PoleHit { mode: usize },

    #[error("resonant degeneracy between {0} and {1}: zero detuning")]
    ResonantDegeneracy(String, String),

    #[error("ill-conditioned least-squares system: singular values {smallest:e} / {largest:e}")]
    Conditioning { smallest: f64, largest: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn stage(stage: &'static str) -> impl FnOnce(Error) -> Error {
        move |e| Error::Stage { stage, source: Box::new(e) }
    }

    /// True for failures caused by the numbers rather than by malformed input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NotPositiveDefinite { .. }
            | Error::SingularAt { .. }
            | Error::PoleHit { .. }
            | Error::ResonantDegeneracy(..)
            | Error::Conditioning { .. }
            | Error::Numerical(_) => true,
            Error::Stage { source, .. } => source.is_numerical(),
            _ => false,
        }
    }

    /// CLI exit code: 2 for validation problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        if self.is_numerical() {
            3
        } else {
            2
        }
    }

    pub(crate) fn unknown(name: &str, candidates: &[String]) -> Error {
        Error::UnknownName { name: name.to_string(), candidates: candidates.to_vec() }
    }
}
