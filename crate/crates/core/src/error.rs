//! Crate-wide error type.
//!
//! Every fallible operation returns [`Error`]. Each variant carries a stable
//! machine-readable kind string (see [`Error::kind`]) that the CLI prints in
//! its `ERROR <Kind>:` diagnostic line, so scripts can dispatch on it without
//! parsing prose.

use crate::mean::MeanResult;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("input is not symmetric: relative skew {skew:.3e} exceeds tolerance {tol:.3e}")]
    AsymmetricInput { skew: f64, tol: f64 },

    #[error("matrix is not positive definite (smallest eigenvalue {min_eig:.6e})")]
    NotPositiveDefinite { min_eig: f64 },

    #[error("symmetric eigensolver did not converge within {max_iter} iterations")]
    ConvergenceFailure { max_iter: usize },

    #[error("non-finite result in {context}")]
    Overflow { context: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("non-finite value in {context}")]
    NonFiniteValue { context: String },

    #[error("empty input set")]
    EmptySet,

    #[error(
        "mean iteration stopped after {} steps with gradient norm {:.3e} (tolerance not reached)",
        best.iterations,
        best.final_grad_norm
    )]
    NoConvergence { best: Box<MeanResult> },

    #[error("singular normal equations: lambda = 0 with rank-deficient features")]
    SingularSystem,

    #[error("classifier needs at least two distinct classes, found {found}")]
    SingleClass { found: usize },

    #[error("split leaves class {class} with no training samples")]
    DegenerateSplit { class: u32 },

    #[error("dataset is rank deficient: {msg}")]
    RankDeficient { msg: String },

    #[error("manifest error at line {line}: {msg}")]
    ManifestError { line: usize, msg: String },

    #[error("format error in {path}: {msg}")]
    FormatError { path: String, msg: String },

    #[error("empty image: {path}")]
    EmptyImage { path: String },

    #[error("invalid argument: {0}")]
    InvalidInput(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Stable kind name used in CLI diagnostics and tests.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::AsymmetricInput { .. } => "AsymmetricInput",
            Error::NotPositiveDefinite { .. } => "NotPositiveDefinite",
            Error::ConvergenceFailure { .. } => "ConvergenceFailure",
            Error::Overflow { .. } => "Overflow",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::NonFiniteValue { .. } => "NonFiniteValue",
            Error::EmptySet => "EmptySet",
            Error::NoConvergence { .. } => "NoConvergence",
            Error::SingularSystem => "SingularSystem",
            Error::SingleClass { .. } => "SingleClass",
            Error::DegenerateSplit { .. } => "DegenerateSplit",
            Error::RankDeficient { .. } => "RankDeficient",
            Error::ManifestError { .. } => "ManifestError",
            Error::FormatError { .. } => "FormatError",
            Error::EmptyImage { .. } => "EmptyImage",
            Error::InvalidInput(_) => "InvalidInput",
            Error::Io { .. } => "Io",
        }
    }

    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn dim(expected: impl Into<String>, found: impl Into<String>) -> Self {
        Error::DimensionMismatch {
            expected: expected.into(),
            found: found.into(),
        }
    }
}
