use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("coordinate {coord}: value {value} is outside the support ({reason})")]
    Domain {
        coord: usize,
        value: f64,
        reason: String,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("integer overflow: result needs {required_bits} bits")]
    Overflow { required_bits: u32 },

    #[error("insufficient DoE for variance estimate: {n} points for {params} parameters")]
    InsufficientDoe { n: usize, params: usize },

    #[error(
        "underdetermined system ({rows} rows, {cols} columns): shrink the basis or add points"
    )]
    Underdetermined { rows: usize, cols: usize },

    #[error("weight degeneration: all importance weights are zero")]
    WeightDegeneration,

    #[error("evaluator failure: {0}")]
    Evaluator(String),

    #[error("operation requires a W-variant surrogate")]
    UnsupportedVariant,

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Innermost error with all context layers stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            e => e,
        }
    }
}
