use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An operand fell outside the domain of a primitive (division by a
    /// zero-modulus complex, square root of a negative real, arcsin of |x| > 1).
    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: expected {expected}, got {got} ({context})")]
    Shape {
        expected: usize,
        got: usize,
        context: String,
    },

    /// A non-finite value appeared while recording a computation.
    #[error("non-finite value at tape node {node}")]
    Numeric { node: usize },

    #[error("validation failed: {0}")]
    Validation(String),

    /// A matrix handed to the mesh decomposer is not unitary.
    #[error("matrix is not unitary: ||U^H U - I||_F = {residual:e}")]
    NotUnitary { residual: f64 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{0}")]
    Usage(String),

    /// An encoding was differentiated at a point where it has no derivative.
    #[error("singular point: {0}")]
    Singular(String),

    #[error("training diverged at epoch {epoch}: {message}")]
    Diverged { epoch: usize, message: String },

    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn shape(expected: usize, got: usize, context: impl Into<String>) -> Self {
        Error::Shape {
            expected,
            got,
            context: context.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
