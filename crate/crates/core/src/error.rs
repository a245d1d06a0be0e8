use thiserror::Error;

#[derive(Debug, Error)]
pub enum JsrError {
    #[error("invalid matrix set: {0}")]
    InvalidSet(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("empty product word")]
    EmptyWord,

    #[error("matrix index {index} out of range for a set of {count}")]
    IndexOutOfRange { index: usize, count: usize },

    #[error("eigenvalue iteration did not converge")]
    NoConvergence,

    #[error("leading eigenvalue is not real")]
    ComplexLeading,

    #[error("leading eigenvalue is defective")]
    DefectiveLeading,

    #[error("enumeration needs {needed} products, budget is {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },

    #[error("unsupported difference pattern: {0}")]
    UnsupportedPattern(String),

    #[error("invalid subdivision scheme: {0}")]
    InvalidScheme(String),

    #[error("invalid option: {0}")]
    InvalidOption(String),

    #[error("polynomial root finding failed")]
    RootFinding,

    #[error("coefficient residual {0:e} exceeds tolerance")]
    Residual(f64),
}

pub type Result<T> = std::result::Result<T, JsrError>;
