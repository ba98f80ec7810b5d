use thiserror::Error;

/// Failures shared across the library. Variants carry enough context for the CLI to
/// pick an exit code without string matching.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum FpeError {
    #[error("sliding field undefined: |Yf - Xf| = {gap:e} at ({x}, {y})")]
    DegenerateDenominator { x: f64, y: f64, gap: f64 },
    #[error("trajectory left the domain at t = {t} near ({x}, {y})")]
    DomainExit { t: f64, x: f64, y: f64 },
    #[error("degenerate point ({x}, {y}): first and second Lie derivatives vanish")]
    DegeneratePoint { x: f64, y: f64 },
    #[error("branch budget of {budget} exceeded")]
    BranchBudgetExceeded { budget: usize },
    #[error("shifted view needs [{need_lo}, {need_hi}] but data covers [{have_lo}, {have_hi}]")]
    WindowExceeded { need_lo: i64, need_hi: i64, have_lo: i64, have_hi: i64 },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("no return within the window: {0}")]
    NoReturnInWindow(String),
    #[error("invalid system: {0}")]
    InvalidSystem(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for FpeError {
    fn from(e: std::io::Error) -> Self {
        FpeError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for FpeError {
    fn from(e: serde_json::Error) -> Self {
        FpeError::Io(e.to_string())
    }
}

impl From<csv::Error> for FpeError {
    fn from(e: csv::Error) -> Self {
        FpeError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, FpeError>;
