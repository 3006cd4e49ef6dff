use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MabaError {
    #[error("singular point: {what} (|denominator| = {magnitude:.3e})")]
    SingularPoint { what: String, magnitude: f64 },
    #[error("zero argument passed to {0}")]
    ZeroArgument(&'static str),
    #[error("index {index} out of range 1..={len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("layout mismatch: {0}")]
    LayoutMismatch(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("action identity {identity} failed with residual {residual:.3e}")]
    ActionCheckFailed { identity: &'static str, residual: f64 },
    #[error("Newton iteration diverged after {iterations} steps (residual {residual:.3e})")]
    Diverged { iterations: usize, residual: f64 },
    #[error("singular Jacobian at iteration {0}")]
    SingularJacobian(usize),
    #[error("root set sits on a singular locus: {0}")]
    StuckAtSingularLocus(String),
    #[error("homotopy paths collided at t = {t:.6}")]
    PathCollision { t: f64 },
    #[error("homotopy step underflow at t = {t:.6}")]
    StepUnderflow { t: f64 },
    #[error("ambiguous spectrum match: eigenvalues {0:.3e} apart")]
    AmbiguousMatch(f64),
    #[error("numerical derivative unstable (Richardson spread {0:.3e})")]
    DerivativeUnstable(f64),
    #[error("division by zero: {0} vanishes")]
    DivisionByZero(&'static str),
}

pub type Result<T> = std::result::Result<T, MabaError>;
