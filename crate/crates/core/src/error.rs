use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("level-set gradient degenerate at ({0}, {1}, {2})")]
    DegenerateGradient(f64, f64, f64),
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("index space overflow: {0} entities")]
    IndexOverflow(u128),
    #[error("unsupported lane width {0} (expected 1, 2, 4, 8 or 16)")]
    UnsupportedLanes(usize),
    #[error("unsupported 1D quadrature size {0} (expected 1..=32)")]
    UnsupportedRule(usize),
    #[error("unsupported polynomial degree {0}")]
    UnsupportedDegree(usize),
    #[error("entity is not intersected by the interface: {0}")]
    NotIntersected(String),
    #[error("root finder failed to converge on [{0}, {1}]")]
    RootNotConverged(f64, f64),
    #[error("intersected cell {0} has no active face neighbor to stabilize against")]
    IsolatedCutCell(usize),
    #[error("missing quadrature table for cut entity {0}")]
    MissingQuadrature(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("conjugate gradient did not converge in {iterations} iterations (relative residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("operator is not positive definite (p^T A p = {0:e})")]
    Indefinite(f64),
    #[error("analytic solution has zero norm on the domain")]
    ZeroNorm,
    #[error("flop instrumentation is disabled in this build")]
    InstrumentationDisabled,
    #[error("timer resolution insufficient: single repetition took {0} ns")]
    TimerResolution(u128),
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
