use thiserror::Error;

#[derive(Debug, Error)]
pub enum YmbError {
    #[error("stencil underflow at node {node}: needs {needed} points on each side")]
    StencilUnderflow { node: usize, needed: usize },
    #[error("grid mismatch: {0} vs {1} nodes")]
    GridMismatch(usize, usize),
    #[error("singular point: evaluation at the bubble center")]
    SingularPoint,
    #[error("near-boundary evaluation at |x| = {radius} (cutoff {cutoff})")]
    NearBoundary { radius: f64, cutoff: f64 },
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("linear solver did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("Picard iteration not contracting at eps = {eps}: {reason}")]
    NonContraction { eps: f64, reason: String },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("missing ingredient: {0}")]
    Missing(String),
    #[error("tangential trace violation: {0:e}")]
    TraceViolation(f64),
    #[error("cache format error: {0}")]
    Cache(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, YmbError>;
