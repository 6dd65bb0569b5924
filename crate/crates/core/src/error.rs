use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("basis is empty")]
    EmptyBasis,
    #[error("basis element {index} has shape {rows}x{cols}, expected {dim}x{dim}")]
    BadBasisShape { index: usize, rows: usize, cols: usize, dim: usize },
    #[error("basis contains a non-finite entry (element {index})")]
    NonFinite { index: usize },
    #[error("basis is linearly dependent (smallest singular value {sigma_min:.3e})")]
    DependentBasis { sigma_min: f64 },
    #[error("span is not adjoint-closed: adjoint of basis element {index} leaves the span (residual {residual:.3e})")]
    NotAdjointClosed { index: usize, residual: f64 },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("element is not selfadjoint (deviation {deviation:.3e})")]
    NotSelfadjoint { deviation: f64 },
    #[error("invalid tolerance configuration: {0}")]
    InvalidTolerance(String),
    #[error("body does not support {0}")]
    UnsupportedNode(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("origin is not in the body (distance {distance:.3e})")]
    OriginNotInBody { distance: f64 },
    #[error("body is unbounded")]
    UnboundedBody,
    #[error("iteration limit reached (residual {residual:.3e})")]
    MaxIterations { residual: f64 },
    #[error("level {level} is outside 1..={cap}")]
    LevelOutOfRange { level: usize, cap: usize },
    #[error("inclusion fails: sampled point of the inner body lies outside the outer body (distance {distance:.3e})")]
    NotNested { distance: f64 },
    #[error("element is not a difference of positives: {0}")]
    Infeasible(String),
    #[error("system is not positively generated at level {level} (cone span rank {rank} of {dim})")]
    NotPositivelyGenerated { level: usize, rank: usize, dim: usize },
    #[error("map is not surjective (rank {rank} of {dim})")]
    NotSurjective { rank: usize, dim: usize },
    #[error("functional is not a quasistate (violation {violation:.3e})")]
    NotQuasistate { violation: f64 },
    #[error("kernel does not match the kernel of the registered map: {0}")]
    KernelMismatch(String),
    #[error("exact mode unavailable: {0}")]
    ExactUnavailable(String),
    #[error("solver failure: {0}")]
    Solver(String),
}

pub type Result<T> = std::result::Result<T, Error>;
