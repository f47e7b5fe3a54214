use thiserror::Error;

use crate::tracer::SolveStatus;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not square ({rows}x{cols})")]
    NonSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is singular to working precision")]
    SingularMatrix,
    #[error("matrix does not have full row rank")]
    RankDeficient,
    #[error("evaluation produced a non-finite value")]
    NonFiniteEvaluation,
    #[error("dimension {dim} exceeds the enumeration limit {limit}")]
    DimensionTooLarge { dim: usize, limit: usize },
    #[error("argument outside the domain of the map: {0}")]
    Domain(String),
    #[error("initial point is outside the region: {0}")]
    RegionViolation(String),
    #[error("initial point violates start conditions: {}", .0.join(", "))]
    ConditionViolation(Vec<String>),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("solve ended with status {0:?}, no solution to extract")]
    NotConverged(SolveStatus),
}
