use alloc::boxed::Box;
use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid mesh parameters: {0}")]
    InvalidMesh(String),
    #[error("element {elem} is degenerate (signed area {area:e})")]
    DegenerateElement { elem: usize, area: f64 },
    #[error("element index {elem} out of range for {count} elements")]
    ElementIndex { elem: usize, count: usize },
    #[error("field has {got} values but the mesh has {expected} vertices")]
    FieldLength { got: usize, expected: usize },
    #[error("field was built on a different mesh")]
    MeshMismatch,
    #[error("non-finite value {value} at vertex {vertex}")]
    NonFinite { vertex: usize, value: f64 },
    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("linear solve residual {0:e} above tolerance")]
    LinearSolveResidual(f64),
    #[error("eigensolver did not converge")]
    EigenNoConvergence,
    #[error("eigenvalue {index} = {value:e} is not positive")]
    NonPositiveEigenvalue { index: usize, value: f64 },
    #[error("{nodes} nodes exceeds the dense eigensolver limit of {limit}")]
    TooManyNodes { nodes: usize, limit: usize },
    #[error("field is not mean-zero (mean {mean:e})")]
    NotMeanZero { mean: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("entropy argument {0} is negative")]
    NegativeEntropyArgument(f64),
    #[error("smoothed initial datum value {value:e} at vertex {vertex} outside [0, {upper:e}]")]
    InitialBounds { vertex: usize, value: f64, upper: f64 },
    #[error("Picard iteration stalled after {iters} sweeps (residual {residual:e})")]
    PicardNotConverged { iters: usize, residual: f64 },
    #[error("step {step}: {source}")]
    Step { step: usize, source: Box<Error> },
    #[error("decay fit: {0}")]
    Fit(String),
}
