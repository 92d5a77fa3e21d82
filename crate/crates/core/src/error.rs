use thiserror::Error;

/// Errors raised by the tensor algebra, laminate formulas, bound checks and solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid phases: need 0 < gamma1 < gamma0 < inf, got gamma1={gamma1}, gamma0={gamma0}")]
    InvalidPhases { gamma1: f64, gamma0: f64 },

    #[error("volume fraction {value} outside {range}")]
    InvalidFraction { value: f64, range: &'static str },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("tensor is singular (smallest |eigenvalue| {min_abs:e}, largest {max_abs:e})")]
    SingularTensor { min_abs: f64, max_abs: f64 },

    #[error("tensor is not positive definite (smallest eigenvalue {min:e})")]
    NotPositiveDefinite { min: f64 },

    #[error("direction {index} is not a unit vector (norm {norm})")]
    NonUnitDirection { index: usize, norm: f64 },

    #[error("Jacobi eigen-solver did not converge in {sweeps} sweeps")]
    EigenNoConvergence { sweeps: usize },

    #[error("laminate formula is degenerate: {0}")]
    DegenerateFormula(String),

    #[error("invalid laminate spec: {0}")]
    InvalidSpec(String),

    #[error("target eigenvalues are off the bounding curve: {what} = {value}, expected {expected}")]
    TargetOffCurve {
        what: &'static str,
        value: f64,
        expected: f64,
    },

    #[error("target eigenvalue {index} = {value} outside [{lo}, {hi}]")]
    TargetOutOfRange {
        index: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("target eigenvalues lie outside the zero-volume region: {0}")]
    TargetOutsideRegion(String),

    #[error("unsupported dimension {0}")]
    UnsupportedDimension(usize),

    #[error("invalid fraction sequence: {0}")]
    InvalidSequence(String),

    #[error("invalid microstructure: {0}")]
    InvalidMicrostructure(String),

    #[error("conjugate gradient did not converge: {iterations} iterations, relative residual {residual:e}")]
    SolverDiverged { iterations: usize, residual: f64 },

    #[error("microstructure has no inclusion phase; polarization tensor undefined")]
    EmptyInclusion,

    #[error("volume fraction is zero; polarization/homogenization relation degenerates")]
    ZeroFraction,

    #[error("invalid domain problem: {0}")]
    InvalidProblem(String),

    #[error("inclusion not resolvable on the grid: {0}")]
    UnresolvedInclusion(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
