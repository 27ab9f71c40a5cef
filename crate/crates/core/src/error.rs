use thiserror::Error;

#[derive(Debug, Error)]
pub enum CapError {
    #[error("contact angle {0} is outside the open interval (0, pi)")]
    InvalidAngle(f64),

    #[error("grid {n_rho}x{n_phi} is too coarse: need n_rho >= 8 and an even n_phi >= 8")]
    GridTooCoarse { n_rho: usize, n_phi: usize },

    #[error("field has {got} values but the grid has {expected} nodes")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("field contains a non-finite value at node {0}")]
    NonFinite(usize),

    #[error("fields or bodies live on different grids")]
    GridMismatch,

    #[error("direction {0:?} is not a unit horizontal vector")]
    NonHorizontal([f64; 3]),

    #[error(
        "Neumann condition violated: scaled boundary derivative {max:e} exceeds {tolerance:e}"
    )]
    NeumannViolation { max: f64, tolerance: f64 },

    #[error("Robin condition violated: scaled residual {max:e} exceeds {tolerance:e}")]
    RobinViolation { max: f64, tolerance: f64 },

    #[error("body generation failed after {0} amplitude halvings")]
    GenerationFailed(usize),

    #[error("Minkowski combination needs at least one positive weight")]
    AllZeroLambdas,

    #[error("Minkowski weight {0} is negative")]
    NegativeLambda(f64),

    #[error("{bodies} bodies but {lambdas} weights")]
    LengthMismatch { bodies: usize, lambdas: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix {index} is not symmetric (deviation {deviation:e})")]
    Asymmetric { index: usize, deviation: f64 },

    #[error("index {index} outside 0..={max}")]
    IndexOutOfRange { index: usize, max: usize },

    #[error("need at least {needed} distinct positive t samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("degenerate weight: smallest eigenvalue of A[f2] is {0:e}")]
    DegenerateWeight(f64),

    #[error("ill-conditioned projection basis (normalized Gram eigenvalue {0:e})")]
    IllConditioned(f64),

    #[error("eigensolver failed: {0}")]
    SolverFailure(String),

    #[error("triangulation has {0} degenerate triangles")]
    DegenerateTriangles(usize),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("malformed OBJ file: {0}")]
    Obj(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CapError>;
