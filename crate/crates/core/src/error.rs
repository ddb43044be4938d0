use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("quadrature order {order} cannot integrate h_{degree}^2 exactly (need at least {required})")]
    QuadratureOrderTooLow {
        order: usize,
        degree: usize,
        required: usize,
    },

    #[error("requested degree {requested} exceeds expansion degree {available}")]
    DegreeOutOfRange { requested: usize, available: usize },

    #[error("invalid activation: {0}")]
    InvalidActivation(String),

    #[error("tabulated grid [{lo}, {hi}] leaves Gaussian tail mass {tail_mass:e} uncovered")]
    TabulatedRangeTooNarrow { lo: f64, hi: f64, tail_mass: f64 },

    #[error("need at least {required} nonzero coefficients for the decay fit, found {found}")]
    TooFewCoefficients { required: usize, found: usize },

    #[error("dimension {dim} exceeds cap {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("feature basis mismatch: ({n1}, {d1}) vs ({n2}, {d2})")]
    BasisMismatch {
        n1: usize,
        d1: usize,
        n2: usize,
        d2: usize,
    },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("matrix is not positive semidefinite (eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("point {index} is not on the unit sphere (norm {norm})")]
    NotUnit { index: usize, norm: f64 },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("factorization failed after jitter escalation up to {jitter:e}")]
    JitterExhausted { jitter: f64 },

    #[error("sample size {size} exceeds exact assignment cap {cap}; use the sinkhorn estimator")]
    AssignmentCap { size: usize, cap: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}
