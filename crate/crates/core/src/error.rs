use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("number of oscillator modes must be at least one")]
    ZeroModes,
    #[error("number of system variables must be even, got {0}")]
    OddDimension(usize),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix `{name}` is not symmetric (max asymmetry {asymmetry:e})")]
    Asymmetric { name: &'static str, asymmetry: f64 },
    #[error("matrix `{0}` has non-finite entries")]
    NonFinite(&'static str),
    #[error("plant does not admit a direct-coupling observer: {0}")]
    ConditionsFailed(String),
    #[error("plant has no estimable variables (uncontrollable subspace is empty)")]
    NothingEstimable,
    #[error("observer Hamiltonian matrix is not positive definite (min eigenvalue {0:e})")]
    NotPositiveDefinite(f64),
    #[error("observer output identity -C_o R_o^-1 beta = I violated (residual {0:e})")]
    OutputIdentity(f64),
    #[error("coupling matrix beta must have full column rank {expected}, got {actual}")]
    BetaRank { expected: usize, actual: usize },
    #[error("invalid time grid: {0}")]
    Grid(String),
    #[error("integration step too large: commutation residual {0:e} at t = {1}")]
    StepTooLarge(f64, f64),
    #[error("record must cover at least T = {required}, got {actual}")]
    HorizonTooShort { required: f64, actual: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
