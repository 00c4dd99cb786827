use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("not a Lie algebra: {0}")]
    NotLieAlgebra(String),

    #[error("not a homomorphism: bracket of basis pair ({i}, {j}) off by {residual:.3e}")]
    NotHomomorphism { i: usize, j: usize, residual: f64 },

    #[error("rank deficient: {0}")]
    RankDeficient(String),

    #[error("restricted Killing forms are not proportional on ideal {ideal}, block {block} (residual {residual:.3e})")]
    NonScalarKilling { ideal: usize, block: usize, residual: f64 },

    #[error("space is not aligned: {0}")]
    NotAligned(String),

    #[error("bi-invariant form does not vanish on k: {0}")]
    NotAdmissible(String),

    #[error("criterion not applicable: {0}")]
    AssumptionViolated(String),

    #[error("too large: {what} is {value}, limit {limit}")]
    TooLarge {
        what: &'static str,
        value: usize,
        limit: usize,
    },

    #[error("infeasible: {0}")]
    Infeasible(String),
}

pub type Result<T> = std::result::Result<T, Error>;
