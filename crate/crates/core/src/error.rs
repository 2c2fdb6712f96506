use thiserror::Error;

use crate::complex::Degree;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch at degree {degree}: {detail}")]
    ShapeMismatch { degree: Degree, detail: String },

    #[error("Gram matrix of degree {degree} is not SPD (smallest eigenvalue {eigenvalue:e})")]
    NonSpdGram { degree: Degree, eigenvalue: f64 },

    #[error("degree {degree} outside the admissible range {min}..={max}")]
    DegreeOutOfRange { degree: Degree, min: Degree, max: Degree },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("Z^{degree} has a trivial orthogonal complement; the Poincare inequality is vacuous")]
    EmptyPerpSpace { degree: Degree },

    #[error("factorization failed (condition estimate {condition_estimate:e})")]
    Factorization { condition_estimate: f64 },

    #[error("{what} did not converge after {iterations} iterations (best estimate {estimate:e})")]
    NoConvergence {
        what: &'static str,
        estimate: f64,
        iterations: usize,
    },

    #[error("pointwise scalar nonlinearities are only defined for 0-forms, got degree {degree}")]
    UnsupportedDegree { degree: Degree },

    #[error("Hammerstein iteration failed: {reason} (residual {residual:e} after {iterations} iterations)")]
    Hammerstein {
        reason: &'static str,
        residual: f64,
        iterations: usize,
        state: Box<crate::semilinear::HammersteinState>,
    },

    #[error("strong monotonicity of I + KF violated by {violation:e}; the nonlinearity is not monotone")]
    NonMonotone { violation: f64 },

    #[error("injection is rank deficient")]
    RankDeficient,

    #[error("crime perturbation breaks positivity at degree {degree} (eigenvalue {eigenvalue:e})")]
    CrimeNotSpd { degree: Degree, eigenvalue: f64 },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("unsupported mesh dimension {0} (only 1 and 2 are implemented)")]
    UnsupportedDimension(usize),

    #[error("unknown manufactured problem `{0}`")]
    UnknownCase(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
