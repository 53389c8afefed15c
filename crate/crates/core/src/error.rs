use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("argument outside the domain: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("quadrature did not reach tolerance {tol:e}: best estimate {estimate} with error estimate {error:e}")]
    Convergence { estimate: f64, error: f64, tol: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("eigensolver failed after {iterations} iterations: {detail}")]
    Solver { iterations: usize, detail: String },

    #[error("shift lies within {distance:e} of the spectrum (nearest eigenvalue {nearest_re} + {nearest_im}i)")]
    SingularShift {
        distance: f64,
        nearest_re: f64,
        nearest_im: f64,
    },

    #[error("ambiguous eigenvalue matching near {target}: candidates {candidates:?}")]
    AmbiguousMatch {
        target: String,
        candidates: Vec<String>,
    },

    #[error("integrity check failed: {0}")]
    Integrity(String),

    #[error("malformed potential description: {0}")]
    Format(String),
}
