use thiserror::Error;

/// Errors raised by the numerical core and the input layer.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not Hermitian (relative residual {residual:.3e})")]
    NotHermitian { residual: f64 },

    #[error("Jacobi eigensolver did not converge after {sweeps} sweeps (off-diagonal mass {off:.3e})")]
    NoConvergence { sweeps: usize, off: f64 },

    #[error("matrix has eigenvalue {value:.3e} below the negative tolerance")]
    NegativeEigenvalue { value: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite entry in {0}")]
    NonFinite(String),

    #[error("invalid algebra: {0}")]
    InvalidAlgebra(String),

    #[error("invalid *-homomorphism: {0}")]
    InvalidHom(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("map is not completely positive: Choi block ({target},{source_block}) has eigenvalue {min_eigenvalue:.3e}")]
    NotCp {
        target: usize,
        source_block: usize,
        min_eigenvalue: f64,
    },

    #[error("map is not unital (residual {residual:.3e})")]
    NotUnital { residual: f64 },

    #[error("internal inconsistency: {0}")]
    InternalInconsistency(String),

    #[error("off-support extension failed verification (residual {residual:.3e})")]
    ExtensionFailure { residual: f64 },

    #[error("invalid factorization certificate: {0}")]
    InvalidCertificate(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("schema error: {0}")]
    Schema(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors that stem from malformed or inconsistent user input.
    pub fn is_input_error(&self) -> bool {
        !matches!(
            self,
            Error::InternalInconsistency(_) | Error::NoConvergence { .. } | Error::ExtensionFailure { .. }
        )
    }
}
