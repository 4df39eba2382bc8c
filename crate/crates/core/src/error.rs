use thiserror::Error;

/// Errors shared by all modules of the crate.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("matrix is not square: {0}x{1}")]
    NotSquare(usize, usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not Hermitian (max asymmetry {0:.3e})")]
    NotHermitian(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("measurement design is rank deficient (rank {0}, need {1})")]
    RankDeficient(usize, usize),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error(
        "eigensolver did not converge after {sweeps} sweeps (off-diagonal norm {offdiag:.3e})"
    )]
    EigNoConvergence { sweeps: usize, offdiag: f64 },

    #[error(
        "barrier solver stalled at t={t:.3e}, inner iteration {iter}: \
         gradient norm {grad_norm:.3e}, merit {merit:.6e}"
    )]
    SolverStall {
        t: f64,
        iter: usize,
        grad_norm: f64,
        merit: f64,
    },

    #[error("i/o error: {0}")]
    Io(String),

    #[error("malformed input: {0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
