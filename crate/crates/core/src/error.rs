use thiserror::Error;

/// Errors raised by the IRL, masking and detector routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The LP/MILP backend gave up. Distinct from an infeasible verdict.
    #[error("solver failure: {0}")]
    Solver(String),

    #[error("certificate is infeasible; nothing to reconstruct")]
    InfeasibleCertificate,

    #[error("constraint gradient vanishes at t = {t}")]
    ZeroGradient { t: usize },

    #[error("no nonnegative multipliers reproduce stationarity at t = {t} (relative residual {residual:.3e})")]
    Kkt { t: usize, residual: f64 },

    #[error("active-set enumeration needs {patterns} patterns (limit {limit})")]
    EnumerationOverflow { patterns: f64, limit: f64 },

    #[error("naive response did not converge at t = {t}")]
    NaiveSolve { t: usize, best: Vec<f64> },

    /// No restart produced a response sequence meeting the margin cap.
    #[error("masking failed: best margin {best_margin:.3e} exceeds cap {cap:.3e}")]
    Masking {
        cap: f64,
        best_margin: f64,
        best: Vec<Vec<f64>>,
    },

    #[error("Riccati iteration stalled with residual {residual:.3e}")]
    Riccati { residual: f64 },

    #[error("system is not detectable/stabilizable: {0}")]
    Existence(String),

    #[error("asymptotic predicted covariance diverges (spectral radius {radius:.4} >= 1); use a finite horizon")]
    Unstable { radius: f64 },

    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
