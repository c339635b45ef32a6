use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("solver did not converge after {iters} iterations (residual {residual:.3e})")]
    NonConvergence {
        iters: usize,
        residual: f64,
        /// (iteration, max residual) samples taken during the solve.
        history: Vec<(usize, f64)>,
    },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("time step {dt:.3e} violates the stability bound {bound:.3e}")]
    Cfl { dt: f64, bound: f64 },

    #[error("table does not cover the request: {0}")]
    ExtendTable(String),

    #[error("monotonicity violated: {0}")]
    NonMonotone(String),

    #[error("degenerate fit: {0}")]
    DegenerateFit(String),

    #[error("construction error: {0}")]
    Construction(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
