use thiserror::Error;

/// Failures reported by the solvers and experiment drivers.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid input: out-of-range parameters, mismatched sizes, configurations
    /// outside a sector.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:.3e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("propagator cannot reach tolerance {tol:.1e}: {reason}")]
    Accuracy { tol: f64, reason: String },

    #[error("dimension {dim} exceeds the dense cap {cap}; raise the cap to proceed")]
    Capacity { dim: usize, cap: usize },

    #[error("degenerate ground state (gap {gap:.3e}); experiment needs a unique initial state")]
    DegenerateGround { gap: f64 },

    #[error("{failed} of {total} tasks failed (limit 5%); first failure: {first}")]
    TooManyFailures {
        failed: usize,
        total: usize,
        first: String,
    },

    #[error("at t = {t}: {source}")]
    AtTime {
        t: f64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
