use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A caller broke a shape or precondition contract.
    #[error("contract violation: {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    /// A value left the domain where the computation is defined (NaN, Inf, h <= 0, ...).
    #[error("numerical domain error: {0}")]
    NumericalDomain(String),

    #[error("simulation blew up at step {step}: {detail}")]
    BlowUp { step: usize, detail: String },

    #[error("svd did not converge after {sweeps} sweeps (off-diagonal residual {residual:e})")]
    Convergence { sweeps: usize, residual: f64 },

    #[error("estimator `{estimator}` unsupported here: {reason}")]
    UnsupportedEstimator {
        estimator: &'static str,
        reason: String,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("{source} (at step {step})")]
    AtStep { step: usize, source: Box<Error> },

    #[error("optimization failed: all {evaluations} evaluations blew up")]
    OptimizationFailed {
        evaluations: usize,
        history: Vec<crate::opt::HistoryRow>,
    },
}

impl Error {
    pub(crate) fn at_step(self, step: usize) -> Self {
        match self {
            e @ (Error::BlowUp { .. } | Error::AtStep { .. }) => e,
            e => Error::AtStep {
                step,
                source: Box::new(e),
            },
        }
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::NumericalDomain(msg.into())
    }
}
