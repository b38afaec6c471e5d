use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Domain(String),

    #[error("{what}: no convergence within {budget} terms")]
    Convergence { what: &'static str, budget: usize },

    #[error("{what}: cancellation ({detail}); try {suggest}")]
    Cancellation {
        what: &'static str,
        detail: String,
        suggest: &'static str,
    },

    #[error("linear system ill-conditioned (condition estimate {cond:.3e}); use a smaller alpha*n")]
    Conditioning { cond: f64 },

    #[error("{what}: budget exceeded ({detail})")]
    Budget { what: &'static str, detail: String },

    #[error("moment table too small: need order {order} at {prec} bits")]
    TableTooSmall { order: usize, prec: u32 },

    #[error("negative density {value:.3e} at t = {t}")]
    NegativeDensity { t: f64, value: f64 },

    #[error("quadrature did not reach tolerance (estimate {estimate:.3e})")]
    Quadrature { estimate: f64 },
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// Invalid input, as opposed to a numerical failure.
    pub fn is_invalid_input(&self) -> bool {
        matches!(self, Error::Domain(_))
    }
}
