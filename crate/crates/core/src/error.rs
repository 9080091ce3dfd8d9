use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{what} = {value} is outside the domain {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("skewness {gamma} is not attainable by a skew-normal distribution (|gamma| must be below {bound})")]
    InfeasibleSkewness { gamma: f64, bound: f64 },

    #[error("transport budget {epsilon:e} is infeasible: smallest attainable W2^2 is {min_w2sq:e}")]
    InfeasibleBudget { epsilon: f64, min_w2sq: f64 },

    #[error("weight {index} is zero; the W2 gradient needs strictly interior weights")]
    BoundaryGradient { index: usize },

    #[error("numerical failure in {context} after {iterations} iterations: {detail}")]
    Numerical {
        context: &'static str,
        iterations: usize,
        detail: String,
    },

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn numerical(context: &'static str, iterations: usize, detail: impl Into<String>) -> Self {
        Error::Numerical {
            context,
            iterations,
            detail: detail.into(),
        }
    }

    /// True for failures that come from the numerics rather than the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Numerical { .. } | Error::Fit(_) | Error::InfeasibleBudget { .. }
        )
    }

    /// Process exit status for the command-line driver: 3 when the numerics
    /// failed on valid input, 2 for bad configuration or input.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numerical { .. }
            | Error::Fit(_)
            | Error::InfeasibleBudget { .. }
            | Error::InfeasibleSkewness { .. }
            | Error::BoundaryGradient { .. } => 3,
            _ => 2,
        }
    }
}
