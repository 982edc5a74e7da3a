use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error in {func}: argument {value} is out of range")]
    Domain { func: &'static str, value: f64 },

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("bisection bracket [{lo}, {hi}] does not straddle a root (g(lo)={glo}, g(hi)={ghi})")]
    Bracket { lo: f64, hi: f64, glo: f64, ghi: f64 },

    #[error("{what} did not converge within {cap} iterations")]
    IterationCap { what: &'static str, cap: usize },

    #[error("config error: {field}: {message}")]
    Config { field: String, message: String },

    #[error("backhaul infeasible in cell {cell}: outage {outage:.4} > budget {budget} even with the RRH on the CU")]
    Infeasible { cell: usize, outage: f64, budget: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn non_finite(context: impl Into<String>) -> Self {
        Error::NonFinite {
            context: context.into(),
        }
    }
}
