use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("infeasible target measure {measure}: largest admissible ball has measure {max}")]
    Infeasible { measure: f64, max: f64 },

    /// The requested orbit index lies beyond the certified horizon.
    #[error("insufficient precision: need index {needed} but the certified horizon is {horizon}")]
    InsufficientPrecision { needed: u64, horizon: u64 },

    #[error("precision budget of {bits} bits is below the {needed} bits needed")]
    PrecisionBudget { bits: u64, needed: u64 },

    #[error("degenerate seed: {0}")]
    DegenerateSeed(String),

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("work budget exceeded: {0}")]
    Budget(String),

    #[error("collar too wide at m = {m}: rho = {rho} is not below r = {r}")]
    CollarTooWide { m: u64, rho: f64, r: f64 },

    #[error("membership indeterminate at m = {0}")]
    Indeterminate(u64),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
