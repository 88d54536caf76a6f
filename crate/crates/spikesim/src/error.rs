//! Crate-wide error type and result alias.

use thiserror::Error;

/// Convenience alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A model or solver parameter is outside its admissible range.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// The state left the representable range without reaching the cutoff.
    #[error("state diverged at t = {t}: {what}")]
    Diverged { t: f64, what: &'static str },

    /// The phase-plane parametrization is unusable at this state.
    #[error("phase step at v = {v}: |dv/dt| = {gradient:e} is below the invertibility floor")]
    NotInvertible { v: f64, gradient: f64 },

    /// Step size collapsed below the floor or the step budget ran out.
    #[error("solver stagnated at t = {t}: {detail}")]
    Stagnation { t: f64, detail: String },

    /// The reference solver could not meet the requested tolerance.
    #[error("reference solver failed at t = {t}: {detail}")]
    OracleFailure { t: f64, detail: String },

    /// A closed-form expression was evaluated outside its domain.
    #[error("analysis domain error: {0}")]
    AnalysisDomain(String),

    /// A requested measurement is undefined for the produced data.
    #[error("measurement error: {0}")]
    Measurement(String),

    /// An experiment configuration could not be parsed.
    #[error("config parse error at line {line}: {reason}")]
    ConfigParse { line: usize, reason: String },

    /// An experiment configuration parsed but is not usable.
    #[error("config error: {0}")]
    ConfigInvalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Exit code the CLI maps this error to: 1 for input validation
    /// problems, 2 for runtime solver failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter { .. }
            | Error::AnalysisDomain(_)
            | Error::ConfigParse { .. }
            | Error::ConfigInvalid(_)
            | Error::Io(_) => 1,
            Error::Diverged { .. }
            | Error::NotInvertible { .. }
            | Error::Stagnation { .. }
            | Error::OracleFailure { .. }
            | Error::Measurement(_) => 2,
        }
    }
}
