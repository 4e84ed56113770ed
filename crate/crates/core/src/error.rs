use thiserror::Error;

/// Errors raised by the analysis and simulation routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter lies outside its admissible range.
    #[error("{name} = {value} is out of range: {expected}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    /// A box or table does not have the shape an operation requires.
    #[error("structural error: {0}")]
    Structure(String),

    /// A combinatorial or problem-size guard was tripped.
    #[error("size limit exceeded: {0}")]
    Limit(String),

    /// The linear-programming backend failed or returned an inconsistent answer.
    #[error("LP solver error: {0}")]
    Solver(String),

    /// A root-finding bracket did not change sign.
    #[error("no sign change on [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64 },

    /// Not enough samples for a statistical estimate.
    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_range(name: &'static str, value: f64, lo: f64, hi: f64, expected: &'static str) -> Result<()> {
    if value.is_finite() && value >= lo && value <= hi {
        Ok(())
    } else {
        Err(Error::OutOfRange { name, value, expected })
    }
}
