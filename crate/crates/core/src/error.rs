use thiserror::Error;

use crate::torus::Dimensions;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid dimensions d={d}, n={n}: need d >= 2 and n >= 2")]
    InvalidDimensions { d: usize, n: u32 },

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: Dimensions, right: Dimensions },

    #[error("vertex has {got} coordinates, expected {expected}")]
    WrongArity { expected: usize, got: usize },

    #[error("coordinate {index} = {value} out of range [0, {n})")]
    CoordinateOutOfRange { index: usize, value: u32, n: u32 },

    #[error("{what}: needs {needed}, budget is {budget}")]
    BudgetExceeded {
        what: &'static str,
        needed: u128,
        budget: u128,
    },

    #[error("generated family truncated at {cap} members; exact counting unavailable")]
    Truncated { cap: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    /// True for errors caused by exceeding a computation budget rather than bad input.
    pub fn is_budget(&self) -> bool {
        matches!(self, Error::BudgetExceeded { .. } | Error::Truncated { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
