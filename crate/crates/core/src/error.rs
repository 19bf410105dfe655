use thiserror::Error;

/// Errors raised by the laboratory.
///
/// Variants fall into three classes (see [`ErrorKind`]): bad input, an
/// exceeded resource budget, and a proof trace that has nothing to work with.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{0} is not prime")]
    NotPrime(u64),

    #[error("{value} is outside the supported range [{min}, {max})")]
    OutOfRange { value: u64, min: u64, max: u64 },

    #[error("subgroup order {order} does not divide p-1 = {p_minus_one}")]
    OrderNotDivisor { order: u64, p_minus_one: u64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("p = {p} exceeds the dense table limit {limit}")]
    DenseLimit { p: u64, limit: u64 },

    #[error("resource budget exceeded: {0}")]
    Budget(String),

    #[error("empty trace: {0}")]
    EmptyTrace(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Input,
    Resource,
    EmptyTrace,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::NotPrime(_)
            | Error::OutOfRange { .. }
            | Error::OrderNotDivisor { .. }
            | Error::InvalidInput(_) => ErrorKind::Input,
            Error::DenseLimit { .. } | Error::Budget(_) => ErrorKind::Resource,
            Error::EmptyTrace(_) => ErrorKind::EmptyTrace,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
