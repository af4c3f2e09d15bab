use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("division by zero in GF({q})")]
    DivisionByZero { q: u32 },

    #[error("operands belong to different fields (GF({left}) vs GF({right}))")]
    FieldMismatch { left: u32, right: u32 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("{0} is not a prime power")]
    NotPrimePower(u64),

    #[error("unsupported field size {q}: {reason}")]
    UnsupportedField { q: u64, reason: String },

    #[error("modulus {0:?} is not a monic irreducible polynomial of the required degree")]
    ReducibleModulus(Vec<u32>),

    #[error("field element {index} out of range for GF({q})")]
    ElementOutOfRange { index: u64, q: u32 },

    #[error("{what} = {value} out of range: {expected}")]
    OutOfRange {
        what: &'static str,
        value: String,
        expected: String,
    },

    #[error("{what} requires {requested} entries, above the cap of {cap}")]
    CapExceeded {
        what: &'static str,
        requested: u128,
        cap: u128,
    },

    #[error("hypothesis violated: N^-gamma <= 3/4 does not hold (N^-gamma = {value})")]
    Hypothesis { value: f64 },

    #[error("kernel matrix is not invertible (rank {rank} < {m})")]
    NotInvertible { rank: usize, m: usize },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn out_of_range(what: &'static str, value: impl ToString, expected: impl ToString) -> Error {
    Error::OutOfRange {
        what,
        value: value.to_string(),
        expected: expected.to_string(),
    }
}
