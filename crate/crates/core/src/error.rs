use alloc::string::String;
use core::fmt;

/// Errors raised by the core library.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A vector or matrix did not have the expected length.
    DimensionMismatch { expected: usize, found: usize },
    /// Variable index outside `0..n_vars`.
    VariableOutOfRange { index: usize, n_vars: usize },
    /// The standing hypothesis `n > p > 0` does not hold.
    InvalidDimensions { n: usize, p: usize },
    /// A matrix with more rows than columns was passed where `p <= n` is required.
    TooManyRows { rows: usize, cols: usize },
    /// Chart evaluation at `y0 = 0`, i.e. on the hyperplane at infinity itself.
    OnHyperplaneAtInfinity,
    /// Zero vector where a direction or a point away from the origin is required.
    ZeroVector,
    /// Curve template that does not escape to infinity.
    NonEscapingTemplate,
    /// The map is constant, so level sets are degenerate.
    ConstantMap,
    /// Invalid configuration value.
    Config(String),
}

pub type Result<T> = core::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::VariableOutOfRange { index, n_vars } => {
                write!(f, "variable index {index} out of range for {n_vars} variables")
            }
            Error::InvalidDimensions { n, p } => {
                write!(f, "need n > p > 0, got n = {n}, p = {p}")
            }
            Error::TooManyRows { rows, cols } => {
                write!(f, "matrix has {rows} rows but only {cols} columns")
            }
            Error::OnHyperplaneAtInfinity => f.write_str("chart coordinate y0 must be nonzero"),
            Error::ZeroVector => f.write_str("zero vector where a nonzero one is required"),
            Error::NonEscapingTemplate => {
                f.write_str("curve template has no positive exponent with nonzero coefficient")
            }
            Error::ConstantMap => f.write_str("map is constant"),
            Error::Config(msg) => write!(f, "invalid configuration: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
