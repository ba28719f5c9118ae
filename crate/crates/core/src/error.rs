//! Crate-wide error type.

use std::fmt;

/// Violations found by `linalg::btt_validate` and `linalg::periodic_validate`,
/// reported one condition at a time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StructureDefect {
    /// Matrix dimensions are not (k*a) x (k*b).
    BadShape { rows: usize, cols: usize, k: usize, a: usize, b: usize },
    /// Block (i, j) above the diagonal is nonzero (1-based block indices).
    NotLowerTriangular { i: usize, j: usize },
    /// Blocks (i, j) and (i-1, j-1) on the same diagonal differ.
    NotToeplitz { i: usize, j: usize },
    /// Diagonal blocks differ between column-blocks j and 1.
    DiagonalMismatch { j: usize },
    /// Leading diagonal block has rank `rank`, expected min(a, b) = `need`.
    LeadingBlockRankDeficient { rank: usize, need: usize },
}

impl fmt::Display for StructureDefect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StructureDefect::BadShape { rows, cols, k, a, b } => write!(
                f,
                "matrix is {rows}x{cols}, expected {}x{} for k={k}, block size {a}x{b}",
                k * a,
                k * b
            ),
            StructureDefect::NotLowerTriangular { i, j } => {
                write!(f, "block ({i},{j}) above the diagonal is nonzero")
            }
            StructureDefect::NotToeplitz { i, j } => {
                write!(f, "block ({i},{j}) differs from block ({},{})", i - 1, j - 1)
            }
            StructureDefect::DiagonalMismatch { j } => {
                write!(f, "diagonal block of column-block {j} differs from column-block 1")
            }
            StructureDefect::LeadingBlockRankDeficient { rank, need } => {
                write!(f, "leading diagonal block has rank {rank}, need {need}")
            }
        }
    }
}

#[derive(Debug)]
pub enum Error {
    /// `p` is not prime.
    NotPrime(u64),
    /// A parameter failed a stated precondition; the message names it.
    InvalidParameter(String),
    /// Operands live over different fields or have incompatible shapes.
    Incompatible(String),
    /// A matrix failed block-triangular-Toeplitz or periodic validation.
    Structure(StructureDefect),
    /// An exhaustive enumeration would exceed the configured cap.
    CapExceeded { needed: u128, cap: u128 },
    /// Randomized search ran out of candidates; carries the best intersection
    /// dimension seen and the bound that was required.
    BudgetExhausted { budget: u64, best: usize, target: usize },
    /// A construction stage cannot be instantiated at the given parameters.
    Infeasible { stage: &'static str, detail: String },
    /// Composition chain mismatch (inner ambient vs outer block length, kinds).
    ChainMismatch(String),
    /// Text parse failure for one of the on-disk formats.
    Parse(String),
    Io(std::io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::NotPrime(p) => write!(f, "{p} is not prime"),
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::Incompatible(msg) => write!(f, "incompatible operands: {msg}"),
            Error::Structure(d) => write!(f, "structure violation: {d}"),
            Error::CapExceeded { needed, cap } => {
                write!(f, "enumeration needs {needed} items, cap is {cap}")
            }
            Error::BudgetExhausted { budget, best, target } => write!(
                f,
                "search budget of {budget} candidates exhausted; best max intersection {best} > target {target}"
            ),
            Error::Infeasible { stage, detail } => {
                write!(f, "infeasible at stage `{stage}`: {detail}")
            }
            Error::ChainMismatch(msg) => write!(f, "composition chain mismatch: {msg}"),
            Error::Parse(msg) => write!(f, "parse error: {msg}"),
            Error::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}

pub type Result<T> = std::result::Result<T, Error>;
