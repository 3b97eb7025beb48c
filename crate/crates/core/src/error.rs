use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("variable count mismatch: {left} vs {right}")]
    ArityMismatch { left: usize, right: usize },

    #[error("cannot draw {requested} distinct monomials, only {available} exist")]
    InfeasibleTermCount { requested: u128, available: u128 },

    #[error("exponent {exponent} of variable {var} is not below its bound {bound}")]
    ExponentOutOfBounds {
        var: usize,
        exponent: u64,
        bound: u64,
    },

    #[error("no prime found in [{lo}, {hi}] after {tries} draws")]
    NoPrimeFound {
        lo: String,
        hi: String,
        tries: usize,
    },

    #[error("cyclic length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("coefficient domain mismatch")]
    DomainMismatch,

    #[error("slot {slot} out of range for length {len}")]
    SlotOutOfRange { slot: usize, len: usize },

    #[error("weight for variable {var} is not invertible")]
    NonInvertibleWeight { var: usize },

    #[error("could not sample pairwise non-collinear vectors for n={n}, r={r}")]
    DegenerateLambda { n: usize, r: u64 },

    #[error("precondition violated: {0}")]
    Precondition(String),
}

pub type Result<T> = std::result::Result<T, Error>;
