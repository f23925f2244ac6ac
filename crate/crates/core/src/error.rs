use alloc::string::String;

use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("alphabet must not be empty")]
    EmptyAlphabet,
    #[error("alphabet symbol {0:?} is listed twice")]
    DuplicateSymbol(char),
    #[error("symbol {symbol:?} at position {position} is not in the alphabet")]
    SymbolOutsideAlphabet { symbol: char, position: usize },
    #[error("token texts must be nonempty")]
    EmptyToken,
    #[error("token {0:?} is listed twice")]
    DuplicateToken(String),
    #[error("merge {index} references unknown token {text:?}")]
    UnknownMergeOperand { index: usize, text: String },
    #[error("unknown token {0}")]
    UnknownToken(String),
    #[error("invalid chain: {0}")]
    InvalidChain(String),
    #[error("context of length {len} is shorter than the model order {order}")]
    ContextTooShort { len: usize, order: usize },
    #[error("undefined conditional: {0}")]
    UndefinedConditional(String),
    #[error("context was never observed during fitting")]
    UnseenContext,
    #[error("every continuation with positive mass is forbidden")]
    DegenerateDistribution,
    #[error("divergence is infinite: p has mass where q has none (index {0})")]
    InfiniteDivergence(usize),
    #[error("distributions have different support sizes ({0} vs {1})")]
    SupportMismatch(usize, usize),
    #[error("enumeration of {size} strings exceeds the cap of {cap}")]
    EnumerationTooLarge { size: u128, cap: u128 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Stable machine-readable classification used by the CLI `ERR:<kind>:` prefix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    InvalidVocab,
    InvalidSymbol,
    UnknownToken,
    InvalidChain,
    UndefinedConditional,
    UnseenContext,
    DegenerateDistribution,
    InfiniteDivergence,
    EnumerationTooLarge,
    InvalidArgument,
}

impl ErrorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorKind::InvalidVocab => "invalid-vocab",
            ErrorKind::InvalidSymbol => "invalid-symbol",
            ErrorKind::UnknownToken => "unknown-token",
            ErrorKind::InvalidChain => "invalid-chain",
            ErrorKind::UndefinedConditional => "undefined-conditional",
            ErrorKind::UnseenContext => "unseen-context",
            ErrorKind::DegenerateDistribution => "degenerate-distribution",
            ErrorKind::InfiniteDivergence => "infinite-divergence",
            ErrorKind::EnumerationTooLarge => "enumeration-too-large",
            ErrorKind::InvalidArgument => "invalid-argument",
        }
    }
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::EmptyAlphabet
            | Error::DuplicateSymbol(_)
            | Error::EmptyToken
            | Error::DuplicateToken(_)
            | Error::UnknownMergeOperand { .. } => ErrorKind::InvalidVocab,
            Error::SymbolOutsideAlphabet { .. } => ErrorKind::InvalidSymbol,
            Error::UnknownToken(_) => ErrorKind::UnknownToken,
            Error::InvalidChain(_) | Error::ContextTooShort { .. } => ErrorKind::InvalidChain,
            Error::UndefinedConditional(_) => ErrorKind::UndefinedConditional,
            Error::UnseenContext => ErrorKind::UnseenContext,
            Error::DegenerateDistribution => ErrorKind::DegenerateDistribution,
            Error::InfiniteDivergence(_) => ErrorKind::InfiniteDivergence,
            Error::EnumerationTooLarge { .. } => ErrorKind::EnumerationTooLarge,
            Error::SupportMismatch(..) | Error::InvalidArgument(_) => ErrorKind::InvalidArgument,
        }
    }
}
