//! Subword tokenization, token-induced sampling bias, and its exact correction.
//!
//! The crate works over abstract finite alphabets and exact character
//! sources. It provides:
//!
//! * maximum-prefix (WordPiece-style) and byte-pair encoders with encoding
//!   validity and cover enumeration ([`vocab`], [`tokenize`]);
//! * exact k-th order Markov character sources ([`charlm`]);
//! * token-level language models: the exact conversion of a character source,
//!   a count-based estimator and truncate-renormalization ([`toklm`]);
//! * the maximum-prefix and byte-pair correction algorithms together with the
//!   biased one-branch baseline ([`correct`]);
//! * a brute-force enumeration oracle used for verification ([`oracle`]);
//! * reproducible experiment drivers producing result rows ([`experiments`]).
//!
//! Everything here is `no_std` + `alloc`; file formats, parallel fitting and
//! the command line live in the companion `tokenwise` crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod charlm;
pub mod correct;
mod error;
pub mod experiments;
pub mod oracle;
pub mod seed;
pub mod tokenize;
pub mod toklm;
pub mod vocab;

pub use charlm::MarkovCharModel;
pub use correct::{CorrectionQuery, RefactorSplit};
pub use error::{Error, ErrorKind, Result};
pub use tokenize::{CoverEncoding, Encoding, Tokenizer};
pub use toklm::{CountTokenLm, ExactTokenLm, TokenDistribution, TokenLm};
pub use vocab::{Alphabet, BpeVocabulary, MpeVocabulary, Scheme, Sym, TokenId, VStarSet, Vocabulary};
