//! Encoders, decoding, encoding validity and cover enumeration.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::vocab::{Alphabet, Scheme, Sym, TokenId};

/// A deterministic encoder over a fixed token inventory.
///
/// Implementors supply the inventory and `encode_syms`; everything else
/// (decoding, validity, branch sets, covers) is derived from those.
pub trait Tokenizer {
    fn scheme(&self) -> Scheme;
    fn alphabet(&self) -> &Alphabet;
    /// Number of tokens; ids are `0..len()`.
    fn len(&self) -> usize;
    fn token_text(&self, id: TokenId) -> &str;
    fn token_syms(&self, id: TokenId) -> &[Sym];
    fn encode_syms(&self, syms: &[Sym]) -> Vec<TokenId>;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn first_token_syms(&self, syms: &[Sym]) -> Option<TokenId> {
        self.encode_syms(syms).first().copied()
    }

    fn ids(&self) -> core::iter::Map<core::ops::Range<u32>, fn(u32) -> TokenId> {
        (0..self.len() as u32).map(TokenId as fn(u32) -> TokenId)
    }

    fn contains_id(&self, id: TokenId) -> bool {
        id.index() < self.len()
    }

    /// First token carrying `text`.
    fn token_by_text(&self, text: &str) -> Option<TokenId> {
        self.ids().find(|&id| self.token_text(id) == text)
    }

    fn encode(&self, text: &str) -> Result<Encoding> {
        let syms = self.alphabet().to_syms(text)?;
        Ok(Encoding { ids: self.encode_syms(&syms), text: text.to_string() })
    }

    fn decode(&self, ids: &[TokenId]) -> Result<String> {
        let mut out = String::new();
        for &id in ids {
            if !self.contains_id(id) {
                return Err(Error::UnknownToken(id.to_string()));
            }
            out.push_str(self.token_text(id));
        }
        Ok(out)
    }

    /// Concatenated symbols of `ids`. Panics on ids outside the vocabulary.
    fn decode_syms(&self, ids: &[TokenId]) -> Vec<Sym> {
        let mut out = Vec::new();
        for &id in ids {
            out.extend_from_slice(self.token_syms(id));
        }
        out
    }

    /// `true` iff re-encoding the decoded string reproduces `ids`.
    fn is_valid(&self, ids: &[TokenId]) -> bool {
        if ids.iter().any(|&id| !self.contains_id(id)) {
            return false;
        }
        self.encode_syms(&self.decode_syms(ids)) == ids
    }

    /// Validity of `context` followed by `next`.
    fn is_valid_extension(&self, context: &[TokenId], next: TokenId) -> bool {
        if !self.contains_id(next) || context.iter().any(|&id| !self.contains_id(id)) {
            return false;
        }
        let mut syms = self.decode_syms(context);
        syms.extend_from_slice(self.token_syms(next));
        let enc = self.encode_syms(&syms);
        enc.len() == context.len() + 1 && enc[..context.len()] == *context && enc[context.len()] == next
    }

    fn first_token(&self, text: &str) -> Result<Option<TokenId>> {
        let syms = self.alphabet().to_syms(text)?;
        Ok(self.first_token_syms(&syms))
    }

    /// Tokens whose text has `syms` as a prefix (the branch set).
    fn extending_tokens(&self, syms: &[Sym]) -> Vec<TokenId> {
        self.ids().filter(|&id| self.token_syms(id).starts_with(syms)).collect()
    }

    /// Parse token texts into ids, e.g. from a CLI `A,A` list.
    fn ids_from_texts<S: AsRef<str>>(&self, texts: &[S]) -> Result<Vec<TokenId>>
    where
        Self: Sized,
    {
        texts
            .iter()
            .map(|t| {
                let t = t.as_ref();
                self.token_by_text(t).ok_or_else(|| Error::UnknownToken(t.to_string()))
            })
            .collect()
    }

    fn texts_of(&self, ids: &[TokenId]) -> Vec<String> {
        ids.iter().map(|&id| self.token_text(id).to_string()).collect()
    }
}

/// A token-id sequence together with the string it decodes to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Encoding {
    ids: Vec<TokenId>,
    text: String,
}

impl Encoding {
    pub fn from_ids<T: Tokenizer + ?Sized>(vocab: &T, ids: Vec<TokenId>) -> Result<Self> {
        let text = vocab.decode(&ids)?;
        Ok(Self { ids, text })
    }

    pub fn ids(&self) -> &[TokenId] {
        &self.ids
    }

    pub fn into_ids(self) -> Vec<TokenId> {
        self.ids
    }

    /// Decoded string.
    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// A valid encoding that extends `covered` and whose last token starts inside it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverEncoding {
    pub encoding: Encoding,
    pub covered: String,
    /// Character offset in `covered` where the last token begins.
    pub last_start: usize,
}

/// All cover encodings of `text`, ordered by decreasing last-token start.
///
/// For each start position `i` the prior tokens are forced to be
/// `encode(text[..i])`; candidate last tokens are the branch set of
/// `text[i..]`, kept only when the full candidate is valid.
pub fn enumerate_covers<T: Tokenizer + ?Sized>(vocab: &T, text: &str) -> Result<Vec<CoverEncoding>> {
    if text.is_empty() {
        return Err(Error::InvalidArgument("cannot enumerate covers of the empty string".to_string()));
    }
    let syms = vocab.alphabet().to_syms(text)?;
    let mut out = Vec::new();
    for i in (0..syms.len()).rev() {
        let prior = vocab.encode_syms(&syms[..i]);
        for t in vocab.extending_tokens(&syms[i..]) {
            if vocab.is_valid_extension(&prior, t) {
                let mut ids = prior.clone();
                ids.push(t);
                out.push(CoverEncoding {
                    encoding: Encoding::from_ids(vocab, ids)?,
                    covered: text.to_string(),
                    last_start: i,
                });
            }
        }
    }
    Ok(out)
}
