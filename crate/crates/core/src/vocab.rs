//! Token vocabularies for maximum-prefix and byte-pair encoding.
//!
//! Both vocabulary kinds assign dense [`TokenId`]s in listing order and always
//! contain every alphabet symbol as a one-character token. Strings are handled
//! internally as sequences of [`Sym`], the index of a character in the
//! [`Alphabet`].

use alloc::collections::BTreeMap;
use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};
use crate::tokenize::Tokenizer;

/// Index of a character within its [`Alphabet`].
pub type Sym = u16;

/// Dense token identifier; ids are assigned in vocabulary listing order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TokenId(pub u32);

impl TokenId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for TokenId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Which encoder a vocabulary drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scheme {
    Mpe,
    Bpe,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Mpe => "mpe",
            Scheme::Bpe => "bpe",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Ordered set of distinct single characters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet {
    symbols: Vec<char>,
}

impl Alphabet {
    pub fn new(symbols: impl IntoIterator<Item = char>) -> Result<Self> {
        let symbols: Vec<char> = symbols.into_iter().collect();
        if symbols.is_empty() {
            return Err(Error::EmptyAlphabet);
        }
        if symbols.len() > Sym::MAX as usize {
            return Err(Error::InvalidArgument("alphabet too large".to_string()));
        }
        let mut seen = BTreeSet::new();
        for &c in &symbols {
            if !seen.insert(c) {
                return Err(Error::DuplicateSymbol(c));
            }
        }
        Ok(Self { symbols })
    }

    /// Alphabet made of the characters of `s`, in order.
    pub fn from_chars(s: &str) -> Result<Self> {
        Self::new(s.chars())
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn symbols(&self) -> &[char] {
        &self.symbols
    }

    pub fn index_of(&self, c: char) -> Option<Sym> {
        self.symbols.iter().position(|&s| s == c).map(|i| i as Sym)
    }

    pub fn symbol(&self, sym: Sym) -> char {
        self.symbols[sym as usize]
    }

    /// Map a string to symbol indices, rejecting the first foreign character.
    pub fn to_syms(&self, text: &str) -> Result<Vec<Sym>> {
        text.chars()
            .enumerate()
            .map(|(position, symbol)| self.index_of(symbol).ok_or(Error::SymbolOutsideAlphabet { symbol, position }))
            .collect()
    }

    pub fn render(&self, syms: &[Sym]) -> String {
        syms.iter().map(|&s| self.symbol(s)).collect()
    }
}

const NO_CHILD: u32 = u32::MAX;

#[derive(Debug, Clone)]
struct TrieNode {
    children: Vec<u32>,
    token: Option<TokenId>,
}

/// Character trie over symbol indices answering longest-prefix queries.
#[derive(Debug, Clone)]
struct PrefixTrie {
    nodes: Vec<TrieNode>,
    width: usize,
}

impl PrefixTrie {
    fn new(width: usize) -> Self {
        Self { nodes: vec![TrieNode { children: vec![NO_CHILD; width], token: None }], width }
    }

    fn insert(&mut self, syms: &[Sym], id: TokenId) {
        let mut node = 0usize;
        for &s in syms {
            let next = self.nodes[node].children[s as usize];
            node = if next == NO_CHILD {
                let fresh = self.nodes.len() as u32;
                self.nodes.push(TrieNode { children: vec![NO_CHILD; self.width], token: None });
                self.nodes[node].children[s as usize] = fresh;
                fresh as usize
            } else {
                next as usize
            };
        }
        self.nodes[node].token = Some(id);
    }

    /// Longest token that is a prefix of `syms`, with its length.
    fn longest_prefix(&self, syms: &[Sym]) -> Option<(TokenId, usize)> {
        let mut node = 0usize;
        let mut best = None;
        for (depth, &s) in syms.iter().enumerate() {
            let next = self.nodes[node].children[s as usize];
            if next == NO_CHILD {
                break;
            }
            node = next as usize;
            if let Some(id) = self.nodes[node].token {
                best = Some((id, depth + 1));
            }
        }
        best
    }
}

/// Vocabulary for greedy longest-prefix (WordPiece-style) encoding.
#[derive(Debug, Clone)]
pub struct MpeVocabulary {
    alphabet: Alphabet,
    texts: Vec<String>,
    syms: Vec<Vec<Sym>>,
    trie: PrefixTrie,
}

impl MpeVocabulary {
    /// Build from token texts; missing alphabet symbols are appended as
    /// one-character tokens after the listed texts.
    pub fn new<S: AsRef<str>>(alphabet: Alphabet, token_texts: &[S]) -> Result<Self> {
        let mut texts: Vec<String> = Vec::with_capacity(token_texts.len() + alphabet.len());
        let mut syms: Vec<Vec<Sym>> = Vec::with_capacity(texts.capacity());
        let mut seen = BTreeSet::new();
        for text in token_texts {
            let text = text.as_ref();
            if text.is_empty() {
                return Err(Error::EmptyToken);
            }
            let s = alphabet.to_syms(text)?;
            if !seen.insert(s.clone()) {
                return Err(Error::DuplicateToken(text.to_string()));
            }
            texts.push(text.to_string());
            syms.push(s);
        }
        for (i, &c) in alphabet.symbols().iter().enumerate() {
            let s = vec![i as Sym];
            if seen.insert(s.clone()) {
                texts.push(c.to_string());
                syms.push(s);
            }
        }
        let mut trie = PrefixTrie::new(alphabet.len());
        for (i, s) in syms.iter().enumerate() {
            trie.insert(s, TokenId(i as u32));
        }
        Ok(Self { alphabet, texts, syms, trie })
    }

    /// Longest token prefixing `syms` and its length in symbols.
    pub fn longest_prefix(&self, syms: &[Sym]) -> Option<(TokenId, usize)> {
        self.trie.longest_prefix(syms)
    }
}

/// One merge rule: adjacent `left`,`right` become `new`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Merge {
    pub left: TokenId,
    pub right: TokenId,
    pub new: TokenId,
}

/// Vocabulary for byte-pair encoding: alphabet tokens followed by merges in
/// priority order.
#[derive(Debug, Clone)]
pub struct BpeVocabulary {
    alphabet: Alphabet,
    texts: Vec<String>,
    syms: Vec<Vec<Sym>>,
    merges: Vec<Merge>,
}

impl BpeVocabulary {
    /// Build from `(left, right)` text pairs. Operands resolve to the earliest
    /// token carrying that text.
    pub fn new<L: AsRef<str>, R: AsRef<str>>(alphabet: Alphabet, merges: &[(L, R)]) -> Result<Self> {
        let mut texts = Vec::with_capacity(alphabet.len() + merges.len());
        let mut syms = Vec::with_capacity(texts.capacity());
        let mut by_text: BTreeMap<String, TokenId> = BTreeMap::new();
        for (i, &c) in alphabet.symbols().iter().enumerate() {
            let text = c.to_string();
            by_text.insert(text.clone(), TokenId(i as u32));
            texts.push(text);
            syms.push(vec![i as Sym]);
        }
        let mut rules = Vec::with_capacity(merges.len());
        for (index, (l, r)) in merges.iter().enumerate() {
            let lookup = |t: &str| {
                by_text.get(t).copied().ok_or_else(|| Error::UnknownMergeOperand { index, text: t.to_string() })
            };
            let left = lookup(l.as_ref())?;
            let right = lookup(r.as_ref())?;
            let new = TokenId(texts.len() as u32);
            let mut text = texts[left.index()].clone();
            text.push_str(&texts[right.index()]);
            let mut s: Vec<Sym> = syms[left.index()].clone();
            s.extend_from_slice(&syms[right.index()]);
            by_text.entry(text.clone()).or_insert(new);
            texts.push(text);
            syms.push(s);
            rules.push(Merge { left, right, new });
        }
        Ok(Self { alphabet, texts, syms, merges: rules })
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }
}

/// Either vocabulary kind, for callers that pick the scheme at run time.
#[derive(Debug, Clone)]
pub enum Vocabulary {
    Mpe(MpeVocabulary),
    Bpe(BpeVocabulary),
}

impl Vocabulary {
    pub fn as_mpe(&self) -> Option<&MpeVocabulary> {
        match self {
            Vocabulary::Mpe(v) => Some(v),
            Vocabulary::Bpe(_) => None,
        }
    }

    pub fn as_bpe(&self) -> Option<&BpeVocabulary> {
        match self {
            Vocabulary::Bpe(v) => Some(v),
            Vocabulary::Mpe(_) => None,
        }
    }
}

impl From<MpeVocabulary> for Vocabulary {
    fn from(v: MpeVocabulary) -> Self {
        Vocabulary::Mpe(v)
    }
}

impl From<BpeVocabulary> for Vocabulary {
    fn from(v: BpeVocabulary) -> Self {
        Vocabulary::Bpe(v)
    }
}

impl Tokenizer for MpeVocabulary {
    fn scheme(&self) -> Scheme {
        Scheme::Mpe
    }

    fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    fn len(&self) -> usize {
        self.texts.len()
    }

    fn token_text(&self, id: TokenId) -> &str {
        &self.texts[id.index()]
    }

    fn token_syms(&self, id: TokenId) -> &[Sym] {
        &self.syms[id.index()]
    }

    fn encode_syms(&self, syms: &[Sym]) -> Vec<TokenId> {
        let mut out = Vec::new();
        let mut rest = syms;
        while !rest.is_empty() {
            // Every symbol is a token, so a match always exists.
            let (id, len) = self.trie.longest_prefix(rest).expect("alphabet token missing");
            out.push(id);
            rest = &rest[len..];
        }
        out
    }

    fn first_token_syms(&self, syms: &[Sym]) -> Option<TokenId> {
        self.trie.longest_prefix(syms).map(|(id, _)| id)
    }
}

impl Tokenizer for BpeVocabulary {
    fn scheme(&self) -> Scheme {
        Scheme::Bpe
    }

    fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    fn len(&self) -> usize {
        self.texts.len()
    }

    fn token_text(&self, id: TokenId) -> &str {
        &self.texts[id.index()]
    }

    fn token_syms(&self, id: TokenId) -> &[Sym] {
        &self.syms[id.index()]
    }

    fn encode_syms(&self, syms: &[Sym]) -> Vec<TokenId> {
        let mut current: Vec<TokenId> = syms.iter().map(|&s| TokenId(s as u32)).collect();
        let mut next = Vec::with_capacity(current.len());
        for rule in &self.merges {
            if current.len() < 2 {
                break;
            }
            next.clear();
            let mut j = 0;
            while j < current.len() {
                if j + 1 < current.len() && current[j] == rule.left && current[j + 1] == rule.right {
                    next.push(rule.new);
                    j += 2;
                } else {
                    next.push(current[j]);
                    j += 1;
                }
            }
            core::mem::swap(&mut current, &mut next);
        }
        current
    }
}

impl Tokenizer for Vocabulary {
    fn scheme(&self) -> Scheme {
        match self {
            Vocabulary::Mpe(v) => v.scheme(),
            Vocabulary::Bpe(v) => v.scheme(),
        }
    }

    fn alphabet(&self) -> &Alphabet {
        match self {
            Vocabulary::Mpe(v) => v.alphabet(),
            Vocabulary::Bpe(v) => v.alphabet(),
        }
    }

    fn len(&self) -> usize {
        match self {
            Vocabulary::Mpe(v) => v.len(),
            Vocabulary::Bpe(v) => v.len(),
        }
    }

    fn token_text(&self, id: TokenId) -> &str {
        match self {
            Vocabulary::Mpe(v) => v.token_text(id),
            Vocabulary::Bpe(v) => v.token_text(id),
        }
    }

    fn token_syms(&self, id: TokenId) -> &[Sym] {
        match self {
            Vocabulary::Mpe(v) => v.token_syms(id),
            Vocabulary::Bpe(v) => v.token_syms(id),
        }
    }

    fn encode_syms(&self, syms: &[Sym]) -> Vec<TokenId> {
        match self {
            Vocabulary::Mpe(v) => v.encode_syms(syms),
            Vocabulary::Bpe(v) => v.encode_syms(syms),
        }
    }

    fn first_token_syms(&self, syms: &[Sym]) -> Option<TokenId> {
        match self {
            Vocabulary::Mpe(v) => v.first_token_syms(syms),
            Vocabulary::Bpe(v) => v.first_token_syms(syms),
        }
    }
}

/// Tokens whose text occurs inside no other (longer) token text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VStarSet {
    members: Vec<bool>,
}

impl VStarSet {
    pub fn contains(&self, id: TokenId) -> bool {
        self.members.get(id.index()).copied().unwrap_or(false)
    }

    pub fn ids(&self) -> impl Iterator<Item = TokenId> + '_ {
        self.members.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| TokenId(i as u32))
    }

    pub fn len(&self) -> usize {
        self.members.iter().filter(|&&m| m).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn contains_slice(haystack: &[Sym], needle: &[Sym]) -> bool {
    needle.len() <= haystack.len() && haystack.windows(needle.len()).any(|w| w == needle)
}

pub fn compute_vstar<T: Tokenizer + ?Sized>(vocab: &T) -> VStarSet {
    let n = vocab.len();
    let members = (0..n)
        .map(|i| {
            let t = vocab.token_syms(TokenId(i as u32));
            !(0..n).any(|j| {
                let other = vocab.token_syms(TokenId(j as u32));
                other.len() > t.len() && contains_slice(other, t)
            })
        })
        .collect();
    VStarSet { members }
}

/// Length in characters of the longest token.
pub fn max_token_length<T: Tokenizer + ?Sized>(vocab: &T) -> usize {
    (0..vocab.len()).map(|i| vocab.token_syms(TokenId(i as u32)).len()).max().unwrap_or(1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    fn ab() -> Alphabet {
        Alphabet::from_chars("AB").unwrap()
    }

    fn texts<T: Tokenizer>(v: &T) -> Vec<&str> {
        (0..v.len()).map(|i| v.token_text(TokenId(i as u32))).collect()
    }

    fn vstar_texts<T: Tokenizer>(v: &T) -> Vec<&str> {
        let set = compute_vstar(v);
        set.ids().map(|id| v.token_text(id)).collect()
    }

    #[test]
    fn alphabet_rejects_duplicates_and_empty() {
        assert_eq!(Alphabet::from_chars("ABA"), Err(Error::DuplicateSymbol('A')));
        assert_eq!(Alphabet::from_chars(""), Err(Error::EmptyAlphabet));
    }

    #[test]
    fn mpe_vocab_keeps_listed_order() {
        let v = MpeVocabulary::new(ab(), &["AA", "A", "B"]).unwrap();
        assert_eq!(v.len(), 3);
        assert_eq!(texts(&v), ["AA", "A", "B"]);
    }

    #[test]
    fn mpe_vocab_adds_alphabet() {
        let v = MpeVocabulary::new(ab(), &[] as &[&str]).unwrap();
        assert_eq!(texts(&v), ["A", "B"]);
        let v = MpeVocabulary::new(ab(), &["BA"]).unwrap();
        assert_eq!(texts(&v), ["BA", "A", "B"]);
    }

    #[test]
    fn mpe_vocab_markov3() {
        let v = MpeVocabulary::new(ab(), &["A", "B", "AA", "BAAB", "BBAA", "BBBA", "BA", "BBA"]).unwrap();
        assert_eq!(v.len(), 8);
        assert_eq!(max_token_length(&v), 4);
        assert_eq!(vstar_texts(&v), ["BAAB", "BBAA", "BBBA"]);
    }

    #[test]
    fn mpe_vocab_errors() {
        assert_eq!(MpeVocabulary::new(ab(), &["AA", "AA"]).unwrap_err(), Error::DuplicateToken("AA".into()));
        assert_eq!(
            MpeVocabulary::new(ab(), &["AC"]).unwrap_err(),
            Error::SymbolOutsideAlphabet { symbol: 'C', position: 1 }
        );
        assert_eq!(MpeVocabulary::new(ab(), &[""]).unwrap_err(), Error::EmptyToken);
    }

    #[test]
    fn bpe_vocab_merge_order() {
        let v =
            BpeVocabulary::new(ab(), &[("B", "A"), ("BA", "A"), ("B", "BAA"), ("A", "A"), ("BA", "BA"), ("B", "B")])
                .unwrap();
        assert_eq!(texts(&v), ["A", "B", "BA", "BAA", "BBAA", "AA", "BABA", "BB"]);
        assert_eq!(max_token_length(&v), 4);
        assert_eq!(v.merges()[2], Merge { left: TokenId(1), right: TokenId(3), new: TokenId(4) });
        assert_eq!(vstar_texts(&v), ["BBAA", "BABA"]);
    }

    #[test]
    fn bpe_vocab_small() {
        let v = BpeVocabulary::new(ab(), &[] as &[(&str, &str)]).unwrap();
        assert_eq!(texts(&v), ["A", "B"]);
        let v = BpeVocabulary::new(ab(), &[("A", "A")]).unwrap();
        assert_eq!(texts(&v), ["A", "B", "AA"]);
        assert_eq!(vstar_texts(&v), ["B", "AA"]);
    }

    #[test]
    fn bpe_vocab_unknown_operand() {
        let err = BpeVocabulary::new(ab(), &[("A", "A"), ("AAA", "B")]).unwrap_err();
        assert_eq!(err, Error::UnknownMergeOperand { index: 1, text: "AAA".into() });
    }

    #[test]
    fn bpe_duplicate_results_allowed() {
        let v = BpeVocabulary::new(ab(), &[("A", "A"), ("AA", "A"), ("A", "AA")]).unwrap();
        assert_eq!(texts(&v), ["A", "B", "AA", "AAA", "AAA"]);
    }

    #[test]
    fn vstar_examples() {
        let abc = Alphabet::from_chars("ABC").unwrap();
        let v = MpeVocabulary::new(abc, &["AAA", "AA", "CB", "A", "B", "C"]).unwrap();
        assert_eq!(vstar_texts(&v), ["AAA", "CB"]);
        let v = MpeVocabulary::new(ab(), &["AA", "A", "B"]).unwrap();
        assert_eq!(vstar_texts(&v), ["AA", "B"]);
        assert_eq!(max_token_length(&v), 2);
    }

    #[test]
    fn longest_prefix_lookup() {
        let v = MpeVocabulary::new(ab(), &["AA", "A", "B", "BAB"]).unwrap();
        let s = v.alphabet().to_syms("BAA").unwrap();
        assert_eq!(v.longest_prefix(&s).map(|(id, l)| (v.token_text(id), l)), Some(("B", 1)));
        let s = v.alphabet().to_syms("BABA").unwrap();
        assert_eq!(v.longest_prefix(&s).map(|(id, l)| (v.token_text(id), l)), Some(("BAB", 3)));
    }
}
