//! Brute-force ground truth by enumerating string extensions.
//!
//! Only the character model's prefix probabilities and the encoder are used
//! here; nothing from [`crate::toklm`] or [`crate::correct`].

use alloc::vec::Vec;

use crate::charlm::MarkovCharModel;
use crate::error::{Error, Result};
use crate::tokenize::{enumerate_covers, Tokenizer};
use crate::toklm::TokenDistribution;
use crate::vocab::{max_token_length, Sym, TokenId};

/// Largest number of strings of the full horizon length an enumeration may span.
pub const ENUMERATION_CAP: u128 = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OracleConfig {
    /// Characters enumerated past the decoded tokens; `None` means `M`.
    pub slack: Option<usize>,
}

impl OracleConfig {
    pub fn with_slack(slack: usize) -> Self {
        Self { slack: Some(slack) }
    }

    fn resolve<T: Tokenizer + ?Sized>(&self, vocab: &T) -> Result<usize> {
        let m = max_token_length(vocab);
        match self.slack {
            None => Ok(m),
            Some(s) if s >= m => Ok(s),
            Some(s) => Err(Error::InvalidArgument(alloc::format!("oracle slack {s} is below M = {m}"))),
        }
    }
}

fn check_cap(alphabet_len: usize, length: usize) -> Result<()> {
    let mut size: u128 = 1;
    for _ in 0..length {
        size = size.saturating_mul(alphabet_len as u128);
        if size > ENUMERATION_CAP {
            let full = (alphabet_len as u128).checked_pow(length as u32).unwrap_or(u128::MAX);
            return Err(Error::EnumerationTooLarge { size: full, cap: ENUMERATION_CAP });
        }
    }
    Ok(())
}

/// Depth-first sum of `prefix_prob(s)` over strings `s = fixed + tail` of
/// length `fixed.len() + tail_len` satisfying `accept`. Zero-mass subtrees are
/// pruned.
fn sum_extensions(
    chain: &MarkovCharModel,
    fixed: &[Sym],
    tail_len: usize,
    accept: &mut dyn FnMut(&[Sym]) -> bool,
) -> f64 {
    let a = chain.alphabet().len() as Sym;
    let mut s = fixed.to_vec();
    let target = fixed.len() + tail_len;
    let mut total = 0.0;
    fn go(
        chain: &MarkovCharModel,
        s: &mut Vec<Sym>,
        target: usize,
        a: Sym,
        accept: &mut dyn FnMut(&[Sym]) -> bool,
        total: &mut f64,
    ) {
        let p = chain.prefix_prob_syms(s);
        if p == 0.0 {
            return;
        }
        if s.len() == target {
            if accept(s) {
                *total += p;
            }
            return;
        }
        for c in 0..a {
            s.push(c);
            go(chain, s, target, a, accept, total);
            s.pop();
        }
    }
    go(chain, &mut s, target, a, accept, &mut total);
    total
}

/// `Σ prefix_prob(s)` over strings of length `|decode(tokens)| + slack`
/// whose encoding starts with `tokens`. Zero for invalid encodings.
pub fn oracle_token_prefix_prob<T: Tokenizer + ?Sized>(
    chain: &MarkovCharModel,
    vocab: &T,
    tokens: &[TokenId],
    config: &OracleConfig,
) -> Result<f64> {
    if let Some(&bad) = tokens.iter().find(|&&t| !vocab.contains_id(t)) {
        return Err(Error::UnknownToken(alloc::string::ToString::to_string(&bad)));
    }
    let slack = config.resolve(vocab)?;
    let fixed = vocab.decode_syms(tokens);
    check_cap(vocab.alphabet().len(), fixed.len() + slack)?;
    Ok(sum_extensions(chain, &fixed, slack, &mut |s| vocab.encode_syms(s).starts_with(tokens)))
}

pub fn oracle_next_token_dist<T: Tokenizer + ?Sized>(
    chain: &MarkovCharModel,
    vocab: &T,
    tokens: &[TokenId],
    config: &OracleConfig,
) -> Result<TokenDistribution> {
    let den = oracle_token_prefix_prob(chain, vocab, tokens, config)?;
    if den == 0.0 {
        return Err(Error::UndefinedConditional(alloc::string::String::from("token context has probability zero")));
    }
    let mut ext = tokens.to_vec();
    ext.push(TokenId(0));
    let probs = vocab
        .ids()
        .map(|t| {
            *ext.last_mut().unwrap() = t;
            Ok(oracle_token_prefix_prob(chain, vocab, &ext, config)? / den)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(TokenDistribution::new(probs))
}

/// True law of the characters following `decode(tokens)` given the token event.
pub fn oracle_cond_block<T: Tokenizer + ?Sized>(
    chain: &MarkovCharModel,
    vocab: &T,
    tokens: &[TokenId],
    block: &str,
    config: &OracleConfig,
) -> Result<f64> {
    let slack = config.resolve(vocab)?;
    let block = vocab.alphabet().to_syms(block)?;
    let fixed = vocab.decode_syms(tokens);
    let n = fixed.len();
    let horizon = slack + block.len();
    check_cap(vocab.alphabet().len(), n + horizon)?;
    let mut den = 0.0;
    let num = sum_extensions(chain, &fixed, horizon, &mut |s| {
        if !vocab.encode_syms(s).starts_with(tokens) {
            return false;
        }
        den += chain.prefix_prob_syms(s);
        s[n..n + block.len()] == block[..]
    });
    if den == 0.0 {
        return Err(Error::UndefinedConditional(alloc::string::String::from("token context has probability zero")));
    }
    Ok(num / den)
}

pub fn oracle_cond_char<T: Tokenizer + ?Sized>(
    chain: &MarkovCharModel,
    vocab: &T,
    tokens: &[TokenId],
    c: char,
    config: &OracleConfig,
) -> Result<f64> {
    let mut buf = [0u8; 4];
    oracle_cond_block(chain, vocab, tokens, c.encode_utf8(&mut buf), config)
}

/// `P(text)` as the sum of enumerated probabilities of every cover encoding.
pub fn oracle_cover_prob<T: Tokenizer + ?Sized>(
    chain: &MarkovCharModel,
    vocab: &T,
    text: &str,
    config: &OracleConfig,
) -> Result<f64> {
    if text.is_empty() {
        return Ok(1.0);
    }
    let mut total = 0.0;
    for cover in enumerate_covers(vocab, text)? {
        total += oracle_token_prefix_prob(chain, vocab, cover.encoding.ids(), config)?;
    }
    Ok(total)
}

/// `P(continuation | context)` through [`oracle_cover_prob`].
pub fn oracle_cond_string<T: Tokenizer + ?Sized>(
    chain: &MarkovCharModel,
    vocab: &T,
    context: &str,
    continuation: &str,
    config: &OracleConfig,
) -> Result<f64> {
    let den = oracle_cover_prob(chain, vocab, context, config)?;
    if den == 0.0 {
        return Err(Error::UndefinedConditional(alloc::string::String::from("context has probability zero")));
    }
    let mut full = alloc::string::String::from(context);
    full.push_str(continuation);
    Ok(oracle_cover_prob(chain, vocab, &full, config)? / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vocab::{Alphabet, BpeVocabulary, MpeVocabulary};

    fn ab() -> Alphabet {
        Alphabet::from_chars("AB").unwrap()
    }

    fn chain() -> MarkovCharModel {
        MarkovCharModel::first_order(ab(), &[0.5, 0.5], &[&[0.3, 0.7], &[0.5, 0.5]]).unwrap()
    }

    fn fig1() -> MpeVocabulary {
        MpeVocabulary::new(ab(), &["AA", "A", "B"]).unwrap()
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn token_prefix_examples() {
        let (c, v) = (chain(), fig1());
        let cfg = OracleConfig::default();
        let ids = |t: &[&str]| v.ids_from_texts(t).unwrap();
        assert!(close(oracle_token_prefix_prob(&c, &v, &ids(&["A"]), &cfg).unwrap(), 0.35));
        assert_eq!(oracle_token_prefix_prob(&c, &v, &ids(&["A", "A"]), &cfg).unwrap(), 0.0);
        assert!(close(oracle_token_prefix_prob(&c, &v, &[], &cfg).unwrap(), 1.0));
    }

    #[test]
    fn next_token_examples() {
        let (c, v) = (chain(), fig1());
        let cfg = OracleConfig::default();
        let id = |t| v.token_by_text(t).unwrap();
        let d = oracle_next_token_dist(&c, &v, &[id("A")], &cfg).unwrap();
        assert!(close(d.get(id("B")), 1.0));
        let d = oracle_next_token_dist(&c, &v, &[id("AA")], &cfg).unwrap();
        assert!(close(d.get(id("AA")), 0.09) && close(d.get(id("A")), 0.21) && close(d.get(id("B")), 0.7));
        assert!(close(d.total(), 1.0));
        assert!(oracle_next_token_dist(&c, &v, &[id("A"), id("A")], &cfg).is_err());
    }

    #[test]
    fn cond_char_examples() {
        let (c, v) = (chain(), fig1());
        let cfg = OracleConfig::default();
        let id = |t| v.token_by_text(t).unwrap();
        assert!(close(oracle_cond_char(&c, &v, &[id("A")], 'B', &cfg).unwrap(), 1.0));
        assert!(close(oracle_cond_char(&c, &v, &[id("AA")], 'A', &cfg).unwrap(), 0.3));
        let s: f64 = ['A', 'B'].iter().map(|&ch| oracle_cond_char(&c, &v, &[id("B")], ch, &cfg).unwrap()).sum();
        assert!(close(s, 1.0));
    }

    #[test]
    fn slack_below_m_and_cap() {
        let (c, v) = (chain(), fig1());
        assert!(oracle_token_prefix_prob(&c, &v, &[], &OracleConfig::with_slack(1)).is_err());
        let err = oracle_token_prefix_prob(&c, &v, &[], &OracleConfig::with_slack(30)).unwrap_err();
        assert!(matches!(err, Error::EnumerationTooLarge { size, .. } if size == 1 << 30));
    }

    #[test]
    fn cover_prob_equals_prefix_prob() {
        let c = MarkovCharModel::random(ab(), 3, 5).unwrap();
        let v =
            BpeVocabulary::new(ab(), &[("B", "A"), ("BA", "A"), ("B", "BAA"), ("A", "A"), ("BA", "BA"), ("B", "B")])
                .unwrap();
        for s in ["A", "BAB", "ABBA", "BAABA"] {
            let got = oracle_cover_prob(&c, &v, s, &OracleConfig::default()).unwrap();
            let want = c.prefix_prob(s).unwrap();
            assert!((got - want).abs() < 1e-12, "{s}: {got} vs {want}");
        }
    }
}
