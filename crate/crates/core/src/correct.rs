//! Recovering character-level conditionals from a token model.
//!
//! [`corrected_cond_prob_mpe`] refactors the context at its last `V*` token
//! and runs the branch/pass recursion ([`mpc_compute`]); the byte-pair
//! version sums over cover encodings ([`bpc_prefix_prob`]). The biased
//! one-branch estimator is [`baseline_next_char`].

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::sync::atomic::{AtomicUsize, Ordering};

use crate::error::{Error, Result};
use crate::tokenize::Tokenizer;
use crate::toklm::{CachedLm, TokenLm};
use crate::vocab::{compute_vstar, Scheme, Sym, TokenId, VStarSet};

/// Weights below this are flushed to zero and counted.
pub const UNDERFLOW_THRESHOLD: f64 = 1e-300;

static UNDERFLOWS: AtomicUsize = AtomicUsize::new(0);

/// Number of intermediate weights flushed to zero since process start.
pub fn underflow_events() -> usize {
    UNDERFLOWS.load(Ordering::Relaxed)
}

fn flush(w: f64) -> f64 {
    if w > 0.0 && w < UNDERFLOW_THRESHOLD {
        UNDERFLOWS.fetch_add(1, Ordering::Relaxed);
        0.0
    } else {
        w
    }
}

/// Context split at its last `V*` token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RefactorSplit {
    /// Number of leading tokens kept; `0` when no `V*` token occurs.
    pub k: usize,
    pub prefix: Vec<TokenId>,
    /// Character length of the decoded prefix.
    pub n_k: usize,
    pub residual: String,
}

pub fn refactor_split<T: Tokenizer + ?Sized>(vocab: &T, context: &str) -> Result<RefactorSplit> {
    refactor_split_with(vocab, &compute_vstar(vocab), context)
}

pub fn refactor_split_with<T: Tokenizer + ?Sized>(vocab: &T, vstar: &VStarSet, context: &str) -> Result<RefactorSplit> {
    let mut ids = vocab.encode(context)?.into_ids();
    let k = ids.iter().rposition(|&t| vstar.contains(t)).map_or(0, |i| i + 1);
    ids.truncate(k);
    let n_k: usize = ids.iter().map(|&t| vocab.token_syms(t).len()).sum();
    let residual: String = context.chars().skip(n_k).collect();
    Ok(RefactorSplit { k, prefix: ids, n_k, residual })
}

/// A request for `P(continuation | context)` in the character domain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorrectionQuery {
    pub context: String,
    pub continuation: String,
    pub scheme: Scheme,
}

impl CorrectionQuery {
    pub fn new(context: impl Into<String>, continuation: impl Into<String>, scheme: Scheme) -> Result<Self> {
        let continuation = continuation.into();
        if continuation.is_empty() {
            return Err(Error::InvalidArgument("continuation must be nonempty".to_string()));
        }
        Ok(Self { context: context.into(), continuation, scheme })
    }
}

fn check_context<T: Tokenizer + ?Sized>(vocab: &T, context: &[TokenId]) -> Result<()> {
    if vocab.is_valid(context) {
        Ok(())
    } else {
        Err(Error::UndefinedConditional(format!("context {:?} is not a valid encoding", vocab.texts_of(context))))
    }
}

/// Mass the model puts on the tokens in `candidates` that keep `context` valid.
fn valid_mass<T: Tokenizer + ?Sized>(
    vocab: &T,
    context: &[TokenId],
    probs: &crate::toklm::TokenDistribution,
    candidates: impl Iterator<Item = TokenId>,
) -> f64 {
    candidates.filter(|&t| probs.get(t) > 0.0 && vocab.is_valid_extension(context, t)).map(|t| probs.get(t)).sum()
}

/// `P(the string after decode(context) starts with query | context)` for a
/// maximum-prefix vocabulary. Empty queries have probability 1.
///
/// Calls `next_token_dist` once per pass level, so at most `|query|` times.
pub fn mpc_compute<L, T>(lm: &L, vocab: &T, context: &[TokenId], query: &str) -> Result<f64>
where
    L: TokenLm + ?Sized,
    T: Tokenizer + ?Sized,
{
    let syms = vocab.alphabet().to_syms(query)?;
    mpc_syms(lm, vocab, context, &syms)
}

fn mpc_syms<L, T>(lm: &L, vocab: &T, context: &[TokenId], query: &[Sym]) -> Result<f64>
where
    L: TokenLm + ?Sized,
    T: Tokenizer + ?Sized,
{
    if vocab.scheme() != Scheme::Mpe {
        return Err(Error::InvalidArgument("the pass recursion needs a maximum-prefix vocabulary".to_string()));
    }
    check_context(vocab, context)?;
    if query.is_empty() {
        return Ok(1.0);
    }
    let mut ctx = context.to_vec();
    let mut rest = query;
    let mut weight = 1.0;
    let mut total = 0.0;
    loop {
        let dist = lm.next_token_dist(&ctx)?;
        // Branch: the next token already covers the rest of the query.
        let branch = valid_mass(vocab, &ctx, &dist, vocab.extending_tokens(rest).into_iter());
        total += weight * branch;
        // Pass: the next token is the longest prefix and ends inside the query.
        let Some(first) = vocab.first_token_syms(rest) else { break };
        let len = vocab.token_syms(first).len();
        if len >= rest.len() || !vocab.is_valid_extension(&ctx, first) {
            break;
        }
        weight = flush(weight * dist.get(first));
        if weight == 0.0 {
            break;
        }
        ctx.push(first);
        rest = &rest[len..];
    }
    Ok(total)
}

/// `P(continuation | context)` via refactoring and [`mpc_compute`].
pub fn corrected_cond_prob_mpe<L, T>(lm: &L, vocab: &T, query: &CorrectionQuery) -> Result<f64>
where
    L: TokenLm + ?Sized,
    T: Tokenizer + ?Sized,
{
    let split = refactor_split(vocab, &query.context)?;
    mpe_ratio(lm, vocab, &split, &query.continuation)
}

fn mpe_ratio<L, T>(lm: &L, vocab: &T, split: &RefactorSplit, continuation: &str) -> Result<f64>
where
    L: TokenLm + ?Sized,
    T: Tokenizer + ?Sized,
{
    let residual = vocab.alphabet().to_syms(&split.residual)?;
    let mut full = residual.clone();
    full.extend(vocab.alphabet().to_syms(continuation)?);
    let num = mpc_syms(lm, vocab, &split.prefix, &full)?;
    if residual.is_empty() {
        return Ok(num);
    }
    let den = mpc_syms(lm, vocab, &split.prefix, &residual)?;
    if den == 0.0 {
        return Err(Error::UndefinedConditional("context has probability zero under the model".to_string()));
    }
    Ok(num / den)
}

/// The biased estimator: mass of next tokens whose text starts with `c`.
pub fn baseline_next_char<L, T>(lm: &L, vocab: &T, context: &[TokenId], c: char) -> Result<f64>
where
    L: TokenLm + ?Sized,
    T: Tokenizer + ?Sized,
{
    let mut buf = [0u8; 4];
    baseline_next_block(lm, vocab, context, c.encode_utf8(&mut buf))
}

/// One branch step for a multi-character continuation.
pub fn baseline_next_block<L, T>(lm: &L, vocab: &T, context: &[TokenId], block: &str) -> Result<f64>
where
    L: TokenLm + ?Sized,
    T: Tokenizer + ?Sized,
{
    check_context(vocab, context)?;
    let syms = vocab.alphabet().to_syms(block)?;
    let dist = lm.next_token_dist(context)?;
    Ok(vocab.extending_tokens(&syms).into_iter().map(|t| dist.get(t)).sum())
}

/// Probability of an encoding, chained through `next_token_dist`. Stops at
/// the first zero factor.
fn encoding_prob<L: TokenLm + ?Sized>(lm: &L, ids: &[TokenId]) -> Result<f64> {
    let mut p = 1.0;
    for i in 0..ids.len() {
        p = flush(p * lm.next_token_dist(&ids[..i])?.get(ids[i]));
        if p == 0.0 {
            return Ok(0.0);
        }
    }
    Ok(p)
}

/// `P(the generated string starts with text)` by summing over cover
/// encodings, one last-token start position at a time. `text = ""` gives 1.
///
/// Works for either scheme; only encoder validity is used.
pub fn bpc_prefix_prob<L, T>(lm: &L, vocab: &T, text: &str) -> Result<f64>
where
    L: TokenLm + ?Sized,
    T: Tokenizer + ?Sized,
{
    let syms = vocab.alphabet().to_syms(text)?;
    let cached = CachedLm::new(lm);
    bpc_syms(&cached, vocab, &syms)
}

fn bpc_syms<L, T>(lm: &L, vocab: &T, syms: &[Sym]) -> Result<f64>
where
    L: TokenLm + ?Sized,
    T: Tokenizer + ?Sized,
{
    if syms.is_empty() {
        return Ok(1.0);
    }
    let mut total = 0.0;
    for i in (0..syms.len()).rev() {
        let candidates = vocab.extending_tokens(&syms[i..]);
        if candidates.is_empty() {
            continue;
        }
        let prior = vocab.encode_syms(&syms[..i]);
        let p_prior = encoding_prob(lm, &prior)?;
        if p_prior == 0.0 {
            continue;
        }
        let dist = lm.next_token_dist(&prior)?;
        total += p_prior * valid_mass(vocab, &prior, &dist, candidates.into_iter());
    }
    Ok(total)
}

/// `bpc(context + continuation) / bpc(context)`.
pub fn corrected_cond_prob_bpe<L, T>(lm: &L, vocab: &T, query: &CorrectionQuery) -> Result<f64>
where
    L: TokenLm + ?Sized,
    T: Tokenizer + ?Sized,
{
    let ctx = vocab.alphabet().to_syms(&query.context)?;
    let mut full = ctx.clone();
    full.extend(vocab.alphabet().to_syms(&query.continuation)?);
    let cached = CachedLm::new(lm);
    let den = bpc_syms(&cached, vocab, &ctx)?;
    if den == 0.0 {
        return Err(Error::UndefinedConditional("context has probability zero under the model".to_string()));
    }
    Ok(bpc_syms(&cached, vocab, &full)? / den)
}

/// Dispatches on the query's scheme, which must match the vocabulary.
pub fn corrected_cond_prob<L, T>(lm: &L, vocab: &T, query: &CorrectionQuery) -> Result<f64>
where
    L: TokenLm + ?Sized,
    T: Tokenizer + ?Sized,
{
    if query.scheme != vocab.scheme() {
        return Err(Error::InvalidArgument(format!(
            "query scheme {} does not match a {} vocabulary",
            query.scheme.as_str(),
            vocab.scheme().as_str()
        )));
    }
    match query.scheme {
        Scheme::Mpe => corrected_cond_prob_mpe(lm, vocab, query),
        Scheme::Bpe => corrected_cond_prob_bpe(lm, vocab, query),
    }
}

/// Corrected next-character law after `context`, one entry per alphabet
/// symbol. Shares the denominator across symbols.
pub fn corrected_next_char_dist<L, T>(lm: &L, vocab: &T, context: &str) -> Result<Vec<f64>>
where
    L: TokenLm + ?Sized,
    T: Tokenizer + ?Sized,
{
    let alphabet = vocab.alphabet();
    match vocab.scheme() {
        Scheme::Mpe => {
            let split = refactor_split(vocab, context)?;
            let residual = alphabet.to_syms(&split.residual)?;
            let den = mpc_syms(lm, vocab, &split.prefix, &residual)?;
            if den == 0.0 {
                return Err(Error::UndefinedConditional("context has probability zero under the model".to_string()));
            }
            (0..alphabet.len() as Sym)
                .map(|c| {
                    let mut q = residual.clone();
                    q.push(c);
                    Ok(mpc_syms(lm, vocab, &split.prefix, &q)? / den)
                })
                .collect()
        }
        Scheme::Bpe => {
            let ctx = alphabet.to_syms(context)?;
            let cached = CachedLm::new(lm);
            let den = bpc_syms(&cached, vocab, &ctx)?;
            if den == 0.0 {
                return Err(Error::UndefinedConditional("context has probability zero under the model".to_string()));
            }
            (0..alphabet.len() as Sym)
                .map(|c| {
                    let mut q = ctx.clone();
                    q.push(c);
                    Ok(bpc_syms(&cached, vocab, &q)? / den)
                })
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charlm::MarkovCharModel;
    use crate::toklm::{CallCounter, ExactTokenLm};
    use crate::vocab::{Alphabet, BpeVocabulary, MpeVocabulary};

    fn ab() -> Alphabet {
        Alphabet::from_chars("AB").unwrap()
    }

    fn chain() -> MarkovCharModel {
        MarkovCharModel::first_order(ab(), &[0.5, 0.5], &[&[0.3, 0.7], &[0.5, 0.5]]).unwrap()
    }

    fn mpe() -> MpeVocabulary {
        MpeVocabulary::new(ab(), &["AA", "A", "B"]).unwrap()
    }

    fn bpe_aa() -> BpeVocabulary {
        BpeVocabulary::new(ab(), &[("A", "A")]).unwrap()
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn split_examples() {
        let v = mpe();
        let s = refactor_split(&v, "BAA").unwrap();
        assert_eq!((s.k, s.n_k, s.residual.as_str()), (2, 3, ""));
        assert_eq!(v.texts_of(&s.prefix), ["B", "AA"]);
        let s = refactor_split(&v, "BA").unwrap();
        assert_eq!((s.k, s.n_k, s.residual.as_str()), (1, 1, "A"));
        let s = refactor_split(&v, "A").unwrap();
        assert_eq!((s.k, s.n_k, s.residual.as_str()), (0, 0, "A"));
        assert!(s.prefix.is_empty());
    }

    #[test]
    fn mpc_examples() {
        let (c, v) = (chain(), mpe());
        let lm = ExactTokenLm::new(&c, &v).unwrap();
        assert!(close(mpc_compute(&lm, &v, &[], "A").unwrap(), 0.5));
        assert!(close(mpc_compute(&lm, &v, &[], "AA").unwrap(), 0.15));
        let ctx = v.ids_from_texts(&["B", "AA"]).unwrap();
        assert!(close(mpc_compute(&lm, &v, &ctx, "B").unwrap(), 0.7));
        let bad = v.ids_from_texts(&["A", "A"]).unwrap();
        assert!(matches!(mpc_compute(&lm, &v, &bad, "B"), Err(Error::UndefinedConditional(_))));
    }

    #[test]
    fn mpc_call_count_bounded_by_query() {
        let (c, v) = (chain(), mpe());
        let lm = ExactTokenLm::new(&c, &v).unwrap();
        let counter = CallCounter::new(&lm);
        for q in ["A", "AB", "ABABAAB", "AAAAAAA"] {
            counter.reset();
            mpc_compute(&counter, &v, &[], q).unwrap();
            assert!(counter.calls() <= q.len());
        }
    }

    #[test]
    fn corrected_mpe_examples() {
        let (c, v) = (chain(), mpe());
        let lm = ExactTokenLm::new(&c, &v).unwrap();
        let q = |ctx: &str, cont: &str| CorrectionQuery::new(ctx, cont, Scheme::Mpe).unwrap();
        assert!(close(corrected_cond_prob_mpe(&lm, &v, &q("A", "A")).unwrap(), 0.3));
        assert!(close(corrected_cond_prob_mpe(&lm, &v, &q("A", "B")).unwrap(), 0.7));
        assert!(close(corrected_cond_prob_mpe(&lm, &v, &q("BAA", "B")).unwrap(), 0.7));
        assert!(CorrectionQuery::new("A", "", Scheme::Mpe).is_err());
    }

    #[test]
    fn baseline_examples() {
        let (c, v) = (chain(), mpe());
        let lm = ExactTokenLm::new(&c, &v).unwrap();
        let a = v.ids_from_texts(&["A"]).unwrap();
        assert_eq!(baseline_next_char(&lm, &v, &a, 'B').unwrap(), 1.0);
        assert_eq!(baseline_next_char(&lm, &v, &a, 'A').unwrap(), 0.0);
        let aa = v.ids_from_texts(&["AA"]).unwrap();
        assert!(close(baseline_next_char(&lm, &v, &aa, 'A').unwrap(), 0.3));
        let bad = v.ids_from_texts(&["A", "AA"]).unwrap();
        assert!(baseline_next_char(&lm, &v, &bad, 'A').is_err());
    }

    #[test]
    fn bpc_examples() {
        let (c, v) = (chain(), bpe_aa());
        let lm = ExactTokenLm::new(&c, &v).unwrap();
        assert!(close(bpc_prefix_prob(&lm, &v, "A").unwrap(), 0.5));
        assert!(close(bpc_prefix_prob(&lm, &v, "AA").unwrap(), 0.15));
        assert_eq!(bpc_prefix_prob(&lm, &v, "").unwrap(), 1.0);
        let q = CorrectionQuery::new("A", "A", Scheme::Bpe).unwrap();
        assert!(close(corrected_cond_prob_bpe(&lm, &v, &q).unwrap(), 0.3));
        let q = CorrectionQuery::new("", "AB", Scheme::Bpe).unwrap();
        assert!(close(corrected_cond_prob_bpe(&lm, &v, &q).unwrap(), bpc_prefix_prob(&lm, &v, "AB").unwrap()));
    }

    #[test]
    fn bpc_zero_for_unreachable_text() {
        // B never follows A, so "AB" is impossible.
        let c = MarkovCharModel::first_order(ab(), &[0.5, 0.5], &[&[1.0, 0.0], &[0.5, 0.5]]).unwrap();
        let v = bpe_aa();
        let lm = ExactTokenLm::new(&c, &v).unwrap();
        assert_eq!(bpc_prefix_prob(&lm, &v, "AB").unwrap(), 0.0);
    }

    #[test]
    fn bpc_matches_mpc_on_mpe_vocab() {
        let c = MarkovCharModel::random(ab(), 3, 11).unwrap();
        let v = MpeVocabulary::new(ab(), &["A", "B", "AA", "BAAB", "BBAA", "BBBA", "BA", "BBA"]).unwrap();
        let lm = ExactTokenLm::new(&c, &v).unwrap();
        for s in ["B", "ABBA", "BAABAB", "BBBAB"] {
            let x = bpc_prefix_prob(&lm, &v, s).unwrap();
            let y = mpc_compute(&lm, &v, &[], s).unwrap();
            assert!((x - y).abs() < 1e-12, "{s}: {x} vs {y}");
        }
    }

    #[test]
    fn scheme_mismatch_is_rejected() {
        let (c, v) = (chain(), bpe_aa());
        let lm = ExactTokenLm::new(&c, &v).unwrap();
        let q = CorrectionQuery::new("A", "A", Scheme::Mpe).unwrap();
        assert!(matches!(corrected_cond_prob(&lm, &v, &q), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn next_char_dist_matches_chain() {
        let (c, v) = (chain(), mpe());
        let lm = ExactTokenLm::new(&c, &v).unwrap();
        let d = corrected_next_char_dist(&lm, &v, "BA").unwrap();
        assert!(close(d[0], 0.3) && close(d[1], 0.7));
        let (c, b) = (chain(), bpe_aa());
        let lm = ExactTokenLm::new(&c, &b).unwrap();
        let d = corrected_next_char_dist(&lm, &b, "AB").unwrap();
        assert!(close(d[0], 0.5) && close(d[1], 0.5));
    }
}
