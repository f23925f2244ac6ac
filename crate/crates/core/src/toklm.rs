//! Token-level language models.
//!
//! * [`ExactTokenLm`] converts a character source into exact next-token
//!   distributions by refactoring at the last `V*` token and aggregating over
//!   every `|A|^M` continuation.
//! * [`CountTokenLm`] is an n-gram estimator fitted on sampled, tokenized
//!   sequences; it stands in for a trained network.
//! * [`TruncRenormLm`] zeroes mass on invalid continuations and renormalizes.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;
use core::cell::{Cell, RefCell};

use crate::charlm::MarkovCharModel;
use crate::error::{Error, Result};
use crate::seed;
use crate::tokenize::Tokenizer;
use crate::vocab::{compute_vstar, max_token_length, Scheme, Sym, TokenId, VStarSet};

/// Next-token probabilities indexed by token id.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenDistribution {
    probs: Vec<f64>,
}

impl TokenDistribution {
    pub fn new(probs: Vec<f64>) -> Self {
        Self { probs }
    }

    pub fn get(&self, id: TokenId) -> f64 {
        self.probs.get(id.index()).copied().unwrap_or(0.0)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn into_probs(self) -> Vec<f64> {
        self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (TokenId, f64)> + '_ {
        self.probs.iter().enumerate().map(|(i, &p)| (TokenId(i as u32), p))
    }
}

/// Anything that answers `P(t_{i+1} | t_1..t_i)`, including for the empty context.
pub trait TokenLm {
    fn vocab_size(&self) -> usize;
    fn next_token_dist(&self, context: &[TokenId]) -> Result<TokenDistribution>;
}

impl<L: TokenLm + ?Sized> TokenLm for &L {
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }

    fn next_token_dist(&self, context: &[TokenId]) -> Result<TokenDistribution> {
        (**self).next_token_dist(context)
    }
}

/// Token model derived exactly from a character source.
pub struct ExactTokenLm<'a, T: Tokenizer> {
    chain: &'a MarkovCharModel,
    vocab: &'a T,
    vstar: VStarSet,
    slack: usize,
    refactor: bool,
}

impl<'a, T: Tokenizer> ExactTokenLm<'a, T> {
    /// Aggregates over `M` trailing characters. Refactoring at `V*` tokens is
    /// used for maximum-prefix vocabularies; byte-pair vocabularies always
    /// condition on the full context from the start of the string.
    pub fn new(chain: &'a MarkovCharModel, vocab: &'a T) -> Result<Self> {
        if chain.alphabet() != vocab.alphabet() {
            return Err(Error::InvalidArgument("chain and vocabulary alphabets differ".to_string()));
        }
        Ok(Self {
            chain,
            vocab,
            vstar: compute_vstar(vocab),
            slack: max_token_length(vocab),
            refactor: vocab.scheme() == Scheme::Mpe,
        })
    }

    /// Use `slack` trailing characters instead of `M`.
    pub fn with_slack(mut self, slack: usize) -> Self {
        self.slack = slack;
        self
    }

    /// Condition on the full context instead of the last `V*` token.
    pub fn without_refactoring(mut self) -> Self {
        self.refactor = false;
        self
    }

    pub fn vocab(&self) -> &T {
        self.vocab
    }

    pub fn chain(&self) -> &MarkovCharModel {
        self.chain
    }

    /// Number of leading context tokens ending at the last `V*` token (0 when
    /// refactoring is off or no such token exists).
    pub fn anchor_len(&self, context: &[TokenId]) -> usize {
        if !self.refactor {
            return 0;
        }
        context.iter().rposition(|&t| self.vstar.contains(t)).map_or(0, |i| i + 1)
    }

    /// `P(tail and x_{n_k+1..} | anchor string)` where `tail` are the tokens
    /// after the anchor, aggregated over every `|A|^slack` continuation.
    fn tail_mass(&self, anchor: &[Sym], tail: &[TokenId]) -> Result<f64> {
        let tail_syms = self.vocab.decode_syms(tail);
        let base = self.chain.cond_block_prob_fast(anchor, &tail_syms)?;
        if base == 0.0 {
            return Ok(0.0);
        }
        let a = self.vocab.alphabet().len() as Sym;
        let mut at_tail: Vec<Sym> = anchor.to_vec();
        at_tail.extend_from_slice(&tail_syms);
        let mut block = tail_syms.clone();
        block.resize(tail_syms.len() + self.slack, 0);
        let mut total = 0.0;
        loop {
            let enc = self.vocab.encode_syms(&block);
            if enc.starts_with(tail) {
                total += base * self.chain.cond_block_prob_fast(&at_tail, &block[tail_syms.len()..])?;
            }
            // Odometer over the suffix.
            let mut pos = block.len();
            loop {
                if pos == tail_syms.len() {
                    return Ok(total);
                }
                pos -= 1;
                block[pos] += 1;
                if block[pos] < a {
                    break;
                }
                block[pos] = 0;
            }
        }
    }
}

impl<T: Tokenizer> TokenLm for ExactTokenLm<'_, T> {
    fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    fn next_token_dist(&self, context: &[TokenId]) -> Result<TokenDistribution> {
        if !self.vocab.is_valid(context) {
            return Err(Error::UndefinedConditional(format!(
                "context {:?} is not a valid encoding",
                self.vocab.texts_of(context)
            )));
        }
        let k = self.anchor_len(context);
        let anchor = self.vocab.decode_syms(&context[..k]);
        if self.chain.prefix_prob_syms(&anchor) == 0.0 {
            return Err(Error::UndefinedConditional("context has probability zero".to_string()));
        }
        let tail = &context[k..];
        let den = self.tail_mass(&anchor, tail)?;
        if den == 0.0 {
            return Err(Error::UndefinedConditional("context has probability zero".to_string()));
        }
        let mut extended = tail.to_vec();
        extended.push(TokenId(0));
        let mut probs = vec![0.0; self.vocab.len()];
        for t in self.vocab.ids() {
            if !self.vocab.is_valid_extension(context, t) {
                continue;
            }
            *extended.last_mut().unwrap() = t;
            probs[t.index()] = self.tail_mass(&anchor, &extended)? / den;
        }
        Ok(TokenDistribution::new(probs))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct ContextKey {
    /// Context starts at the beginning of the sequence.
    anchored: bool,
    tokens: Vec<TokenId>,
}

/// Accumulated `(context -> next token)` counts.
#[derive(Debug, Clone, PartialEq)]
pub struct CountTables {
    order: usize,
    vocab_size: usize,
    counts: BTreeMap<ContextKey, Vec<u64>>,
}

impl CountTables {
    /// `order` is the n-gram length `m`; contexts hold `m - 1` tokens.
    pub fn new(order: usize, vocab_size: usize) -> Self {
        Self { order, vocab_size, counts: BTreeMap::new() }
    }

    fn key(&self, context: &[TokenId]) -> ContextKey {
        let width = self.order - 1;
        if context.len() < width {
            ContextKey { anchored: true, tokens: context.to_vec() }
        } else {
            ContextKey { anchored: false, tokens: context[context.len() - width..].to_vec() }
        }
    }

    pub fn observe(&mut self, context: &[TokenId], next: TokenId) {
        let key = self.key(context);
        let vocab_size = self.vocab_size;
        self.counts.entry(key).or_insert_with(|| vec![0; vocab_size])[next.index()] += 1;
    }

    /// Order-independent merge.
    pub fn merge(&mut self, other: CountTables) {
        for (key, row) in other.counts {
            let mine = self.counts.entry(key).or_insert_with(|| vec![0; row.len()]);
            for (m, r) in mine.iter_mut().zip(row) {
                *m += r;
            }
        }
    }

    pub fn num_contexts(&self) -> usize {
        self.counts.len()
    }

    pub fn total_observations(&self) -> u64 {
        self.counts.values().flatten().sum()
    }

    /// Counts stored for the key `context` maps to.
    pub fn counts_for(&self, context: &[TokenId]) -> Option<&[u64]> {
        self.counts.get(&self.key(context)).map(|v| v.as_slice())
    }

    /// Representative contexts for every stored key: anchored keys as-is,
    /// unanchored keys as their `m - 1` tokens.
    pub fn contexts(&self) -> impl Iterator<Item = (bool, &[TokenId])> + '_ {
        self.counts.keys().map(|k| (k.anchored, k.tokens.as_slice()))
    }
}

/// Parameters for [`CountTokenLm::fit`].
#[derive(Debug, Clone, PartialEq)]
pub struct CountConfig {
    pub num_sequences: usize,
    pub seq_length: usize,
    /// n-gram length `m`.
    pub order: usize,
    /// Additive smoothing mass `δ`.
    pub smoothing: f64,
    pub seed: u64,
}

impl Default for CountConfig {
    fn default() -> Self {
        Self { num_sequences: 10_000, seq_length: 256, order: 4, smoothing: 0.0, seed: 0 }
    }
}

impl CountConfig {
    pub fn validate<T: Tokenizer>(&self, vocab: &T) -> Result<()> {
        let m = max_token_length(vocab);
        if self.seq_length < 2 * m {
            return Err(Error::InvalidArgument(format!(
                "sequence length {} is below twice the longest token ({m})",
                self.seq_length
            )));
        }
        if self.order < 1 {
            return Err(Error::InvalidArgument("n-gram order must be at least 1".to_string()));
        }
        if self.smoothing.is_nan() || self.smoothing < 0.0 {
            return Err(Error::InvalidArgument("smoothing must be non-negative".to_string()));
        }
        Ok(())
    }
}

/// Sample, tokenize and count the `index`-th training sequence.
///
/// A token is counted as a prediction target only when at least `M`
/// characters follow its end inside the sample, so boundary truncation
/// never reaches the counts.
pub fn count_sequence<T: Tokenizer>(
    chain: &MarkovCharModel,
    vocab: &T,
    config: &CountConfig,
    index: u64,
    tables: &mut CountTables,
) {
    let m = max_token_length(vocab);
    let mut rng = seed::rng(seed::derive(seed::derive(config.seed, seed::FIT), index));
    let syms = chain.sample_syms(config.seq_length, &mut rng);
    let tokens = vocab.encode_syms(&syms);
    let width = config.order - 1;
    let mut end = 0usize;
    for (i, &t) in tokens.iter().enumerate() {
        end += vocab.token_syms(t).len();
        if end + m > syms.len() {
            break;
        }
        tables.observe(&tokens[i.saturating_sub(width)..i], t);
    }
}

/// Count-based n-gram token model.
#[derive(Debug, Clone, PartialEq)]
pub struct CountTokenLm {
    tables: CountTables,
    smoothing: f64,
}

impl CountTokenLm {
    /// Sequential fit; sequence `i` always uses the same derived seed, so
    /// any partition of `0..num_sequences` merged with
    /// [`CountTables::merge`] gives the same model.
    pub fn fit<T: Tokenizer>(chain: &MarkovCharModel, vocab: &T, config: &CountConfig) -> Result<Self> {
        config.validate(vocab)?;
        let mut tables = CountTables::new(config.order, vocab.len());
        for i in 0..config.num_sequences as u64 {
            count_sequence(chain, vocab, config, i, &mut tables);
        }
        Ok(Self::from_tables(tables, config.smoothing))
    }

    pub fn from_tables(tables: CountTables, smoothing: f64) -> Self {
        Self { tables, smoothing }
    }

    pub fn tables(&self) -> &CountTables {
        &self.tables
    }

    pub fn order(&self) -> usize {
        self.tables.order
    }

    pub fn smoothing(&self) -> f64 {
        self.smoothing
    }
}

impl TokenLm for CountTokenLm {
    fn vocab_size(&self) -> usize {
        self.tables.vocab_size
    }

    fn next_token_dist(&self, context: &[TokenId]) -> Result<TokenDistribution> {
        let v = self.tables.vocab_size;
        let delta = self.smoothing;
        match self.tables.counts_for(context) {
            Some(row) => {
                let total: u64 = row.iter().sum();
                let z = total as f64 + delta * v as f64;
                Ok(TokenDistribution::new(row.iter().map(|&c| (c as f64 + delta) / z).collect()))
            }
            None if delta > 0.0 => Ok(TokenDistribution::new(vec![1.0 / v as f64; v])),
            None => Err(Error::UnseenContext),
        }
    }
}

/// Zero `q` on `forbidden` and renormalize the rest.
pub fn truncate_renormalize_probs(q: &[f64], forbidden: &[bool]) -> Result<Vec<f64>> {
    if q.len() != forbidden.len() {
        return Err(Error::SupportMismatch(q.len(), forbidden.len()));
    }
    let z: f64 = q.iter().zip(forbidden).filter(|(_, &f)| !f).map(|(p, _)| p).sum();
    if z.is_nan() || z <= 0.0 {
        return Err(Error::DegenerateDistribution);
    }
    Ok(q.iter().zip(forbidden).map(|(&p, &f)| if f { 0.0 } else { p / z }).collect())
}

/// Truncate-renormalize `dist` against the tokens that would make
/// `context + [t]` an invalid encoding.
pub fn truncate_renormalize<T: Tokenizer + ?Sized>(
    dist: &TokenDistribution,
    context: &[TokenId],
    vocab: &T,
) -> Result<TokenDistribution> {
    let forbidden: Vec<bool> = vocab.ids().map(|t| !vocab.is_valid_extension(context, t)).collect();
    truncate_renormalize_probs(dist.probs(), &forbidden).map(TokenDistribution::new)
}

/// `Σ p_i ln(p_i / q_i)` with `0 ln 0 = 0`.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::SupportMismatch(p.len(), q.len()));
    }
    let mut total = 0.0;
    for (i, (&pi, &qi)) in p.iter().zip(q).enumerate() {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return Err(Error::InfiniteDivergence(i));
        }
        total += pi * libm::log(pi / qi);
    }
    Ok(total)
}

/// Wraps a model with truncate-renormalization on every query.
pub struct TruncRenormLm<'a, L, T: ?Sized> {
    inner: L,
    vocab: &'a T,
}

impl<'a, L: TokenLm, T: Tokenizer + ?Sized> TruncRenormLm<'a, L, T> {
    pub fn new(inner: L, vocab: &'a T) -> Self {
        Self { inner, vocab }
    }

    pub fn inner(&self) -> &L {
        &self.inner
    }
}

impl<L: TokenLm, T: Tokenizer + ?Sized> TokenLm for TruncRenormLm<'_, L, T> {
    fn vocab_size(&self) -> usize {
        self.inner.vocab_size()
    }

    fn next_token_dist(&self, context: &[TokenId]) -> Result<TokenDistribution> {
        let raw = self.inner.next_token_dist(context)?;
        truncate_renormalize(&raw, context, self.vocab)
    }
}

/// Memoizes another model per exact context. Single-threaded by construction;
/// create one per worker.
pub struct CachedLm<L> {
    inner: L,
    cache: RefCell<BTreeMap<Vec<TokenId>, TokenDistribution>>,
}

impl<L: TokenLm> CachedLm<L> {
    pub fn new(inner: L) -> Self {
        Self { inner, cache: RefCell::new(BTreeMap::new()) }
    }
}

impl<L: TokenLm> TokenLm for CachedLm<L> {
    fn vocab_size(&self) -> usize {
        self.inner.vocab_size()
    }

    fn next_token_dist(&self, context: &[TokenId]) -> Result<TokenDistribution> {
        if let Some(d) = self.cache.borrow().get(context) {
            return Ok(d.clone());
        }
        let d = self.inner.next_token_dist(context)?;
        self.cache.borrow_mut().insert(context.to_vec(), d.clone());
        Ok(d)
    }
}

/// Counts `next_token_dist` invocations.
pub struct CallCounter<L> {
    inner: L,
    calls: Cell<usize>,
}

impl<L: TokenLm> CallCounter<L> {
    pub fn new(inner: L) -> Self {
        Self { inner, calls: Cell::new(0) }
    }

    pub fn calls(&self) -> usize {
        self.calls.get()
    }

    pub fn reset(&self) {
        self.calls.set(0);
    }
}

impl<L: TokenLm> TokenLm for CallCounter<L> {
    fn vocab_size(&self) -> usize {
        self.inner.vocab_size()
    }

    fn next_token_dist(&self, context: &[TokenId]) -> Result<TokenDistribution> {
        self.calls.set(self.calls.get() + 1);
        self.inner.next_token_dist(context)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vocab::{Alphabet, MpeVocabulary};

    fn ab() -> Alphabet {
        Alphabet::from_chars("AB").unwrap()
    }

    fn fig1_chain() -> MarkovCharModel {
        MarkovCharModel::first_order(ab(), &[0.5, 0.5], &[&[0.3, 0.7], &[0.5, 0.5]]).unwrap()
    }

    fn fig1_vocab() -> MpeVocabulary {
        MpeVocabulary::new(ab(), &["AA", "A", "B"]).unwrap()
    }

    fn probs_by_text(v: &MpeVocabulary, d: &TokenDistribution) -> [f64; 3] {
        let g = |t: &str| d.get(v.token_by_text(t).unwrap());
        [g("A"), g("AA"), g("B")]
    }

    fn assert_close(got: [f64; 3], want: [f64; 3]) {
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() < 1e-12, "{got:?} vs {want:?}");
        }
    }

    #[test]
    fn exact_first_token_law() {
        let (c, v) = (fig1_chain(), fig1_vocab());
        let lm = ExactTokenLm::new(&c, &v).unwrap();
        // gamma(1-alpha), gamma*alpha, 1-gamma
        assert_close(probs_by_text(&v, &lm.next_token_dist(&[]).unwrap()), [0.35, 0.15, 0.5]);
    }

    #[test]
    fn exact_rows_after_single_tokens() {
        let (c, v) = (fig1_chain(), fig1_vocab());
        let lm = ExactTokenLm::new(&c, &v).unwrap();
        let id = |t| v.token_by_text(t).unwrap();
        assert_close(probs_by_text(&v, &lm.next_token_dist(&[id("A")]).unwrap()), [0.0, 0.0, 1.0]);
        // alpha(1-alpha), alpha^2, 1-alpha
        assert_close(probs_by_text(&v, &lm.next_token_dist(&[id("AA")]).unwrap()), [0.21, 0.09, 0.7]);
        // beta(1-alpha), beta*alpha, 1-beta
        assert_close(probs_by_text(&v, &lm.next_token_dist(&[id("B")]).unwrap()), [0.35, 0.15, 0.5]);
    }

    #[test]
    fn exact_rejects_invalid_context() {
        let (c, v) = (fig1_chain(), fig1_vocab());
        let lm = ExactTokenLm::new(&c, &v).unwrap();
        let a = v.token_by_text("A").unwrap();
        assert!(matches!(lm.next_token_dist(&[a, a]), Err(Error::UndefinedConditional(_))));
    }

    #[test]
    fn exact_rejects_zero_probability_context() {
        let v = fig1_vocab();
        let c = MarkovCharModel::first_order(ab(), &[1.0, 0.0], &[&[1.0, 0.0], &[0.5, 0.5]]).unwrap();
        let lm = ExactTokenLm::new(&c, &v).unwrap();
        let b = v.token_by_text("B").unwrap();
        assert!(matches!(lm.next_token_dist(&[b]), Err(Error::UndefinedConditional(_))));
    }

    #[test]
    fn refactoring_matches_full_conditioning() {
        let c = MarkovCharModel::random(ab(), 3, 3).unwrap();
        let v = MpeVocabulary::new(ab(), &["A", "B", "AA", "BAAB", "BBAA", "BBBA", "BA", "BBA"]).unwrap();
        let with = ExactTokenLm::new(&c, &v).unwrap();
        let without = ExactTokenLm::new(&c, &v).unwrap().without_refactoring();
        for s in ["BBAAB", "ABBBAAB", "BAABBA", "AAAA"] {
            let ctx = v.encode(s).unwrap().into_ids();
            let x = with.next_token_dist(&ctx).unwrap();
            let y = without.next_token_dist(&ctx).unwrap();
            for (p, q) in x.probs().iter().zip(y.probs()) {
                assert!((p - q).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn kl_examples() {
        assert_eq!(kl_divergence(&[0.2, 0.8], &[0.2, 0.8]).unwrap(), 0.0);
        let ln2 = kl_divergence(&[1.0, 0.0], &[0.5, 0.5]).unwrap();
        assert!((ln2 - core::f64::consts::LN_2).abs() < 1e-15);
        let d = kl_divergence(&[0.5, 0.5, 0.0], &[0.4, 0.4, 0.2]).unwrap();
        assert!((d - libm::log(1.25)).abs() < 1e-15);
        assert!((d - 0.2231).abs() < 1e-4);
        assert_eq!(kl_divergence(&[0.5, 0.5], &[1.0, 0.0]), Err(Error::InfiniteDivergence(1)));
        assert_eq!(kl_divergence(&[1.0], &[0.5, 0.5]), Err(Error::SupportMismatch(1, 2)));
    }

    #[test]
    fn tr_examples() {
        let q = [0.4, 0.4, 0.2];
        let q_star = truncate_renormalize_probs(&q, &[false, false, true]).unwrap();
        assert_eq!(q_star, [0.5, 0.5, 0.0]);
        let p = [0.5, 0.5, 0.0];
        assert_eq!(kl_divergence(&p, &q_star).unwrap(), 0.0);
        assert!(kl_divergence(&p, &q_star).unwrap() <= kl_divergence(&p, &q).unwrap());
        assert_eq!(truncate_renormalize_probs(&q, &[false; 3]).unwrap(), q);
        assert_eq!(truncate_renormalize_probs(&q, &[true; 3]), Err(Error::DegenerateDistribution));
    }

    #[test]
    fn tr_against_validity() {
        let v = fig1_vocab();
        let a = v.token_by_text("A").unwrap();
        let dist = TokenDistribution::new(alloc::vec![0.2, 0.3, 0.5]);
        let out = truncate_renormalize(&dist, &[a], &v).unwrap();
        assert_close(probs_by_text(&v, &out), [0.0, 0.0, 1.0]);
    }

    #[test]
    fn count_model_deterministic_source() {
        // A deterministic ABAB... source.
        let c = MarkovCharModel::first_order(ab(), &[1.0, 0.0], &[&[0.0, 1.0], &[1.0, 0.0]]).unwrap();
        let v = fig1_vocab();
        let cfg = CountConfig { num_sequences: 50, seq_length: 32, order: 3, ..Default::default() };
        let lm = CountTokenLm::fit(&c, &v, &cfg).unwrap();
        let id = |t| v.token_by_text(t).unwrap();
        let after_a = lm.next_token_dist(&[id("A"), id("B"), id("A")]).unwrap();
        assert_eq!(after_a.get(id("B")), 1.0);
        let after_b = lm.next_token_dist(&[id("B"), id("A"), id("B")]).unwrap();
        assert_eq!(after_b.get(id("A")), 1.0);
        assert_eq!(lm.next_token_dist(&[id("AA")]), Err(Error::UnseenContext));
    }

    #[test]
    fn count_model_smoothing_and_tr() {
        let c = fig1_chain();
        let v = fig1_vocab();
        let cfg = CountConfig { num_sequences: 200, seq_length: 64, order: 2, smoothing: 0.5, seed: 1 };
        let lm = CountTokenLm::fit(&c, &v, &cfg).unwrap();
        let a = v.token_by_text("A").unwrap();
        let raw = lm.next_token_dist(&[a]).unwrap();
        assert!(raw.get(a) > 0.0);
        let wrapped = TruncRenormLm::new(&lm, &v);
        let fixed = wrapped.next_token_dist(&[a]).unwrap();
        assert_eq!(fixed.get(v.token_by_text("B").unwrap()), 1.0);
    }

    #[test]
    fn count_config_rejects_short_sequences() {
        let cfg = CountConfig { seq_length: 3, ..Default::default() };
        assert!(CountTokenLm::fit(&fig1_chain(), &fig1_vocab(), &cfg).is_err());
    }

    #[test]
    fn count_merge_is_order_independent() {
        let (c, v) = (fig1_chain(), fig1_vocab());
        let cfg = CountConfig { num_sequences: 40, seq_length: 64, order: 2, smoothing: 0.0, seed: 9 };
        let whole = CountTokenLm::fit(&c, &v, &cfg).unwrap();
        let mut odd = CountTables::new(2, v.len());
        let mut even = CountTables::new(2, v.len());
        for i in 0..40u64 {
            let t = if i % 2 == 0 { &mut even } else { &mut odd };
            count_sequence(&c, &v, &cfg, i, t);
        }
        odd.merge(even);
        assert_eq!(whole.tables(), &odd);
    }

    #[test]
    fn counter_and_cache() {
        let (c, v) = (fig1_chain(), fig1_vocab());
        let lm = ExactTokenLm::new(&c, &v).unwrap();
        let counter = CallCounter::new(&lm);
        let cached = CachedLm::new(&counter);
        cached.next_token_dist(&[]).unwrap();
        cached.next_token_dist(&[]).unwrap();
        assert_eq!(counter.calls(), 1);
    }
}
