//! Reproducible experiment drivers.
//!
//! `fig1` is the two-state chain with `V = {A, B, AA}`; `markov3` is a random
//! third-order binary chain under either the maximum-prefix vocabulary
//! `{A, B, AA, BA, BBA, BAAB, BBAA, BBBA}` or the six-merge byte-pair
//! vocabulary. Rows compare the chain's truth with the one-branch baseline
//! and the corrected estimate.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use alloc::{format, vec};

use rand::Rng;

use crate::charlm::MarkovCharModel;
use crate::correct::{baseline_next_char, corrected_cond_prob, CorrectionQuery};
use crate::error::{Error, Result};
use crate::seed;
use crate::tokenize::Tokenizer;
use crate::toklm::{CachedLm, CountConfig, CountTokenLm, ExactTokenLm, TokenDistribution, TokenLm, TruncRenormLm};
use crate::vocab::{Alphabet, BpeVocabulary, MpeVocabulary, Scheme, TokenId, Vocabulary};

pub const FIG1_CONTEXTS: [&str; 5] = ["A", "AA", "B", "BA", "BAA"];

pub const MARKOV3_MPE_TOKENS: [&str; 8] = ["A", "B", "AA", "BAAB", "BBAA", "BBBA", "BA", "BBA"];

pub const MARKOV3_BPE_MERGES: [(&str, &str); 6] =
    [("B", "A"), ("BA", "A"), ("B", "BAA"), ("A", "A"), ("BA", "BA"), ("B", "B")];

/// Longest random prefix placed before a state when averaging over contexts.
pub const MAX_CONTEXT_PREFIX: usize = 9;

pub fn binary_alphabet() -> Alphabet {
    Alphabet::from_chars("AB").expect("two distinct symbols")
}

/// First-order chain with `P(A|A) = alpha`, `P(A|B) = beta`, `P(x_1 = A) = gamma`.
pub fn fig1_chain(alpha: f64, beta: f64, gamma: f64) -> Result<MarkovCharModel> {
    for (name, v) in [("alpha", alpha), ("beta", beta), ("gamma", gamma)] {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::InvalidArgument(format!("{name} = {v} must lie in (0, 1)")));
        }
    }
    MarkovCharModel::first_order(
        binary_alphabet(),
        &[gamma, 1.0 - gamma],
        &[&[alpha, 1.0 - alpha], &[beta, 1.0 - beta]],
    )
}

pub fn fig1_vocab() -> MpeVocabulary {
    MpeVocabulary::new(binary_alphabet(), &["A", "B", "AA"]).expect("static vocabulary")
}

pub fn markov3_mpe_vocab() -> MpeVocabulary {
    MpeVocabulary::new(binary_alphabet(), &MARKOV3_MPE_TOKENS).expect("static vocabulary")
}

pub fn markov3_bpe_vocab() -> BpeVocabulary {
    BpeVocabulary::new(binary_alphabet(), &MARKOV3_BPE_MERGES).expect("static merges")
}

/// Vocabulary used by `markov3` for `scheme`.
pub fn markov3_vocab(scheme: Scheme) -> Vocabulary {
    match scheme {
        Scheme::Mpe => markov3_mpe_vocab().into(),
        Scheme::Bpe => markov3_bpe_vocab().into(),
    }
}

/// Random third-order chain fixed by `chain_seed`.
pub fn markov3_chain(chain_seed: u64) -> Result<MarkovCharModel> {
    MarkovCharModel::random(binary_alphabet(), 3, seed::derive(chain_seed, seed::CHAIN))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ModelKind {
    Exact,
    Counts,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Exact => "exact",
            ModelKind::Counts => "counts",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "exact" => Some(ModelKind::Exact),
            "counts" => Some(ModelKind::Counts),
            _ => None,
        }
    }
}

/// One output record. `NaN` marks a value that could not be computed.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub experiment: String,
    pub scheme: Scheme,
    pub model: ModelKind,
    pub context: String,
    pub char: char,
    pub truth: f64,
    pub baseline: f64,
    pub corrected: f64,
    pub abs_err_baseline: f64,
    pub abs_err_corrected: f64,
}

impl ResultRow {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        experiment: &str,
        scheme: Scheme,
        model: ModelKind,
        context: &str,
        char: char,
        truth: f64,
        baseline: f64,
        corrected: f64,
    ) -> Self {
        Self {
            experiment: experiment.to_string(),
            scheme,
            model,
            context: context.to_string(),
            char,
            truth,
            baseline,
            corrected,
            abs_err_baseline: (baseline - truth).abs(),
            abs_err_corrected: (corrected - truth).abs(),
        }
    }
}

/// Token model selected for an experiment run.
pub enum ExperimentModel<'a> {
    Exact(ExactTokenLm<'a, Vocabulary>),
    Counts(CountTokenLm),
    /// Smoothed counts repaired by truncate-renormalization.
    SmoothedCounts(TruncRenormLm<'a, CountTokenLm, Vocabulary>),
}

impl<'a> ExperimentModel<'a> {
    pub fn exact(chain: &'a MarkovCharModel, vocab: &'a Vocabulary) -> Result<Self> {
        Ok(Self::Exact(ExactTokenLm::new(chain, vocab)?))
    }

    /// Wraps in truncate-renormalization whenever smoothing is positive.
    pub fn counts(lm: CountTokenLm, vocab: &'a Vocabulary) -> Self {
        if lm.smoothing() > 0.0 {
            Self::SmoothedCounts(TruncRenormLm::new(lm, vocab))
        } else {
            Self::Counts(lm)
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            Self::Exact(_) => ModelKind::Exact,
            _ => ModelKind::Counts,
        }
    }
}

impl TokenLm for ExperimentModel<'_> {
    fn vocab_size(&self) -> usize {
        match self {
            Self::Exact(m) => m.vocab_size(),
            Self::Counts(m) => m.vocab_size(),
            Self::SmoothedCounts(m) => m.vocab_size(),
        }
    }

    fn next_token_dist(&self, context: &[TokenId]) -> Result<TokenDistribution> {
        match self {
            Self::Exact(m) => m.next_token_dist(context),
            Self::Counts(m) => m.next_token_dist(context),
            Self::SmoothedCounts(m) => m.next_token_dist(context),
        }
    }
}

/// Truth, baseline and corrected estimate for one (context, char). The
/// baseline is `Err` when the model cannot condition on `encode(context)`,
/// which happens for exact models whenever that encoding has probability
/// zero (every continuation re-tokenizes it).
fn evaluate<L: TokenLm + ?Sized, T: Tokenizer + ?Sized>(
    chain: &MarkovCharModel,
    lm: &L,
    vocab: &T,
    context: &str,
    c: char,
) -> Result<(f64, Result<f64>, f64)> {
    let mut buf = [0u8; 4];
    let cs: &str = c.encode_utf8(&mut buf);
    let truth = chain.cond_block_prob(context, cs)?;
    let ctx_tokens = vocab.encode(context)?.into_ids();
    let baseline = baseline_next_char(lm, vocab, &ctx_tokens, c);
    let query = CorrectionQuery::new(context, cs, vocab.scheme())?;
    let corrected = corrected_cond_prob(lm, vocab, &query)?;
    Ok((truth, baseline, corrected))
}

fn value_or_nan(r: &Result<f64>) -> f64 {
    *r.as_ref().unwrap_or(&f64::NAN)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fig1Output {
    /// Next-token laws after `[]` and after each single token.
    pub token_table: Vec<(Vec<TokenId>, TokenDistribution)>,
    pub rows: Vec<ResultRow>,
}

pub fn run_fig1(alpha: f64, beta: f64, gamma: f64) -> Result<Fig1Output> {
    let chain = fig1_chain(alpha, beta, gamma)?;
    let vocab = fig1_vocab();
    let lm = ExactTokenLm::new(&chain, &vocab)?;
    let mut token_table = vec![(Vec::new(), lm.next_token_dist(&[])?)];
    for t in vocab.ids() {
        token_table.push((vec![t], lm.next_token_dist(&[t])?));
    }
    let mut rows = Vec::new();
    for ctx in FIG1_CONTEXTS {
        for &c in chain.alphabet().symbols() {
            let (truth, baseline, corrected) = evaluate(&chain, &lm, &vocab, ctx, c)?;
            let baseline = value_or_nan(&baseline);
            rows.push(ResultRow::new("fig1", Scheme::Mpe, ModelKind::Exact, ctx, c, truth, baseline, corrected));
        }
    }
    Ok(Fig1Output { token_table, rows })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Markov3Config {
    pub scheme: Scheme,
    pub model: ModelKind,
    /// Fixes the transition tensor.
    pub chain_seed: u64,
    /// Fixes training samples and evaluation contexts.
    pub seed: u64,
    pub num_sequences: usize,
    pub seq_length: usize,
    /// Count-model n-gram length.
    pub order: usize,
    pub smoothing: f64,
    /// Contexts averaged per state; `None` means 1 for the exact model and
    /// 100 for counts. With 1 the bare state is the context.
    pub contexts_per_state: Option<usize>,
}

impl Default for Markov3Config {
    fn default() -> Self {
        Self {
            scheme: Scheme::Mpe,
            model: ModelKind::Exact,
            chain_seed: 0,
            seed: 0,
            num_sequences: 10_000,
            seq_length: 256,
            order: 4,
            smoothing: 0.0,
            contexts_per_state: None,
        }
    }
}

impl Markov3Config {
    pub fn contexts_per_state(&self) -> usize {
        self.contexts_per_state.unwrap_or(match self.model {
            ModelKind::Exact => 1,
            ModelKind::Counts => 100,
        })
    }

    pub fn count_config(&self) -> CountConfig {
        CountConfig {
            num_sequences: self.num_sequences,
            seq_length: self.seq_length,
            order: self.order,
            smoothing: self.smoothing,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailedStage {
    /// Only the baseline average skips this context.
    Baseline,
    /// The context is skipped entirely.
    Corrected,
}

/// A sampled context the model could not answer.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextFailure {
    pub state: String,
    pub context: String,
    pub stage: FailedStage,
    pub error: Error,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Markov3Output {
    pub rows: Vec<ResultRow>,
    pub failures: Vec<ContextFailure>,
}

/// Evaluation contexts for state `index`: the bare state, or random prefixes
/// of length `0..=MAX_CONTEXT_PREFIX` followed by the state.
pub fn markov3_contexts(chain: &MarkovCharModel, config: &Markov3Config, index: usize) -> Vec<String> {
    let state = chain.alphabet().render(&chain.state_syms(index));
    let n = config.contexts_per_state();
    if n <= 1 {
        return vec![state];
    }
    let mut rng = seed::rng(seed::derive(seed::derive(config.seed, seed::CONTEXTS), index as u64));
    let symbols = chain.alphabet().symbols();
    (0..n)
        .map(|_| {
            let len = rng.random_range(0..=MAX_CONTEXT_PREFIX);
            let mut s: String = (0..len).map(|_| symbols[rng.random_range(0..symbols.len())]).collect();
            s.push_str(&state);
            s
        })
        .collect()
}

/// Rows for one state, averaged over its contexts. Independent of every
/// other state, so callers may evaluate states in parallel.
pub fn markov3_state_rows<L: TokenLm + ?Sized>(
    chain: &MarkovCharModel,
    vocab: &Vocabulary,
    lm: &L,
    kind: ModelKind,
    config: &Markov3Config,
    index: usize,
) -> Result<Markov3Output> {
    let alphabet = chain.alphabet();
    let state = alphabet.render(&chain.state_syms(index));
    let cached = CachedLm::new(lm);
    let a = alphabet.len();
    // Per character: truth and corrected sums over usable contexts, and
    // baseline sum over contexts where it is defined.
    let mut sums = vec![(0.0, 0.0); a];
    let mut base = vec![0.0; a];
    let (mut used, mut base_used) = (0usize, 0usize);
    let mut failures = Vec::new();
    'contexts: for ctx in markov3_contexts(chain, config, index) {
        let mut vals = Vec::with_capacity(a);
        for &c in alphabet.symbols() {
            match evaluate(chain, &cached, vocab, &ctx, c) {
                Ok(v) => vals.push(v),
                Err(error) if kind == ModelKind::Counts => {
                    let stage = FailedStage::Corrected;
                    failures.push(ContextFailure { state: state.clone(), context: ctx, stage, error });
                    continue 'contexts;
                }
                Err(e) => return Err(e),
            }
        }
        used += 1;
        let baseline_error = vals.iter().find_map(|v| v.1.as_ref().err().cloned());
        match baseline_error {
            None => {
                base_used += 1;
                for (b, v) in base.iter_mut().zip(&vals) {
                    *b += value_or_nan(&v.1);
                }
            }
            Some(error) => {
                let stage = FailedStage::Baseline;
                failures.push(ContextFailure { state: state.clone(), context: ctx.clone(), stage, error });
            }
        }
        for (s, v) in sums.iter_mut().zip(&vals) {
            s.0 += v.0;
            s.1 += v.2;
        }
    }
    let mean = |x: f64, n: usize| if n == 0 { f64::NAN } else { x / n as f64 };
    let rows = alphabet
        .symbols()
        .iter()
        .zip(sums.iter().zip(&base))
        .map(|(&c, (&(t, r), &b))| {
            ResultRow::new("markov3", vocab.scheme(), kind, &state, c, mean(t, used), mean(b, base_used), mean(r, used))
        })
        .collect();
    Ok(Markov3Output { rows, failures })
}

/// All 8 states x 2 characters with an already constructed model.
pub fn markov3_rows_with_model<L: TokenLm + ?Sized>(
    chain: &MarkovCharModel,
    vocab: &Vocabulary,
    lm: &L,
    kind: ModelKind,
    config: &Markov3Config,
) -> Result<Markov3Output> {
    let mut out = Markov3Output::default();
    for index in 0..chain.num_states() {
        let part = markov3_state_rows(chain, vocab, lm, kind, config, index)?;
        out.rows.extend(part.rows);
        out.failures.extend(part.failures);
    }
    Ok(out)
}

/// Sequential end-to-end run: builds the chain, fits the model if needed and
/// evaluates every state.
pub fn run_markov3(config: &Markov3Config) -> Result<Markov3Output> {
    let chain = markov3_chain(config.chain_seed)?;
    let vocab = markov3_vocab(config.scheme);
    let model = match config.model {
        ModelKind::Exact => ExperimentModel::exact(&chain, &vocab)?,
        ModelKind::Counts => {
            ExperimentModel::counts(CountTokenLm::fit(&chain, &vocab, &config.count_config())?, &vocab)
        }
    };
    markov3_rows_with_model(&chain, &vocab, &model, config.model, config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fig1_rows_match_truth() {
        let out = run_fig1(0.3, 0.5, 0.5).unwrap();
        assert_eq!(out.rows.len(), 10);
        for r in &out.rows {
            assert!(r.abs_err_corrected < 1e-12, "{r:?}");
        }
        let a_a = out.rows.iter().find(|r| r.context == "A" && r.char == 'A').unwrap();
        assert!((a_a.truth - 0.3).abs() < 1e-12);
        assert_eq!(a_a.baseline, 0.0);
        let aa_a = out.rows.iter().find(|r| r.context == "AA" && r.char == 'A').unwrap();
        assert!((aa_a.baseline - 0.3).abs() < 1e-12);
        let (ctx, first) = &out.token_table[0];
        assert!(ctx.is_empty());
        let v = fig1_vocab();
        assert!((first.get(v.token_by_text("A").unwrap()) - 0.35).abs() < 1e-12);
    }

    #[test]
    fn fig1_params_validated() {
        assert!(fig1_chain(0.0, 0.5, 0.5).is_err());
        assert!(fig1_chain(0.3, 1.0, 0.5).is_err());
    }

    #[test]
    fn contexts_end_in_state_and_are_deterministic() {
        let chain = markov3_chain(1).unwrap();
        let cfg = Markov3Config { model: ModelKind::Counts, seed: 4, ..Default::default() };
        let a = markov3_contexts(&chain, &cfg, 5);
        assert_eq!(a.len(), 100);
        assert_eq!(a, markov3_contexts(&chain, &cfg, 5));
        let state = chain.alphabet().render(&chain.state_syms(5));
        assert!(a.iter().all(|c| c.ends_with(&state) && c.len() <= state.len() + MAX_CONTEXT_PREFIX));
    }

    #[test]
    fn markov3_exact_bpe_baa_unbiased() {
        let cfg = Markov3Config { scheme: Scheme::Bpe, ..Default::default() };
        let out = run_markov3(&cfg).unwrap();
        assert_eq!(out.rows.len(), 16);
        for r in &out.rows {
            assert!(r.abs_err_corrected < 1e-9, "{r:?}");
            if r.context == "BAA" {
                assert!(r.abs_err_baseline < 1e-9, "{r:?}");
            }
        }
    }

    #[test]
    fn zero_mass_encoding_leaves_baseline_undefined() {
        // "BAA" encodes to [BA, A], but every continuation re-tokenizes it:
        // "BAAB.." starts with BAAB and "BAAA.." with BA, AA.
        let out = run_markov3(&Markov3Config::default()).unwrap();
        let baa: Vec<_> = out.rows.iter().filter(|r| r.context == "BAA").collect();
        assert_eq!(baa.len(), 2);
        for r in baa {
            assert!(r.baseline.is_nan() && r.abs_err_baseline.is_nan());
            assert!(r.abs_err_corrected < 1e-9, "{r:?}");
        }
        assert_eq!(out.failures.len(), 1);
        assert_eq!(out.failures[0].stage, FailedStage::Baseline);
        assert_eq!(out.failures[0].error.kind(), crate::ErrorKind::UndefinedConditional);
    }
}
