//! Parallel experiment execution and run metadata.

use rayon::prelude::*;
use serde_json::{json, Map, Value};
use tokenwise_core::experiments::{
    markov3_chain, markov3_state_rows, markov3_vocab, ExperimentModel, FailedStage, Markov3Config, Markov3Output,
    ModelKind,
};
use tokenwise_core::toklm::{count_sequence, CountConfig, CountTables};
use tokenwise_core::{CountTokenLm, MarkovCharModel, Tokenizer, Vocabulary};

use crate::error::{AppError, Result};

/// Sequences handled per rayon task during fitting.
const FIT_CHUNK: usize = 256;

pub fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| AppError::Usage(format!("cannot start {jobs} worker threads: {e}")))
}

/// Same counts as [`CountTokenLm::fit`]; sequence `i` always draws from its
/// own derived seed and integer counts merge exactly, so the result does
/// not depend on scheduling.
pub fn fit_counts_parallel<T: Tokenizer + Sync>(
    chain: &MarkovCharModel,
    vocab: &T,
    config: &CountConfig,
    pool: &rayon::ThreadPool,
) -> Result<CountTokenLm> {
    config.validate(vocab)?;
    let n = config.num_sequences;
    let chunks: Vec<(usize, usize)> = (0..n).step_by(FIT_CHUNK).map(|s| (s, (s + FIT_CHUNK).min(n))).collect();
    let tables = pool.install(|| {
        chunks
            .into_par_iter()
            .map(|(lo, hi)| {
                let mut t = CountTables::new(config.order, vocab.len());
                for i in lo..hi {
                    count_sequence(chain, vocab, config, i as u64, &mut t);
                }
                t
            })
            .reduce(
                || CountTables::new(config.order, vocab.len()),
                |mut a, b| {
                    a.merge(b);
                    a
                },
            )
    });
    log::info!(
        "fitted {} sequences: {} contexts, {} observations",
        n,
        tables.num_contexts(),
        tables.total_observations()
    );
    Ok(CountTokenLm::from_tables(tables, config.smoothing))
}

/// Evaluate every state of a prepared model, states in parallel, rows in
/// state order.
pub fn markov3_rows_parallel(
    chain: &MarkovCharModel,
    vocab: &Vocabulary,
    model: &ExperimentModel<'_>,
    config: &Markov3Config,
    pool: &rayon::ThreadPool,
) -> Result<Markov3Output> {
    let parts = pool.install(|| {
        (0..chain.num_states())
            .into_par_iter()
            .map(|i| markov3_state_rows(chain, vocab, model, model.kind(), config, i))
            .collect::<Vec<_>>()
    });
    let mut out = Markov3Output::default();
    for part in parts {
        let part = part?;
        out.rows.extend(part.rows);
        out.failures.extend(part.failures);
    }
    Ok(out)
}

pub struct Markov3Run {
    pub chain: MarkovCharModel,
    pub output: Markov3Output,
    pub metadata: Map<String, Value>,
}

pub fn run_markov3(config: &Markov3Config, jobs: usize) -> Result<Markov3Run> {
    let pool = thread_pool(jobs)?;
    let chain = markov3_chain(config.chain_seed)?;
    let vocab = markov3_vocab(config.scheme);
    let model = match config.model {
        ModelKind::Exact => ExperimentModel::exact(&chain, &vocab)?,
        ModelKind::Counts => {
            let lm = fit_counts_parallel(&chain, &vocab, &config.count_config(), &pool)?;
            ExperimentModel::counts(lm, &vocab)
        }
    };
    let output = markov3_rows_parallel(&chain, &vocab, &model, config, &pool)?;
    for f in &output.failures {
        log::debug!("state {}: context {:?} ({:?}) skipped: {}", f.state, f.context, f.stage, f.error);
    }
    let metadata = markov3_metadata(config, &chain, &output);
    Ok(Markov3Run { chain, output, metadata })
}

pub const SEED_RULE: &str = "derive(seed, stream) = splitmix64(seed + (stream + 1) * 0x9E3779B97F4A7C15); \
chain tensor from derive(chain_seed, 0); contexts for state i from derive(derive(seed, 1), i); \
training sequence i from derive(derive(seed, 2), i)";

pub fn markov3_metadata(config: &Markov3Config, chain: &MarkovCharModel, output: &Markov3Output) -> Map<String, Value> {
    let alphabet = chain.alphabet();
    let stationary: Map<String, Value> =
        (0..chain.num_states()).map(|i| (alphabet.render(&chain.state_syms(i)), json!(chain.initial()[i]))).collect();
    let mut m = Map::new();
    m.insert("experiment".into(), json!("markov3"));
    m.insert("scheme".into(), json!(config.scheme.as_str()));
    m.insert("model".into(), json!(config.model.as_str()));
    m.insert("chain_seed".into(), json!(config.chain_seed));
    m.insert("seed".into(), json!(config.seed));
    m.insert("seed_rule".into(), json!(SEED_RULE));
    m.insert("contexts_per_state".into(), json!(config.contexts_per_state()));
    if config.model == ModelKind::Counts {
        m.insert("num_sequences".into(), json!(config.num_sequences));
        m.insert("seq_length".into(), json!(config.seq_length));
        m.insert("order".into(), json!(config.order));
        m.insert("smoothing".into(), json!(config.smoothing));
    }
    m.insert("initial".into(), json!({ "kind": "stationary", "values": stationary }));
    let count = |stage| output.failures.iter().filter(|f| f.stage == stage).count();
    m.insert("skipped_contexts".into(), json!(count(FailedStage::Corrected)));
    m.insert("baseline_undefined_contexts".into(), json!(count(FailedStage::Baseline)));
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use tokenwise_core::experiments::{fig1_chain, fig1_vocab};

    #[test]
    fn parallel_fit_equals_sequential() {
        let chain = fig1_chain(0.3, 0.5, 0.5).unwrap();
        let vocab = fig1_vocab();
        let cfg = CountConfig { num_sequences: 1000, seq_length: 64, order: 3, smoothing: 0.0, seed: 5 };
        let seq = CountTokenLm::fit(&chain, &vocab, &cfg).unwrap();
        for jobs in [1, 3] {
            let par = fit_counts_parallel(&chain, &vocab, &cfg, &thread_pool(jobs).unwrap()).unwrap();
            assert_eq!(par, seq);
        }
    }
}
