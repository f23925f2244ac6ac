//! Command-line interface.
//!
//! Exit status is 0 on success, 1 on domain errors (reported on stderr as a
//! single `ERR:<kind>: message` line) and 2 on usage errors.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};
use tokenwise_core::correct::{baseline_next_block, corrected_cond_prob, CorrectionQuery};
use tokenwise_core::experiments::{markov3_chain, run_fig1, ExperimentModel, Markov3Config, ModelKind};
use tokenwise_core::oracle::{oracle_cond_block, oracle_cond_string, OracleConfig};
use tokenwise_core::toklm::CountConfig;
use tokenwise_core::vocab::{compute_vstar, max_token_length};
use tokenwise_core::{ErrorKind, ExactTokenLm, MarkovCharModel, Scheme, TokenId, TokenLm, Tokenizer, Vocabulary};

use crate::error::{AppError, Result};
use crate::formats::{load_chain, load_vocab, save_chain};
use crate::results::{self, Format};
use crate::runner::{self, SEED_RULE};

const SEED_HELP: &str = "All randomness flows from --seed. Sub-seeds: \
derive(seed, stream) = splitmix64(seed + (stream + 1) * 0x9E3779B97F4A7C15) with streams \
0 = chain tensor (from --chain-seed, default --seed), 1 = evaluation contexts (then state index), \
2 = training sequences (then sequence index).";

#[derive(Debug, Parser)]
#[command(name = "tokenwise", version, about = "Subword tokenization bias and its exact correction", after_help = SEED_HELP)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SchemeArg {
    Mpe,
    Bpe,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Mpe => Scheme::Mpe,
            SchemeArg::Bpe => Scheme::Bpe,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModelArg {
    Exact,
    Counts,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Exact => ModelKind::Exact,
            ModelArg::Counts => ModelKind::Counts,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }
    }
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

#[derive(Debug, Args)]
struct CountArgs {
    /// Seed for training samples and evaluation contexts.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of sampled training sequences.
    #[arg(long, default_value_t = 10_000)]
    sequences: usize,
    /// Characters per training sequence.
    #[arg(long, default_value_t = 256)]
    seq_length: usize,
    /// Token n-gram length of the count model.
    #[arg(long, default_value_t = 4)]
    order: usize,
    /// Additive smoothing; positive values enable truncate-renormalization.
    #[arg(long, default_value_t = 0.0)]
    smoothing: f64,
    /// Worker threads.
    #[arg(long, default_value_t = default_jobs())]
    jobs: usize,
}

impl CountArgs {
    fn config(&self) -> CountConfig {
        CountConfig {
            num_sequences: self.sequences,
            seq_length: self.seq_length,
            order: self.order,
            smoothing: self.smoothing,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Encode a string; prints a JSON array of token texts.
    Encode {
        #[arg(long)]
        vocab: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        text: String,
    },
    /// Check whether a token sequence is a valid encoding; prints true or false.
    Validate {
        #[arg(long)]
        vocab: PathBuf,
        /// Comma-separated token texts, e.g. `A,A`.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        tokens: Vec<String>,
    },
    /// Print the tokens that are substrings of no other token.
    Vstar {
        #[arg(long)]
        vocab: PathBuf,
    },
    /// Exact next-token distributions for every positive-probability context
    /// of up to `--depth` tokens, keyed by `|`-joined token texts.
    Convert {
        #[arg(long)]
        vocab: PathBuf,
        #[arg(long)]
        chain: PathBuf,
        #[arg(long, default_value_t = 1)]
        depth: usize,
        /// Characters aggregated past the context (default: longest token length).
        #[arg(long)]
        slack: Option<usize>,
    },
    /// Truth, baseline and corrected probability of a continuation.
    Correct {
        #[command(flatten)]
        query: QueryArgs,
        #[arg(long, value_enum, default_value_t = ModelArg::Exact)]
        model: ModelArg,
        #[command(flatten)]
        counts: CountArgs,
    },
    /// The same quantities as `correct`, computed by brute-force enumeration.
    Oracle {
        #[command(flatten)]
        query: QueryArgs,
        /// Characters enumerated past each token sequence (default: longest token length).
        #[arg(long)]
        slack: Option<usize>,
    },
    /// Run a scripted experiment.
    Experiment {
        #[command(subcommand)]
        which: ExperimentCommand,
    },
}

#[derive(Debug, Args)]
struct QueryArgs {
    #[arg(long)]
    vocab: PathBuf,
    #[arg(long)]
    chain: PathBuf,
    /// Must match the vocabulary file's type when given.
    #[arg(long, value_enum)]
    scheme: Option<SchemeArg>,
    #[arg(long, default_value = "", allow_hyphen_values = true)]
    context: String,
    #[arg(long, allow_hyphen_values = true)]
    continuation: String,
}

#[derive(Debug, Args)]
struct OutputArgs {
    /// Output file; stdout when omitted. CSV files get a `.meta.json` sidecar.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
}

#[derive(Debug, Subcommand)]
enum ExperimentCommand {
    /// Two-state first-order chain with V = {A, B, AA}.
    Fig1 {
        #[arg(long, default_value_t = 0.3)]
        alpha: f64,
        #[arg(long, default_value_t = 0.5)]
        beta: f64,
        #[arg(long, default_value_t = 0.5)]
        gamma: f64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Random third-order binary chain, eight states by two characters.
    #[command(after_help = SEED_HELP)]
    Markov3 {
        #[arg(long, value_enum, default_value_t = SchemeArg::Mpe)]
        scheme: SchemeArg,
        #[arg(long, value_enum, default_value_t = ModelArg::Exact)]
        model: ModelArg,
        /// Seed for the transition tensor (default: --seed).
        #[arg(long)]
        chain_seed: Option<u64>,
        /// Contexts averaged per state (default: 1 for exact, 100 for counts).
        #[arg(long)]
        contexts_per_state: Option<usize>,
        /// Also write the generated chain as a chain file.
        #[arg(long)]
        chain_out: Option<PathBuf>,
        #[command(flatten)]
        counts: CountArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
}

/// Parse `args` and run; returns the process exit status.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli.command, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let line = e.to_string().replace('\n', " ");
            let _ = writeln!(stderr, "ERR:{}: {}", e.kind(), line);
            e.exit_code()
        }
    }
}

fn print_json(stdout: &mut dyn Write, value: &Value) -> Result<()> {
    writeln!(stdout, "{value}").map_err(|e| AppError::io("<stdout>", e))
}

fn check_scheme(vocab: &Vocabulary, scheme: Option<SchemeArg>) -> Result<()> {
    match scheme {
        Some(s) if Scheme::from(s) != vocab.scheme() => Err(AppError::Usage(format!(
            "--scheme {} does not match the {} vocabulary file",
            Scheme::from(s).as_str(),
            vocab.scheme().as_str()
        ))),
        _ => Ok(()),
    }
}

fn check_alphabets(vocab: &Vocabulary, chain: &MarkovCharModel) -> Result<()> {
    if vocab.alphabet() != chain.alphabet() {
        return Err(AppError::Usage("vocabulary and chain alphabets differ".to_string()));
    }
    Ok(())
}

fn dispatch(command: Command, stdout: &mut dyn Write) -> Result<()> {
    match command {
        Command::Encode { vocab, text } => {
            let v = load_vocab(&vocab)?;
            let enc = v.encode(&text)?;
            print_json(stdout, &json!(v.texts_of(enc.ids())))
        }
        Command::Validate { vocab, tokens } => {
            let v = load_vocab(&vocab)?;
            let texts: Vec<&str> = tokens.iter().map(String::as_str).filter(|t| !t.is_empty()).collect();
            let ids = v.ids_from_texts(&texts)?;
            print_json(stdout, &json!(v.is_valid(&ids)))
        }
        Command::Vstar { vocab } => {
            let v = load_vocab(&vocab)?;
            let vs = compute_vstar(&v);
            print_json(stdout, &json!(v.texts_of(&vs.ids().collect::<Vec<_>>())))
        }
        Command::Convert { vocab, chain, depth, slack } => {
            let v = load_vocab(&vocab)?;
            let c = load_chain(&chain)?;
            check_alphabets(&v, &c)?;
            let mut lm = ExactTokenLm::new(&c, &v)?;
            if let Some(s) = slack {
                lm = lm.with_slack(s);
            }
            print_json(stdout, &Value::Object(convert_table(&lm, &v, depth)?))
        }
        Command::Correct { query, model, counts } => {
            let v = load_vocab(&query.vocab)?;
            check_scheme(&v, query.scheme)?;
            let c = load_chain(&query.chain)?;
            check_alphabets(&v, &c)?;
            let m = match ModelKind::from(model) {
                ModelKind::Exact => ExperimentModel::exact(&c, &v)?,
                ModelKind::Counts => {
                    let pool = runner::thread_pool(counts.jobs)?;
                    ExperimentModel::counts(runner::fit_counts_parallel(&c, &v, &counts.config(), &pool)?, &v)
                }
            };
            let truth = c.cond_block_prob(&query.context, &query.continuation)?;
            let ctx = v.encode(&query.context)?.into_ids();
            let baseline = soft_baseline(baseline_next_block(&m, &v, &ctx, &query.continuation))?;
            let q = CorrectionQuery::new(query.context.as_str(), query.continuation.as_str(), v.scheme())?;
            let corrected = corrected_cond_prob(&m, &v, &q)?;
            print_json(stdout, &report(&query, v.scheme(), json!(m.kind().as_str()), truth, baseline, corrected))
        }
        Command::Oracle { query, slack } => {
            let v = load_vocab(&query.vocab)?;
            check_scheme(&v, query.scheme)?;
            let c = load_chain(&query.chain)?;
            check_alphabets(&v, &c)?;
            let cfg = OracleConfig { slack };
            let truth = c.cond_block_prob(&query.context, &query.continuation)?;
            let ctx = v.encode(&query.context)?.into_ids();
            let baseline = soft_baseline(oracle_cond_block(&c, &v, &ctx, &query.continuation, &cfg))?;
            let corrected = oracle_cond_string(&c, &v, &query.context, &query.continuation, &cfg)?;
            let mut out = report(&query, v.scheme(), json!("oracle"), truth, baseline, corrected);
            out["slack"] = json!(slack.unwrap_or_else(|| max_token_length(&v)));
            print_json(stdout, &out)
        }
        Command::Experiment { which } => experiment(which, stdout),
    }
}

type Baseline = std::result::Result<f64, tokenwise_core::Error>;

/// The baseline conditions on `encode(context)`, which can have probability
/// zero (or be unseen by a count model) while the character context is fine.
/// Those cases are reported in the output instead of failing the command.
fn soft_baseline(r: tokenwise_core::Result<f64>) -> Result<Baseline> {
    match r {
        Err(e) if matches!(e.kind(), ErrorKind::UndefinedConditional | ErrorKind::UnseenContext) => Ok(Err(e)),
        Err(e) => Err(e.into()),
        Ok(v) => Ok(Ok(v)),
    }
}

fn report(query: &QueryArgs, scheme: Scheme, model: Value, truth: f64, baseline: Baseline, corrected: f64) -> Value {
    let mut out = json!({
        "scheme": scheme.as_str(),
        "model": model,
        "context": query.context,
        "continuation": query.continuation,
        "truth": truth,
        "baseline": Value::Null,
        "corrected": corrected,
        "abs_err_baseline": Value::Null,
        "abs_err_corrected": (corrected - truth).abs(),
    });
    match baseline {
        Ok(b) => {
            out["baseline"] = json!(b);
            out["abs_err_baseline"] = json!((b - truth).abs());
        }
        Err(e) => out["baseline_error"] = json!(format!("{}: {e}", e.kind().as_str())),
    }
    out
}

fn context_key<T: Tokenizer>(vocab: &T, ctx: &[TokenId]) -> String {
    vocab.texts_of(ctx).join("|")
}

fn distribution_json<T: Tokenizer>(vocab: &T, probs: &tokenwise_core::TokenDistribution) -> Value {
    Value::Object(probs.iter().map(|(t, p)| (vocab.token_text(t).to_string(), json!(p))).collect())
}

fn convert_table<L: TokenLm, T: Tokenizer>(lm: &L, vocab: &T, depth: usize) -> Result<Map<String, Value>> {
    let mut table = Map::new();
    let mut frontier: Vec<Vec<TokenId>> = vec![Vec::new()];
    for level in 0..=depth {
        let mut next = Vec::new();
        for ctx in frontier {
            let dist = lm.next_token_dist(&ctx)?;
            if level < depth {
                for (t, p) in dist.iter() {
                    if p > 0.0 {
                        let mut c = ctx.clone();
                        c.push(t);
                        next.push(c);
                    }
                }
            }
            table.insert(context_key(vocab, &ctx), distribution_json(vocab, &dist));
        }
        frontier = next;
    }
    Ok(table)
}

fn write_rows(
    rows: &[tokenwise_core::experiments::ResultRow],
    output: &OutputArgs,
    metadata: &Map<String, Value>,
    stdout: &mut dyn Write,
) -> Result<()> {
    let format = Format::from(output.format);
    match &output.out {
        Some(path) => {
            results::emit_results(rows, format, path, metadata)?;
            log::info!("wrote {} rows to {}", rows.len(), path.display());
            Ok(())
        }
        None => {
            let text = match format {
                Format::Csv => results::csv_string(rows),
                Format::Json => results::json_string(rows, metadata),
            };
            stdout.write_all(text.as_bytes()).map_err(|e| AppError::io("<stdout>", e))
        }
    }
}

fn experiment(which: ExperimentCommand, stdout: &mut dyn Write) -> Result<()> {
    match which {
        ExperimentCommand::Fig1 { alpha, beta, gamma, output } => {
            let out = run_fig1(alpha, beta, gamma)?;
            let vocab = tokenwise_core::experiments::fig1_vocab();
            let table: Map<String, Value> = out
                .token_table
                .iter()
                .map(|(ctx, d)| (context_key(&vocab, ctx), distribution_json(&vocab, d)))
                .collect();
            let mut meta = Map::new();
            meta.insert("experiment".into(), json!("fig1"));
            meta.insert("alpha".into(), json!(alpha));
            meta.insert("beta".into(), json!(beta));
            meta.insert("gamma".into(), json!(gamma));
            meta.insert("token_table".into(), Value::Object(table));
            write_rows(&out.rows, &output, &meta, stdout)
        }
        ExperimentCommand::Markov3 { scheme, model, chain_seed, contexts_per_state, chain_out, counts, output } => {
            let config = Markov3Config {
                scheme: scheme.into(),
                model: model.into(),
                chain_seed: chain_seed.unwrap_or(counts.seed),
                seed: counts.seed,
                num_sequences: counts.sequences,
                seq_length: counts.seq_length,
                order: counts.order,
                smoothing: counts.smoothing,
                contexts_per_state,
            };
            log::info!("markov3 {:?}; {}", config, SEED_RULE);
            if let Some(path) = &chain_out {
                save_chain(path, &markov3_chain(config.chain_seed)?)?;
            }
            let run = runner::run_markov3(&config, counts.jobs)?;
            if !run.output.failures.is_empty() {
                log::warn!("{} sampled contexts skipped", run.output.failures.len());
            }
            write_rows(&run.output.rows, &output, &run.metadata, stdout)
        }
    }
}
