//! The oracle's token-prefix probability stops changing once the lookahead
//! slack reaches the longest token length, for both experiment vocabularies.

use tokenwise_core::experiments::{markov3_bpe_vocab, markov3_chain, markov3_mpe_vocab};
use tokenwise_core::oracle::{oracle_token_prefix_prob, OracleConfig};
use tokenwise_core::vocab::max_token_length;
use tokenwise_core::{MarkovCharModel, TokenId, Tokenizer};

fn all_strings(max_len: usize) -> Vec<String> {
    let mut out = vec![String::new()];
    let mut frontier = vec![String::new()];
    for _ in 0..max_len {
        frontier = frontier.iter().flat_map(|s| ["A", "B"].map(|c| format!("{s}{c}"))).collect();
        out.extend(frontier.iter().cloned());
    }
    out
}

fn check_horizon<T: Tokenizer>(chain: &MarkovCharModel, vocab: &T, max_len: usize) {
    let m = max_token_length(vocab);
    let mut seen: Vec<Vec<TokenId>> = Vec::new();
    for s in all_strings(max_len) {
        let ids = vocab.encode(&s).unwrap().into_ids();
        for k in 0..=ids.len() {
            let p = ids[..k].to_vec();
            if !seen.contains(&p) {
                seen.push(p);
            }
        }
    }
    for tokens in &seen {
        let at_m = oracle_token_prefix_prob(chain, vocab, tokens, &OracleConfig::with_slack(m)).unwrap();
        let wide = oracle_token_prefix_prob(chain, vocab, tokens, &OracleConfig::with_slack(m + 3)).unwrap();
        assert!((at_m - wide).abs() < 1e-12, "{tokens:?}: slack {m} gives {at_m}, slack {} gives {wide}", m + 3);
    }
}

#[test]
fn bpe_slack_m_is_enough() {
    for seed in 0..2 {
        check_horizon(&markov3_chain(seed).unwrap(), &markov3_bpe_vocab(), 6);
    }
}

#[test]
fn mpe_slack_m_is_enough() {
    check_horizon(&markov3_chain(0).unwrap(), &markov3_mpe_vocab(), 6);
}
