//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use proptest::prelude::*;
use tokenwise_core::experiments::{binary_alphabet, fig1_chain};
use tokenwise_core::{Alphabet, BpeVocabulary, MarkovCharModel, MpeVocabulary, TokenId, Tokenizer};

/// Every string over `symbols` of length `0..=max_len`, shortest first.
pub fn all_strings(symbols: &[char], max_len: usize) -> Vec<String> {
    let mut out = vec![String::new()];
    let mut frontier = vec![String::new()];
    for _ in 0..max_len {
        frontier = frontier.iter().flat_map(|s| symbols.iter().map(move |c| format!("{s}{c}"))).collect();
        out.extend(frontier.iter().cloned());
    }
    out
}

pub fn fig1() -> MarkovCharModel {
    fig1_chain(0.3, 0.5, 0.5).unwrap()
}

/// Random string over `symbols` with length in `len`.
pub fn string_over(symbols: &'static str, len: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = String> {
    let chars: Vec<char> = symbols.chars().collect();
    prop::collection::vec(prop::sample::select(chars), len).prop_map(|v| v.into_iter().collect())
}

/// Random maximum-prefix vocabulary over `AB` with up to six extra tokens of
/// length 2 to 4.
pub fn mpe_vocab() -> impl Strategy<Value = MpeVocabulary> {
    prop::collection::vec(string_over("AB", 2..=4), 0..=6).prop_map(|mut extra| {
        extra.sort();
        extra.dedup();
        MpeVocabulary::new(binary_alphabet(), &extra).unwrap()
    })
}

/// Random byte-pair vocabulary over `AB`: each rule joins two tokens that
/// already exist, skipping rules whose result is already a token.
pub fn bpe_vocab() -> impl Strategy<Value = BpeVocabulary> {
    prop::collection::vec((any::<prop::sample::Index>(), any::<prop::sample::Index>()), 0..=6).prop_map(|picks| {
        let mut texts: Vec<String> = vec!["A".into(), "B".into()];
        let mut merges: Vec<(String, String)> = Vec::new();
        for (l, r) in picks {
            let (l, r) = (l.get(&texts).clone(), r.get(&texts).clone());
            let joined = format!("{l}{r}");
            if joined.len() <= 4 && !texts.contains(&joined) {
                texts.push(joined);
                merges.push((l, r));
            }
        }
        BpeVocabulary::new(binary_alphabet(), &merges).unwrap()
    })
}

pub fn ab() -> Alphabet {
    binary_alphabet()
}

/// Checks both results of the prefix property for `x = s[..n]`. Let `k`
/// be the fewest leading tokens of `encode(s)` whose text `r` extends `x`.
/// Result 1: the first `k - 1` tokens of
/// `encode(s)` and `encode(x)` agree, and so does token `k` when `r = x`.
/// Result 2: `encode(x)[k-1..]` decodes to a prefix of `encode(s)[k-1]`.
pub fn prefix_stability<T: Tokenizer>(vocab: &T, s: &str, n: usize) -> Result<(), String> {
    let x = &s[..n];
    let ex = vocab.encode(x).unwrap().into_ids();
    let es = vocab.encode(s).unwrap().into_ids();
    let mut r_len = 0;
    let k = if n == 0 {
        0
    } else {
        1 + es
            .iter()
            .position(|&t| {
                r_len += vocab.token_text(t).len();
                r_len >= n
            })
            .unwrap()
    };
    let texts = |ids: &[TokenId]| vocab.texts_of(ids).join("|");
    let fail = |what: &str| Err(format!("{what}: s={s} [{}], x={x} [{}], k={k}", texts(&es), texts(&ex)));
    if k == 0 {
        return Ok(());
    }
    if ex.len() < k || es[..k - 1] != ex[..k - 1] {
        return fail("leading tokens differ");
    }
    if r_len == n && es[k - 1] != ex[k - 1] {
        return fail("token k differs although r = x");
    }
    let tail = vocab.decode(&ex[k - 1..]).unwrap();
    if !vocab.token_text(es[k - 1]).starts_with(&tail) {
        return fail("tail of encode(x) is not a prefix of token k");
    }
    Ok(())
}
