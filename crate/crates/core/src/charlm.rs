//! Exact k-th order Markov character sources.
//!
//! A model is the ground-truth prefix measure: [`MarkovCharModel::prefix_prob`]
//! is the probability that an infinite sample starts with a given string.
//! There is no end-of-sequence symbol.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::seed;
use crate::vocab::{Alphabet, Sym};

/// Tolerance for row-stochasticity checks.
pub const STOCHASTIC_TOL: f64 = 1e-9;

/// k-th order Markov chain with a joint initial law over the first k symbols.
///
/// States are length-`order` strings indexed big-endian in base `|A|`
/// (first character most significant).
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovCharModel {
    alphabet: Alphabet,
    order: usize,
    initial: Vec<f64>,
    transition: Vec<f64>,
}

fn check_distribution(what: &str, probs: &[f64]) -> Result<()> {
    if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::InvalidChain(format!("{what}: entry {p} outside [0, 1]")));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > STOCHASTIC_TOL {
        return Err(Error::InvalidChain(format!("{what}: sums to {sum}")));
    }
    Ok(())
}

impl MarkovCharModel {
    /// `initial` has `|A|^order` entries; `transition` has `|A|^order` rows of
    /// `|A|` entries, flattened row-major.
    pub fn new(alphabet: Alphabet, order: usize, initial: Vec<f64>, transition: Vec<f64>) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidChain("order must be at least 1".into()));
        }
        let a = alphabet.len();
        let states = a
            .checked_pow(order as u32)
            .filter(|&s| s <= 1 << 24)
            .ok_or_else(|| Error::InvalidChain("state space too large".into()))?;
        if initial.len() != states {
            return Err(Error::InvalidChain(format!("initial has {} entries, expected {states}", initial.len())));
        }
        if transition.len() != states * a {
            return Err(Error::InvalidChain(format!(
                "transition has {} entries, expected {}",
                transition.len(),
                states * a
            )));
        }
        check_distribution("initial", &initial)?;
        for (i, row) in transition.chunks(a).enumerate() {
            let name = alphabet.render(&state_syms(i, a, order));
            check_distribution(&format!("transition row {name:?}"), row)?;
        }
        Ok(Self { alphabet, order, initial, transition })
    }

    /// First-order chain from an initial vector and per-symbol rows.
    pub fn first_order(alphabet: Alphabet, initial: &[f64], rows: &[&[f64]]) -> Result<Self> {
        let transition = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self::new(alphabet, 1, initial.to_vec(), transition)
    }

    /// Chain whose initial law is the stationary distribution over
    /// length-`order` states.
    pub fn with_stationary_initial(alphabet: Alphabet, order: usize, transition: Vec<f64>) -> Result<Self> {
        let a = alphabet.len();
        let states = a.pow(order as u32);
        let uniform = vec![1.0 / states as f64; states];
        let mut model = Self::new(alphabet, order, uniform, transition)?;
        model.initial = model.stationary_distribution();
        Ok(model)
    }

    /// Random chain: every transition entry drawn uniformly from (0, 1), rows
    /// normalized, stationary initial law.
    pub fn random(alphabet: Alphabet, order: usize, seed: u64) -> Result<Self> {
        let a = alphabet.len();
        let states = a.checked_pow(order as u32).ok_or_else(|| Error::InvalidChain("state space too large".into()))?;
        let mut rng = seed::rng(seed);
        let mut transition = Vec::with_capacity(states * a);
        for _ in 0..states {
            let row: Vec<f64> = (0..a).map(|_| rng.random_range(1e-3..1.0)).collect();
            let z: f64 = row.iter().sum();
            transition.extend(row.iter().map(|p| p / z));
        }
        Self::with_stationary_initial(alphabet, order, transition)
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn num_states(&self) -> usize {
        self.initial.len()
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn state_index(&self, syms: &[Sym]) -> usize {
        debug_assert_eq!(syms.len(), self.order);
        let a = self.alphabet.len();
        syms.iter().fold(0, |acc, &s| acc * a + s as usize)
    }

    pub fn state_syms(&self, index: usize) -> Vec<Sym> {
        state_syms(index, self.alphabet.len(), self.order)
    }

    /// Transition row for a state given by its symbols.
    pub fn row(&self, state: &[Sym]) -> &[f64] {
        let a = self.alphabet.len();
        let i = self.state_index(state);
        &self.transition[i * a..(i + 1) * a]
    }

    pub fn transition(&self, state: &[Sym], next: Sym) -> f64 {
        self.row(state)[next as usize]
    }

    /// Next-character law after `context`, which must hold at least `order`
    /// characters.
    pub fn next_char_dist(&self, context: &str) -> Result<Vec<f64>> {
        let syms = self.alphabet.to_syms(context)?;
        if syms.len() < self.order {
            return Err(Error::ContextTooShort { len: syms.len(), order: self.order });
        }
        Ok(self.row(&syms[syms.len() - self.order..]).to_vec())
    }

    pub fn prefix_prob(&self, s: &str) -> Result<f64> {
        Ok(self.prefix_prob_syms(&self.alphabet.to_syms(s)?))
    }

    pub fn prefix_prob_syms(&self, s: &[Sym]) -> f64 {
        let k = self.order;
        let a = self.alphabet.len();
        if s.len() < k {
            let free = k - s.len();
            let width = a.pow(free as u32);
            let base = s.iter().fold(0, |acc, &c| acc * a + c as usize) * width;
            return self.initial[base..base + width].iter().sum();
        }
        let mut p = self.initial[self.state_index(&s[..k])];
        for j in k..s.len() {
            if p == 0.0 {
                break;
            }
            p *= self.transition(&s[j - k..j], s[j]);
        }
        p
    }

    /// `P(block | prefix)`; conditioning on a zero-probability prefix is an error.
    pub fn cond_block_prob(&self, prefix: &str, block: &str) -> Result<f64> {
        let prefix = self.alphabet.to_syms(prefix)?;
        let block = self.alphabet.to_syms(block)?;
        self.cond_block_prob_syms(&prefix, &block)
    }

    pub fn cond_block_prob_syms(&self, prefix: &[Sym], block: &[Sym]) -> Result<f64> {
        let den = self.prefix_prob_syms(prefix);
        if den == 0.0 {
            return Err(Error::UndefinedConditional(format!(
                "prefix {:?} has probability zero",
                self.alphabet.render(prefix)
            )));
        }
        let mut joined = prefix.to_vec();
        joined.extend_from_slice(block);
        Ok(self.prefix_prob_syms(&joined) / den)
    }

    /// Conditional of `block` given `prefix` under a chain whose prefix is
    /// already known to have positive mass; only the last `order` characters
    /// of `prefix` matter once it is at least that long.
    pub(crate) fn cond_block_prob_fast(&self, prefix: &[Sym], block: &[Sym]) -> Result<f64> {
        let k = self.order;
        if prefix.len() < k {
            return self.cond_block_prob_syms(prefix, block);
        }
        let mut window: Vec<Sym> = prefix[prefix.len() - k..].to_vec();
        let mut p = 1.0;
        for &c in block {
            p *= self.transition(&window[window.len() - k..], c);
            if p == 0.0 {
                return Ok(0.0);
            }
            window.push(c);
        }
        Ok(p)
    }

    /// Ancestral sample of `length >= order` symbols.
    pub fn sample_syms<R: Rng + ?Sized>(&self, length: usize, rng: &mut R) -> Vec<Sym> {
        let k = self.order;
        let a = self.alphabet.len();
        let mut out = Vec::with_capacity(length.max(k));
        let start = sample_index(&self.initial, rng);
        out.extend(self.state_syms(start));
        while out.len() < length {
            let state = self.state_index(&out[out.len() - k..]);
            let next = sample_index(&self.transition[state * a..(state + 1) * a], rng);
            out.push(next as Sym);
        }
        out.truncate(length.max(k));
        out
    }

    /// Deterministic sample of `length` characters from `seed`.
    pub fn sample_string(&self, length: usize, seed: u64) -> Result<String> {
        if length < self.order {
            return Err(Error::InvalidArgument(format!(
                "sample length {length} is shorter than the order {}",
                self.order
            )));
        }
        let mut rng = seed::rng(seed);
        Ok(self.alphabet.render(&self.sample_syms(length, &mut rng)))
    }

    /// Stationary law over length-`order` states (power iteration).
    pub fn stationary_distribution(&self) -> Vec<f64> {
        let a = self.alphabet.len();
        let n = self.num_states();
        let mut pi = vec![1.0 / n as f64; n];
        let mut next = vec![0.0; n];
        for _ in 0..100_000 {
            next.iter_mut().for_each(|x| *x = 0.0);
            for (s, &mass) in pi.iter().enumerate() {
                if mass == 0.0 {
                    continue;
                }
                let shifted = (s * a) % n;
                for c in 0..a {
                    next[shifted + c] += mass * self.transition[s * a + c];
                }
            }
            let z: f64 = next.iter().sum();
            next.iter_mut().for_each(|x| *x /= z);
            let delta: f64 = pi.iter().zip(&next).map(|(x, y)| (x - y).abs()).sum();
            core::mem::swap(&mut pi, &mut next);
            if delta < 1e-16 {
                break;
            }
        }
        pi
    }

    /// Stationary probability of each symbol.
    pub fn stationary_symbol_probs(&self) -> Vec<f64> {
        let a = self.alphabet.len();
        let mut out = vec![0.0; a];
        for (s, p) in self.stationary_distribution().into_iter().enumerate() {
            out[s % a] += p;
        }
        out
    }
}

fn state_syms(mut index: usize, a: usize, order: usize) -> Vec<Sym> {
    let mut out = vec![0 as Sym; order];
    for slot in out.iter_mut().rev() {
        *slot = (index % a) as Sym;
        index /= a;
    }
    out
}

fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // Rounding left a sliver above the last cumulative sum.
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}
