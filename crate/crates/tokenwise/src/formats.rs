//! JSON vocabulary and chain files.
//!
//! ```json
//! {"type":"mpe","alphabet":["A","B"],"tokens":["AA","A","B"]}
//! {"type":"bpe","alphabet":["A","B"],"merges":[["B","A"],["BA","A"]]}
//! {"order":1,"alphabet":["A","B"],"initial":{"A":0.5,"B":0.5},
//!  "transition":{"A":{"A":0.3,"B":0.7},"B":{"A":0.5,"B":0.5}}}
//! ```
//!
//! Chain `initial` may also be the string `"stationary"`. Omitted table
//! entries are zero; stochasticity is enforced within `1e-9`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use tokenwise_core::{Alphabet, BpeVocabulary, Error, MarkovCharModel, MpeVocabulary, Tokenizer, Vocabulary};

use crate::error::{AppError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", try_from = "RawVocabFile")]
pub enum VocabFile {
    Mpe { alphabet: Vec<String>, tokens: Vec<String> },
    Bpe { alphabet: Vec<String>, merges: Vec<(String, String)> },
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "lowercase")]
enum VocabKind {
    Mpe,
    Bpe,
}

/// Flat form so that parse errors keep their line and column.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVocabFile {
    #[serde(rename = "type")]
    kind: VocabKind,
    alphabet: Vec<String>,
    tokens: Option<Vec<String>>,
    merges: Option<Vec<(String, String)>>,
}

impl TryFrom<RawVocabFile> for VocabFile {
    type Error = String;

    fn try_from(raw: RawVocabFile) -> std::result::Result<Self, String> {
        match (raw.kind, raw.tokens, raw.merges) {
            (VocabKind::Mpe, Some(tokens), None) => Ok(VocabFile::Mpe { alphabet: raw.alphabet, tokens }),
            (VocabKind::Bpe, None, Some(merges)) => Ok(VocabFile::Bpe { alphabet: raw.alphabet, merges }),
            (VocabKind::Mpe, _, Some(_)) => Err("field merges: not allowed for type \"mpe\"".to_string()),
            (VocabKind::Bpe, Some(_), _) => Err("field tokens: not allowed for type \"bpe\"".to_string()),
            (VocabKind::Mpe, None, None) => Err("field tokens: missing for type \"mpe\"".to_string()),
            (VocabKind::Bpe, None, None) => Err("field merges: missing for type \"bpe\"".to_string()),
        }
    }
}

impl VocabFile {
    pub fn from_vocab(vocab: &Vocabulary) -> Self {
        let alphabet = vocab.alphabet().symbols().iter().map(|c| c.to_string()).collect();
        match vocab {
            Vocabulary::Mpe(v) => VocabFile::Mpe { alphabet, tokens: v.texts_of(&v.ids().collect::<Vec<_>>()) },
            Vocabulary::Bpe(v) => VocabFile::Bpe {
                alphabet,
                merges: v
                    .merges()
                    .iter()
                    .map(|m| (v.token_text(m.left).to_string(), v.token_text(m.right).to_string()))
                    .collect(),
            },
        }
    }

    /// Build the vocabulary; failures name the offending field.
    pub fn build(&self) -> std::result::Result<Vocabulary, String> {
        match self {
            VocabFile::Mpe { alphabet, tokens } => {
                let alphabet = parse_alphabet(alphabet)?;
                MpeVocabulary::new(alphabet, tokens).map(Vocabulary::from).map_err(|e| token_field(tokens, e))
            }
            VocabFile::Bpe { alphabet, merges } => {
                let alphabet = parse_alphabet(alphabet)?;
                BpeVocabulary::new(alphabet, merges).map(Vocabulary::from).map_err(merge_field)
            }
        }
    }
}

fn parse_alphabet(symbols: &[String]) -> std::result::Result<Alphabet, String> {
    let mut chars = Vec::with_capacity(symbols.len());
    for (i, s) in symbols.iter().enumerate() {
        let mut it = s.chars();
        match (it.next(), it.next()) {
            (Some(c), None) => chars.push(c),
            _ => return Err(format!("field alphabet[{i}]: expected a single character, got {s:?}")),
        }
    }
    Alphabet::new(chars).map_err(|e| format!("field alphabet: {e}"))
}

fn token_field(tokens: &[String], e: Error) -> String {
    let at = match &e {
        Error::EmptyToken => tokens.iter().position(|t| t.is_empty()),
        Error::DuplicateToken(t) => tokens.iter().enumerate().filter(|(_, x)| *x == t).nth(1).map(|(i, _)| i),
        Error::SymbolOutsideAlphabet { symbol, .. } => tokens.iter().position(|t| t.contains(*symbol)),
        _ => None,
    };
    match at {
        Some(i) => format!("field tokens[{i}]: {e}"),
        None => format!("field tokens: {e}"),
    }
}

fn merge_field(e: Error) -> String {
    match &e {
        Error::UnknownMergeOperand { index, .. } => format!("field merges[{index}]: {e}"),
        _ => format!("field merges: {e}"),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitialSpec {
    Table(BTreeMap<String, f64>),
    Named(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainFile {
    pub order: usize,
    pub alphabet: Vec<String>,
    pub initial: InitialSpec,
    pub transition: BTreeMap<String, BTreeMap<String, f64>>,
}

impl ChainFile {
    pub fn from_model(model: &MarkovCharModel) -> Self {
        let alphabet = model.alphabet();
        let mut initial = BTreeMap::new();
        let mut transition = BTreeMap::new();
        for i in 0..model.num_states() {
            let state = model.state_syms(i);
            let key = alphabet.render(&state);
            initial.insert(key.clone(), model.initial()[i]);
            let row = model.row(&state);
            transition.insert(key, alphabet.symbols().iter().zip(row).map(|(c, &p)| (c.to_string(), p)).collect());
        }
        Self {
            order: model.order(),
            alphabet: alphabet.symbols().iter().map(|c| c.to_string()).collect(),
            initial: InitialSpec::Table(initial),
            transition,
        }
    }

    pub fn build(&self) -> std::result::Result<MarkovCharModel, String> {
        let alphabet = parse_alphabet(&self.alphabet)?;
        if self.order == 0 {
            return Err("field order: must be at least 1".to_string());
        }
        let a = alphabet.len();
        let states = a
            .checked_pow(self.order as u32)
            .filter(|&s| s <= 1 << 20)
            .ok_or_else(|| "field order: state space too large".to_string())?;
        let state_index = |field: &str, key: &str| -> std::result::Result<usize, String> {
            let syms = alphabet.to_syms(key).map_err(|e| format!("field {field}.{key}: {e}"))?;
            if syms.len() != self.order {
                return Err(format!("field {field}.{key}: states must have length {}", self.order));
            }
            Ok(syms.iter().fold(0usize, |acc, &s| acc * a + s as usize))
        };
        let mut transition = vec![0.0; states * a];
        for (key, row) in &self.transition {
            let s = state_index("transition", key)?;
            for (c, &p) in row {
                let sym = alphabet
                    .to_syms(c)
                    .ok()
                    .filter(|v| v.len() == 1)
                    .ok_or_else(|| format!("field transition.{key}.{c}: not an alphabet symbol"))?;
                transition[s * a + sym[0] as usize] = p;
            }
        }
        let result = match &self.initial {
            InitialSpec::Named(name) if name == "stationary" => {
                MarkovCharModel::with_stationary_initial(alphabet, self.order, transition)
            }
            InitialSpec::Named(name) => {
                return Err(format!("field initial: expected a table or \"stationary\", got {name:?}"))
            }
            InitialSpec::Table(table) => {
                let mut initial = vec![0.0; states];
                for (key, &p) in table {
                    initial[state_index("initial", key)?] = p;
                }
                MarkovCharModel::new(alphabet, self.order, initial, transition)
            }
        };
        result.map_err(|e| e.to_string())
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| AppError::io(path, e))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| AppError::io(path, e))
}

pub fn parse_vocab(path: &Path, text: &str) -> Result<Vocabulary> {
    let raw: RawVocabFile = serde_json::from_str(text).map_err(|e| AppError::invalid_file(path, e.to_string()))?;
    let file = VocabFile::try_from(raw).map_err(|m| AppError::invalid_file(path, m))?;
    file.build().map_err(|m| AppError::invalid_file(path, m))
}

pub fn load_vocab(path: &Path) -> Result<Vocabulary> {
    parse_vocab(path, &read(path)?)
}

pub fn save_vocab(path: &Path, vocab: &Vocabulary) -> Result<()> {
    let text = serde_json::to_string_pretty(&VocabFile::from_vocab(vocab)).expect("serializable");
    write(path, &(text + "\n"))
}

pub fn parse_chain(path: &Path, text: &str) -> Result<MarkovCharModel> {
    let file: ChainFile = serde_json::from_str(text).map_err(|e| AppError::invalid_file(path, e.to_string()))?;
    file.build().map_err(|m| AppError::invalid_file(path, m))
}

pub fn load_chain(path: &Path) -> Result<MarkovCharModel> {
    parse_chain(path, &read(path)?)
}

pub fn save_chain(path: &Path, model: &MarkovCharModel) -> Result<()> {
    let text = serde_json::to_string_pretty(&ChainFile::from_model(model)).expect("serializable");
    write(path, &(text + "\n"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab(text: &str) -> std::result::Result<Vocabulary, String> {
        parse_vocab(Path::new("v.json"), text).map_err(|e| e.to_string())
    }

    #[test]
    fn mpe_and_bpe_files() {
        let v = vocab(r#"{"type":"mpe","alphabet":["A","B"],"tokens":["AA","A","B"]}"#).unwrap();
        assert_eq!(v.len(), 3);
        let b = vocab(r#"{"type":"bpe","alphabet":["A","B"],"merges":[["B","A"],["BA","A"]]}"#).unwrap();
        assert_eq!(b.token_text(tokenwise_core::TokenId(3)), "BAA");
    }

    #[test]
    fn diagnostics_name_fields() {
        let e = vocab(r#"{"type":"mpe","alphabet":["A","B"],"tokens":["AA","A","AA"]}"#).unwrap_err();
        assert!(e.contains("tokens[2]"), "{e}");
        let e = vocab(r#"{"type":"mpe","alphabet":["A","B"],"tokens":["AC"]}"#).unwrap_err();
        assert!(e.contains("tokens[0]"), "{e}");
        let e = vocab(r#"{"type":"bpe","alphabet":["A","B"],"merges":[["A","A"],["B","X"]]}"#).unwrap_err();
        assert!(e.contains("merges[1]") && e.contains("\"X\""), "{e}");
        let e = vocab(r#"{"type":"mpe","alphabet":["AB"],"tokens":[]}"#).unwrap_err();
        assert!(e.contains("alphabet[0]"), "{e}");
        let e = vocab("{\"type\":\"mpe\",\n\"alphabet\":[\"A\"],\n\"tokens\":[1]}").unwrap_err();
        assert!(e.contains("line 3"), "{e}");
        let e = vocab(r#"{"type":"mpe","alphabet":["A"],"tokens":[],"extra":1}"#).unwrap_err();
        assert!(e.contains("extra"), "{e}");
    }

    #[test]
    fn chain_file_roundtrip() {
        let text = r#"{"order":1,"alphabet":["A","B"],"initial":{"A":0.5,"B":0.5},
            "transition":{"A":{"A":0.3,"B":0.7},"B":{"A":0.5,"B":0.5}}}"#;
        let m = parse_chain(Path::new("c.json"), text).unwrap();
        assert_eq!(m.next_char_dist("A").unwrap(), [0.3, 0.7]);
        let again = ChainFile::from_model(&m).build().unwrap();
        assert_eq!(again.initial(), m.initial());
        assert_eq!(again.next_char_dist("B").unwrap(), m.next_char_dist("B").unwrap());
    }

    #[test]
    fn chain_file_rejects_non_stochastic_rows() {
        let text = r#"{"order":1,"alphabet":["A","B"],"initial":"stationary",
            "transition":{"A":{"A":0.3,"B":0.6},"B":{"A":0.5,"B":0.5}}}"#;
        assert!(parse_chain(Path::new("c.json"), text).is_err());
        let bad_state = r#"{"order":1,"alphabet":["A","B"],"initial":"stationary",
            "transition":{"AB":{"A":1.0}}}"#;
        let e = parse_chain(Path::new("c.json"), bad_state).unwrap_err().to_string();
        assert!(e.contains("transition.AB"), "{e}");
    }
}
