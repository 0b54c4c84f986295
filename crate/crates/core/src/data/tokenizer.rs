//! Lowercased word-level tokenizer with a closed vocabulary.
//!
//! Words are maximal runs of alphanumeric characters; every other
//! non-whitespace character is a token of its own. Ids 0–5 are reserved:
//! `<bos>`, `<pad>`, `<unk>` and the three verbalizers in class order.

use std::collections::HashMap;
use std::path::Path;

use crate::data::labels::Sentiment;
use crate::error::{Error, Result};
use crate::tensor_file::ContentHash;

pub const BOS: &str = "<bos>";
pub const PAD: &str = "<pad>";
pub const UNK: &str = "<unk>";
pub const RESERVED: [&str; 6] = [BOS, PAD, UNK, "negative", "neutral", "positive"];

pub const BOS_ID: usize = 0;
pub const PAD_ID: usize = 1;
pub const UNK_ID: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tokenizer {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

/// Splits text into lowercased word and punctuation pieces.
pub fn split_words(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut word = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            word.extend(ch.to_lowercase());
            continue;
        }
        if !word.is_empty() {
            out.push(std::mem::take(&mut word));
        }
        if !ch.is_whitespace() {
            out.push(ch.to_lowercase().collect());
        }
    }
    if !word.is_empty() {
        out.push(word);
    }
    out
}

impl Tokenizer {
    /// Keeps the most frequent words up to `vocab_cap` entries in total
    /// (reserved tokens included). Ties in frequency are broken
    /// lexicographically.
    pub fn build<S: AsRef<str>>(corpus: &[S], vocab_cap: usize) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::Data("tokenizer corpus is empty".into()));
        }
        if vocab_cap < RESERVED.len() {
            return Err(Error::Config(format!(
                "vocab_cap {vocab_cap} is smaller than the {} reserved tokens",
                RESERVED.len()
            )));
        }
        let mut counts: HashMap<String, u64> = HashMap::new();
        for line in corpus {
            for w in split_words(line.as_ref()) {
                if !RESERVED.contains(&w.as_str()) {
                    *counts.entry(w).or_default() += 1;
                }
            }
        }
        let mut ranked: Vec<(String, u64)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let tokens = RESERVED
            .iter()
            .map(|s| s.to_string())
            .chain(ranked.into_iter().map(|(w, _)| w))
            .take(vocab_cap)
            .collect();
        Ok(Self::from_tokens(tokens))
    }

    fn from_tokens(tokens: Vec<String>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Tokenizer { tokens, index }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn verbalizer_id(&self, class: Sentiment) -> usize {
        3 + class.index()
    }

    /// Verbalizer ids in class order (negative, neutral, positive).
    pub fn verbalizer_ids(&self) -> [usize; 3] {
        Sentiment::ALL.map(|c| self.verbalizer_id(c))
    }

    pub fn encode(&self, text: &str) -> Vec<usize> {
        split_words(text)
            .iter()
            .map(|w| self.id(w).unwrap_or(UNK_ID))
            .collect()
    }

    pub fn decode(&self, ids: &[usize]) -> String {
        ids.iter()
            .map(|&i| self.token(i).unwrap_or(UNK))
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// One token per line; the line number is the id.
    pub fn to_vocab_string(&self) -> String {
        let mut s = self.tokens.join("\n");
        s.push('\n');
        s
    }

    pub fn from_vocab_str(text: &str) -> Result<Self> {
        let tokens: Vec<String> = text.lines().map(str::to_string).collect();
        if tokens.len() < RESERVED.len() || tokens[..RESERVED.len()] != RESERVED {
            return Err(Error::Format(
                "vocabulary file must start with the reserved tokens".into(),
            ));
        }
        let tok = Self::from_tokens(tokens);
        if tok.index.len() != tok.tokens.len() {
            return Err(Error::Format("vocabulary file has duplicate tokens".into()));
        }
        Ok(tok)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_vocab_string()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_vocab_str(&text)
    }

    /// SHA-256 of the vocabulary file contents.
    pub fn fingerprint(&self) -> ContentHash {
        ContentHash::of_bytes(self.to_vocab_string().as_bytes())
    }
}
