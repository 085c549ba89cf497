use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub const PAD: usize = 0;
pub const UNK: usize = 1;
pub const DEFAULT_MAX_LEN: usize = 64;

/// Word-level vocabulary. Ids are dense: `PAD`, `UNK`, then corpus words by
/// descending frequency with ties in byte order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "VocabFile")]
pub struct Vocab {
    tokens: Vec<String>,
    max_len: usize,
    #[serde(skip)]
    index: BTreeMap<String, usize>,
}

#[derive(Deserialize)]
struct VocabFile {
    tokens: Vec<String>,
    max_len: usize,
}

impl From<VocabFile> for Vocab {
    fn from(f: VocabFile) -> Self {
        Vocab::from_tokens(f.tokens, f.max_len)
    }
}

/// Output of [`Vocab::tokenize`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tokens {
    /// Exactly `max_len` ids, padded with [`PAD`].
    pub ids: Vec<usize>,
    /// Number of non-pad ids.
    pub len: usize,
    pub truncated: bool,
    /// The text had no words and was encoded as a single [`UNK`].
    pub empty: bool,
}

impl Tokens {
    pub fn content(&self) -> &[usize] {
        &self.ids[..self.len]
    }
}

/// Lowercased words, splitting on whitespace and punctuation.
pub fn words(text: &str) -> Vec<String> {
    text.split(|c: char| c.is_whitespace() || c.is_ascii_punctuation())
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

impl Vocab {
    pub fn build<'a>(texts: impl IntoIterator<Item = &'a str>, max_len: usize) -> Self {
        let mut counts: BTreeMap<String, usize> = BTreeMap::new();
        for t in texts {
            for w in words(t) {
                *counts.entry(w).or_default() += 1;
            }
        }
        let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let mut tokens = vec!["<pad>".to_string(), "<unk>".to_string()];
        tokens.extend(ranked.into_iter().map(|(w, _)| w));
        Self::from_tokens(tokens, max_len)
    }

    pub fn from_tokens(tokens: Vec<String>, max_len: usize) -> Self {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self {
            tokens,
            max_len: max_len.max(1),
            index,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, word: &str) -> usize {
        self.index.get(word).copied().unwrap_or(UNK)
    }

    pub fn tokenize(&self, text: &str) -> Tokens {
        let w = words(text);
        let empty = w.is_empty();
        let mut ids: Vec<usize> = if empty { vec![UNK] } else { w.iter().map(|x| self.id(x)).collect() };
        let truncated = ids.len() > self.max_len;
        ids.truncate(self.max_len);
        let len = ids.len();
        ids.resize(self.max_len, PAD);
        Tokens {
            ids,
            len,
            truncated,
            empty,
        }
    }
}
