use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub const UNK: u32 = 0;
pub const UNK_TOKEN: &str = "<unk>";

/// Lowercases and splits on whitespace; every non-alphanumeric character is
/// a token of its own.
pub fn split_words(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for ch in text.chars() {
        if ch.is_whitespace() {
            if !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
        } else if ch.is_alphanumeric() || ch == '_' {
            cur.extend(ch.to_lowercase());
        } else {
            if !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
            out.push(ch.to_lowercase().collect());
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// Word-level vocabulary. Id 0 is reserved for unknown tokens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    tokens: Vec<String>,
    ids: HashMap<String, u32>,
}

impl From<Vec<String>> for Vocab {
    fn from(tokens: Vec<String>) -> Self {
        let ids = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Vocab { tokens, ids }
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.tokens
    }
}

impl Vocab {
    /// Builds a vocabulary from texts in first-seen order.
    pub fn build<'a>(texts: impl IntoIterator<Item = &'a str>) -> Self {
        let mut tokens = vec![UNK_TOKEN.to_string()];
        let mut ids: HashMap<String, u32> = HashMap::new();
        ids.insert(UNK_TOKEN.to_string(), UNK);
        for text in texts {
            for w in split_words(text) {
                if !ids.contains_key(&w) {
                    ids.insert(w.clone(), tokens.len() as u32);
                    tokens.push(w);
                }
            }
        }
        Vocab { tokens, ids }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> u32 {
        self.ids.get(token).copied().unwrap_or(UNK)
    }

    pub fn token(&self, id: u32) -> &str {
        &self.tokens[id as usize]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

/// Token ids of `text`, truncated to `max_len`. Returns an empty vector when
/// the text has no tokens; callers turn that into an error.
pub fn tokenize(text: &str, vocab: &Vocab, max_len: usize) -> Vec<u32> {
    let words = split_words(text);
    if words.len() > max_len {
        log::debug!("truncating {} tokens to {max_len}", words.len());
    }
    words.iter().take(max_len).map(|w| vocab.id(w)).collect()
}
