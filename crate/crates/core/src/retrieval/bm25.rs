use std::collections::HashMap;

use super::{check_k, rank, Hit, RetrievalError};
use crate::corpus::Corpus;
use crate::encoder::split_words;

pub const BM25_K1: f64 = 1.2;
pub const BM25_B: f64 = 0.75;

/// Okapi BM25 over utterances, tokenized like the encoder.
#[derive(Debug, Clone)]
pub struct Bm25Index {
    ids: Vec<String>,
    tf: Vec<HashMap<String, usize>>,
    len: Vec<usize>,
    df: HashMap<String, usize>,
    avgdl: f64,
}

impl Bm25Index {
    pub fn new<'a>(docs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Self {
        let mut ids = Vec::new();
        let mut tf = Vec::new();
        let mut len = Vec::new();
        let mut df: HashMap<String, usize> = HashMap::new();
        for (id, text) in docs {
            let words = split_words(text);
            let mut counts: HashMap<String, usize> = HashMap::new();
            for w in &words {
                *counts.entry(w.clone()).or_default() += 1;
            }
            for w in counts.keys() {
                *df.entry(w.clone()).or_default() += 1;
            }
            ids.push(id.to_string());
            len.push(words.len());
            tf.push(counts);
        }
        let avgdl = if len.is_empty() {
            0.0
        } else {
            len.iter().sum::<usize>() as f64 / len.len() as f64
        };
        Bm25Index { ids, tf, len, df, avgdl }
    }

    pub fn from_corpus(corpus: &Corpus) -> Self {
        Self::new(corpus.records().iter().map(|r| (r.id.as_str(), r.utterance.as_str())))
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// `ln((N − n + 0.5)/(n + 0.5) + 1)`.
    pub fn idf(&self, term: &str) -> f64 {
        let n = self.df.get(term).copied().unwrap_or(0) as f64;
        let total = self.ids.len() as f64;
        ((total - n + 0.5) / (n + 0.5) + 1.0).ln()
    }

    /// Scores of every document; each distinct query term counts once.
    pub fn scores(&self, query: &str) -> Vec<f64> {
        let mut terms = split_words(query);
        terms.sort();
        terms.dedup();
        let idf: Vec<(String, f64)> = terms
            .into_iter()
            .filter(|t| self.df.contains_key(t))
            .map(|t| {
                let w = self.idf(&t);
                (t, w)
            })
            .collect();
        (0..self.ids.len())
            .map(|i| {
                let norm = BM25_K1 * (1.0 - BM25_B + BM25_B * self.len[i] as f64 / self.avgdl);
                idf.iter()
                    .map(|(t, w)| {
                        let f = self.tf[i].get(t).copied().unwrap_or(0) as f64;
                        if f == 0.0 {
                            0.0
                        } else {
                            w * f * (BM25_K1 + 1.0) / (f + norm)
                        }
                    })
                    .sum()
            })
            .collect()
    }

    pub fn topk(&self, query: &str, k: usize, exclude: Option<&str>) -> Result<Vec<Hit>, RetrievalError> {
        let skip = exclude.and_then(|id| self.ids.iter().position(|x| x == id));
        check_k(k, self.len() - usize::from(skip.is_some()))?;
        Ok(rank(&self.scores(query), skip)
            .into_iter()
            .take(k)
            .map(|(i, s)| Hit { id: self.ids[i].clone(), index: i, score: s })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn index() -> Bm25Index {
        Bm25Index::new([
            ("d0", "the cat sat"),
            ("d1", "the dog sat on the mat"),
            ("d2", "cats and dogs"),
        ])
    }

    #[test]
    fn hand_computed_scores() {
        let idx = index();
        // N = 3, avgdl = (3 + 6 + 3) / 3 = 4.
        let idf_cat = (2.5f64 / 1.5 + 1.0).ln();
        let idf_sat = (1.5f64 / 2.5 + 1.0).ln();
        let tf_part = |f: f64, dl: f64| f * 2.2 / (f + 1.2 * (0.25 + 0.75 * dl / 4.0));
        let s = idx.scores("cat sat");
        assert!((s[0] - (idf_cat * tf_part(1.0, 3.0) + idf_sat * tf_part(1.0, 3.0))).abs() < 1e-9);
        assert!((s[1] - idf_sat * tf_part(1.0, 6.0)).abs() < 1e-9);
        assert_eq!(s[2], 0.0);
        let idf_the = (1.5f64 / 2.5 + 1.0).ln();
        assert!((idx.scores("the")[1] - idf_the * tf_part(2.0, 6.0)).abs() < 1e-9);
    }

    #[test]
    fn no_overlap_keeps_index_order() {
        let hits = index().topk("zebra", 3, None).unwrap();
        assert!(hits.iter().all(|h| h.score == 0.0));
        assert_eq!(hits.iter().map(|h| h.index).collect::<Vec<_>>(), vec![0, 1, 2]);
    }

    #[test]
    fn exact_document_first() {
        assert_eq!(index().topk("cats and dogs", 1, None).unwrap()[0].id, "d2");
        assert!(index().topk("x", 4, None).is_err());
    }
}
