//! Dense exemplar index with cosine top-k, a BM25 control, prompt rendering
//! and structural retrieval metrics.

mod bm25;
mod eval;
mod prompt;

use std::cmp::Ordering;

use ndarray::{Array1, Array2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;
use crate::encoder::{Encoder, EncoderError};
use crate::mli::InjectionDirection;

pub use bm25::{Bm25Index, BM25_B, BM25_K1};
pub use eval::{evaluate, evaluate_with_targets, DevQuery, Metrics, Scorer, StructuralTargets};
pub use prompt::{build_prompt, Exemplar, PromptSpec, PromptTemplate};

pub const INDEX_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RetrievalError {
    #[error("k = {k} exceeds the {available} candidates available")]
    KTooLarge { k: usize, available: usize },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("query injection does not match the index provenance")]
    ProvenanceMismatch,
    #[error("encoder parameters differ from those the index was built with")]
    ParamsMismatch,
    #[error("prompt expects {expected} exemplars, got {got}")]
    CountMismatch { expected: usize, got: usize },
    #[error("the SQL template needs schema text")]
    MissingSchema,
    #[error("record `{id}`: {source}")]
    Encoder {
        id: String,
        #[source]
        source: EncoderError,
    },
    #[error("query: {0}")]
    Query(EncoderError),
    #[error("dev query `{id}`: {msg}")]
    DevQuery { id: String, msg: String },
    #[error("index file: {0}")]
    Format(String),
}

/// A ranked result: corpus id, corpus position and score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub id: String,
    pub index: usize,
    pub score: f64,
}

/// Sorts by score descending, then position ascending.
pub(crate) fn rank(scores: &[f64], exclude: Option<usize>) -> Vec<(usize, f64)> {
    let mut order: Vec<(usize, f64)> = scores
        .iter()
        .copied()
        .enumerate()
        .filter(|&(i, _)| Some(i) != exclude)
        .collect();
    order.sort_by(|a, b| match b.1.total_cmp(&a.1) {
        Ordering::Equal => a.0.cmp(&b.0),
        o => o,
    });
    order
}

pub(crate) fn check_k(k: usize, available: usize) -> Result<(), RetrievalError> {
    if k == 0 {
        return Err(RetrievalError::ZeroK);
    }
    if k > available {
        return Err(RetrievalError::KTooLarge { k, available });
    }
    Ok(())
}

/// Which encoder and injection produced an index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub params_sha256: String,
    pub injection: Option<InjectionDirection>,
}

/// Unit-normalized exemplar embeddings in corpus order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalIndex {
    pub ids: Vec<String>,
    pub embeddings: Array2<f64>,
    pub provenance: Provenance,
}

#[derive(Serialize, Deserialize)]
struct IndexFile {
    format_version: u32,
    #[serde(flatten)]
    index: RetrievalIndex,
}

fn unit(v: Vec<f64>) -> Result<Array1<f64>, EncoderError> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n == 0.0 || !n.is_finite() {
        return Err(EncoderError::ZeroVector);
    }
    Ok(Array1::from(v) / n)
}

/// Embeds every utterance of `corpus` (in parallel, collected in order).
pub fn build_index(
    corpus: &Corpus,
    encoder: &Encoder,
    injection: Option<&InjectionDirection>,
) -> Result<RetrievalIndex, RetrievalError> {
    let rows: Vec<Array1<f64>> = corpus
        .records()
        .par_iter()
        .map(|r| {
            encoder
                .embed(&r.utterance, injection)
                .and_then(unit)
                .map_err(|source| RetrievalError::Encoder { id: r.id.clone(), source })
        })
        .collect::<Result<_, _>>()?;
    let d = encoder.dim();
    let mut embeddings = Array2::zeros((rows.len(), d));
    for (i, r) in rows.iter().enumerate() {
        embeddings.row_mut(i).assign(r);
    }
    Ok(RetrievalIndex {
        ids: corpus.records().iter().map(|r| r.id.clone()).collect(),
        embeddings,
        provenance: Provenance {
            params_sha256: encoder.params_hash(),
            injection: injection.cloned(),
        },
    })
}

impl RetrievalIndex {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|x| x == id)
    }

    /// Fails unless `encoder` carries the parameters the index was built with.
    pub fn check_encoder(&self, encoder: &Encoder) -> Result<(), RetrievalError> {
        if encoder.params_hash() != self.provenance.params_sha256 {
            return Err(RetrievalError::ParamsMismatch);
        }
        Ok(())
    }

    /// Unit query embedding under the index's own injection.
    pub fn embed_query(&self, encoder: &Encoder, query: &str) -> Result<Array1<f64>, RetrievalError> {
        encoder
            .embed(query, self.provenance.injection.as_ref())
            .and_then(unit)
            .map_err(RetrievalError::Query)
    }

    /// Cosine of the unit query against every row, clamped to [-1, 1].
    pub fn scores(&self, q: &Array1<f64>) -> Vec<f64> {
        self.embeddings.dot(q).iter().map(|s| s.clamp(-1.0, 1.0)).collect()
    }

    pub fn rank_embedding(
        &self,
        q: &Array1<f64>,
        k: usize,
        exclude: Option<&str>,
    ) -> Result<Vec<Hit>, RetrievalError> {
        let skip = exclude.and_then(|id| self.position(id));
        check_k(k, self.len() - usize::from(skip.is_some()))?;
        Ok(rank(&self.scores(q), skip)
            .into_iter()
            .take(k)
            .map(|(i, s)| Hit { id: self.ids[i].clone(), index: i, score: s })
            .collect())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&IndexFile {
            format_version: INDEX_FORMAT_VERSION,
            index: self.clone(),
        })
        .expect("index serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, RetrievalError> {
        let f: IndexFile =
            serde_json::from_str(text).map_err(|e| RetrievalError::Format(e.to_string()))?;
        if f.format_version != INDEX_FORMAT_VERSION {
            return Err(RetrievalError::Format(format!(
                "unsupported format version {}",
                f.format_version
            )));
        }
        if f.index.embeddings.nrows() != f.index.ids.len() {
            return Err(RetrievalError::Format("row count differs from id count".into()));
        }
        Ok(f.index)
    }
}

/// Top-`k` exemplars for `query` by cosine. `injection` must equal the one
/// the index was built with.
pub fn topk(
    index: &RetrievalIndex,
    encoder: &Encoder,
    query: &str,
    k: usize,
    injection: Option<&InjectionDirection>,
    exclude: Option<&str>,
) -> Result<Vec<Hit>, RetrievalError> {
    if injection != index.provenance.injection.as_ref() {
        return Err(RetrievalError::ProvenanceMismatch);
    }
    let q = index.embed_query(encoder, query)?;
    index.rank_embedding(&q, k, exclude)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Record;
    use crate::encoder::{EncoderConfig, Vocab};
    use crate::tree::ParseDialect;

    fn setup() -> (Corpus, Encoder) {
        let recs = vec![
            Record::new("a", "what is the weather", "[IN:GET_WEATHER ]"),
            Record::new("b", "remind me to call mom", "[IN:CREATE_REMINDER ]"),
            Record::new("c", "what is the weather", "[IN:GET_WEATHER ]"),
            Record::new("d", "play some jazz", "[IN:PLAY_MUSIC ]"),
        ];
        let corpus = Corpus::new(recs, ParseDialect::Bracketed).unwrap();
        let vocab = Vocab::build(corpus.records().iter().map(|r| r.utterance.as_str()));
        let cfg = EncoderConfig { d: 8, layers: 2, heads: 2, ffn: 16, max_len: 16, seed: 3 };
        (corpus, Encoder::new(cfg, vocab).unwrap())
    }

    #[test]
    fn rows_are_unit_and_duplicates_match() {
        let (c, e) = setup();
        let idx = build_index(&c, &e, None).unwrap();
        for row in idx.embeddings.rows() {
            assert!((row.dot(&row).sqrt() - 1.0).abs() < 1e-9);
        }
        assert_eq!(idx.embeddings.row(0), idx.embeddings.row(2));
        assert_eq!(build_index(&c, &e, None).unwrap(), idx);
    }

    #[test]
    fn self_query_ranks_first() {
        let (c, e) = setup();
        let idx = build_index(&c, &e, None).unwrap();
        let hits = topk(&idx, &e, "remind me to call mom", 1, None, None).unwrap();
        assert_eq!(hits[0].id, "b");
        assert!((hits[0].score - 1.0).abs() < 1e-6);
        // Tie between the duplicate rows goes to the smaller position.
        let hits = topk(&idx, &e, "what is the weather", 2, None, None).unwrap();
        assert_eq!((hits[0].index, hits[1].index), (0, 2));
        let hits = topk(&idx, &e, "what is the weather", 3, None, Some("a")).unwrap();
        assert!(hits.iter().all(|h| h.id != "a"));
    }

    #[test]
    fn k_bounds_and_provenance() {
        let (c, e) = setup();
        let idx = build_index(&c, &e, None).unwrap();
        assert_eq!(
            topk(&idx, &e, "jazz", 4, None, Some("a")),
            Err(RetrievalError::KTooLarge { k: 4, available: 3 })
        );
        assert_eq!(topk(&idx, &e, "jazz", 0, None, None), Err(RetrievalError::ZeroK));
        let inj = InjectionDirection {
            property: crate::mli::Property::Pos,
            layer: 1,
            lambda: 1.0,
            u: vec![0.0; 8],
        };
        assert_eq!(
            topk(&idx, &e, "jazz", 1, Some(&inj), None),
            Err(RetrievalError::ProvenanceMismatch)
        );
    }

    #[test]
    fn json_round_trip() {
        let (c, e) = setup();
        let idx = build_index(&c, &e, None).unwrap();
        let back = RetrievalIndex::from_json(&idx.to_json()).unwrap();
        assert_eq!(back, idx);
        back.check_encoder(&e).unwrap();
    }
}
