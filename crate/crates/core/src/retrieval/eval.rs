use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{rank, Bm25Index, RetrievalError, RetrievalIndex};
use crate::corpus::{Corpus, Record};
use crate::distance::sim_struct;
use crate::encoder::Encoder;
use crate::tree::{ParseDialect, ParseTree};

/// A held-out query with its gold parse tree.
#[derive(Debug, Clone, PartialEq)]
pub struct DevQuery {
    pub id: String,
    pub utterance: String,
    pub gold: ParseTree,
}

impl DevQuery {
    pub fn parse_all(records: &[Record], dialect: ParseDialect) -> Result<Vec<DevQuery>, RetrievalError> {
        records
            .iter()
            .map(|r| {
                let gold = dialect.parse(&r.parse).map_err(|e| RetrievalError::DevQuery {
                    id: r.id.clone(),
                    msg: e.to_string(),
                })?;
                Ok(DevQuery { id: r.id.clone(), utterance: r.utterance.clone(), gold })
            })
            .collect()
    }

    /// Dev queries from an already parsed corpus, reusing its trees.
    pub fn from_corpus(corpus: &Corpus) -> Vec<DevQuery> {
        corpus
            .records()
            .iter()
            .zip(corpus.trees())
            .map(|(r, t)| DevQuery { id: r.id.clone(), utterance: r.utterance.clone(), gold: t.clone() })
            .collect()
    }
}

/// `sim_struct(gold_q, bank_i)` for every dev query and bank item.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuralTargets {
    pub sims: Vec<Vec<f64>>,
}

impl StructuralTargets {
    pub fn new(dev: &[DevQuery], bank: &Corpus) -> Self {
        let sims = dev
            .par_iter()
            .map(|q| bank.trees().iter().map(|t| sim_struct(&q.gold, t)).collect())
            .collect();
        StructuralTargets { sims }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub k: usize,
    pub queries: usize,
    /// Mean over queries of the mean `sim_struct(gold, retrieved)` in the top k.
    pub mean_sim_struct_at_k: f64,
    /// Mean reciprocal rank of the first bank item with maximal `sim_struct` to gold.
    pub mrr_structural_nn: f64,
    /// Mean top-1 score: cosine for dense indices, the Okapi score for BM25.
    pub mean_top1_sim: f64,
}

/// What produces the ranking under evaluation.
#[derive(Clone, Copy)]
pub enum Scorer<'a> {
    Dense { index: &'a RetrievalIndex, encoder: &'a Encoder },
    Bm25(&'a Bm25Index),
}

impl Scorer<'_> {
    fn len(&self) -> usize {
        match self {
            Scorer::Dense { index, .. } => index.len(),
            Scorer::Bm25(b) => b.len(),
        }
    }

    fn scores(&self, query: &str) -> Result<Vec<f64>, RetrievalError> {
        match self {
            Scorer::Dense { index, encoder } => Ok(index.scores(&index.embed_query(encoder, query)?)),
            Scorer::Bm25(b) => Ok(b.scores(query)),
        }
    }
}

/// Structural retrieval metrics over `dev` against `bank`.
pub fn evaluate(
    scorer: Scorer<'_>,
    dev: &[DevQuery],
    bank: &Corpus,
    k: usize,
) -> Result<Metrics, RetrievalError> {
    evaluate_with_targets(scorer, dev, &StructuralTargets::new(dev, bank), k)
}

pub fn evaluate_with_targets(
    scorer: Scorer<'_>,
    dev: &[DevQuery],
    targets: &StructuralTargets,
    k: usize,
) -> Result<Metrics, RetrievalError> {
    super::check_k(k, scorer.len())?;
    let per_query: Vec<(f64, f64, f64)> = dev
        .par_iter()
        .zip(&targets.sims)
        .map(|(q, sims)| {
            let ranking = rank(&scorer.scores(&q.utterance).map_err(|e| match e {
                RetrievalError::Query(err) => RetrievalError::DevQuery { id: q.id.clone(), msg: err.to_string() },
                other => other,
            })?, None);
            let at_k = ranking.iter().take(k).map(|&(i, _)| sims[i]).sum::<f64>() / k as f64;
            let best = sims.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let pos = ranking.iter().position(|&(i, _)| sims[i] == best).expect("non-empty bank");
            Ok((at_k, 1.0 / (pos + 1) as f64, ranking[0].1))
        })
        .collect::<Result<_, RetrievalError>>()?;
    let n = per_query.len().max(1) as f64;
    let sum = |f: fn(&(f64, f64, f64)) -> f64| per_query.iter().map(f).sum::<f64>() / n;
    Ok(Metrics {
        k,
        queries: per_query.len(),
        mean_sim_struct_at_k: sum(|t| t.0),
        mrr_structural_nn: sum(|t| t.1),
        mean_top1_sim: sum(|t| t.2),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_bm25_retrieval() {
        let bank = Corpus::new(
            vec![
                Record::new("a", "weather tomorrow", "[IN:GET_WEATHER [SL:DATE_TIME tomorrow ] ]"),
                Record::new("b", "play jazz", "[IN:PLAY_MUSIC [SL:GENRE jazz ] [SL:X y ] ]"),
            ],
            ParseDialect::Bracketed,
        )
        .unwrap();
        let dev = DevQuery::parse_all(
            &[Record::new("q", "weather tomorrow", "[IN:GET_WEATHER [SL:DATE_TIME tomorrow ] ]")],
            ParseDialect::Bracketed,
        )
        .unwrap();
        let bm = Bm25Index::from_corpus(&bank);
        let m = evaluate(Scorer::Bm25(&bm), &dev, &bank, 1).unwrap();
        assert_eq!(m.mean_sim_struct_at_k, 1.0);
        assert_eq!(m.mrr_structural_nn, 1.0);
    }

    #[test]
    fn unparseable_gold_names_query() {
        let err = DevQuery::parse_all(&[Record::new("q9", "x", "[A")], ParseDialect::Bracketed).unwrap_err();
        assert!(matches!(err, RetrievalError::DevQuery { ref id, .. } if id == "q9"));
    }
}
