//! Contrastive group construction: structural argmax positives, structural
//! argmin hard negatives from the LSH pool, and seeded random negatives from
//! outside it.

use std::io::{BufRead, Write};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bucketing::{BucketingError, LshIndex};
use crate::corpus::Corpus;
use crate::distance::sim_struct;
use crate::hashing::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MiningConfig {
    pub n_hard: usize,
    pub n_rand: usize,
    pub seed: u64,
}

impl Default for MiningConfig {
    fn default() -> Self {
        MiningConfig {
            n_hard: 3,
            n_rand: 2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastiveGroup {
    #[serde(rename = "anchor")]
    pub anchor_id: String,
    #[serde(rename = "positive")]
    pub positive_id: String,
    #[serde(rename = "hard_negatives")]
    pub hard_negative_ids: Vec<String>,
    #[serde(rename = "random_negatives")]
    pub random_negative_ids: Vec<String>,
    pub positive_sim: f64,
    /// Set when either negative list came out shorter than configured.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub short: bool,
}

impl ContrastiveGroup {
    pub fn negative_ids(&self) -> impl Iterator<Item = &str> {
        self.hard_negative_ids
            .iter()
            .chain(&self.random_negative_ids)
            .map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Mined {
    Group(ContrastiveGroup),
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiningReport {
    pub anchors: usize,
    pub groups: usize,
    pub skipped_empty_pool: usize,
    pub short_groups: usize,
    pub mean_pool_size: f64,
    pub mean_positive_sim: f64,
}

#[derive(Debug, Error)]
pub enum MiningError {
    #[error("unknown id `{0}`")]
    UnknownId(String),
    #[error("index and corpus disagree: {0}")]
    IndexCorpusMismatch(String),
    #[error(transparent)]
    Bucketing(#[from] BucketingError),
    #[error("pairs line {line}: {msg}")]
    Format { line: usize, msg: String },
}

/// Mines one group for `anchor` given its pool, all as corpus positions.
pub fn mine_group_at(
    corpus: &Corpus,
    anchor: usize,
    pool: &[usize],
    cfg: &MiningConfig,
) -> Mined {
    let mut pool: Vec<usize> = pool.iter().copied().filter(|&p| p != anchor).collect();
    pool.sort_unstable();
    pool.dedup();
    if pool.is_empty() {
        return Mined::Skipped;
    }
    let at = corpus.tree(anchor);
    let sims: Vec<(usize, f64)> = pool.iter().map(|&c| (c, sim_struct(at, corpus.tree(c)))).collect();

    // Pool is ascending, so strict `>` keeps the smallest index on ties.
    let mut best = sims[0];
    for &(c, s) in &sims[1..] {
        if s > best.1 {
            best = (c, s);
        }
    }

    let mut rest: Vec<(usize, f64)> = sims.iter().copied().filter(|&(c, _)| c != best.0).collect();
    rest.sort_by(|x, y| x.1.total_cmp(&y.1).then(x.0.cmp(&y.0)));
    let hard: Vec<usize> = rest.iter().take(cfg.n_hard).map(|&(c, _)| c).collect();

    let outside: Vec<usize> = (0..corpus.len())
        .filter(|&i| i != anchor && pool.binary_search(&i).is_err())
        .collect();
    let anchor_id = &corpus.record(anchor).id;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, anchor_id));
    let n = cfg.n_rand.min(outside.len());
    let random: Vec<usize> = sample(&mut rng, outside.len(), n)
        .into_iter()
        .map(|k| outside[k])
        .collect();

    let id = |i: usize| corpus.record(i).id.clone();
    Mined::Group(ContrastiveGroup {
        anchor_id: anchor_id.clone(),
        positive_id: id(best.0),
        hard_negative_ids: hard.iter().map(|&i| id(i)).collect(),
        random_negative_ids: random.iter().map(|&i| id(i)).collect(),
        positive_sim: best.1,
        short: hard.len() < cfg.n_hard || random.len() < cfg.n_rand,
    })
}

/// Mines one group by id.
pub fn mine_group(
    corpus: &Corpus,
    anchor_id: &str,
    pool: &[String],
    cfg: &MiningConfig,
) -> Result<Mined, MiningError> {
    let pos = |id: &str| {
        corpus
            .position(id)
            .ok_or_else(|| MiningError::UnknownId(id.to_string()))
    };
    let anchor = pos(anchor_id)?;
    let pool = pool.iter().map(|id| pos(id)).collect::<Result<Vec<_>, _>>()?;
    Ok(mine_group_at(corpus, anchor, &pool, cfg))
}

/// Mines every anchor of the corpus against its LSH pool. Groups come back
/// in corpus order regardless of scheduling.
pub fn mine_all(
    corpus: &Corpus,
    index: &LshIndex,
    cfg: &MiningConfig,
) -> Result<(Vec<ContrastiveGroup>, MiningReport), MiningError> {
    if index.len() != corpus.len() {
        return Err(MiningError::IndexCorpusMismatch(format!(
            "index holds {} ids, corpus {} records",
            index.len(),
            corpus.len()
        )));
    }
    for (i, id) in index.ids().iter().enumerate() {
        if corpus.record(i).id != *id {
            return Err(MiningError::IndexCorpusMismatch(format!(
                "position {i}: index id `{id}`, corpus id `{}`",
                corpus.record(i).id
            )));
        }
    }
    let results: Vec<(usize, Mined)> = (0..corpus.len())
        .into_par_iter()
        .map(|i| {
            let pool = index.pool_of(&corpus.record(i).id)?;
            Ok((pool.len(), mine_group_at(corpus, i, &pool, cfg)))
        })
        .collect::<Result<_, MiningError>>()?;

    let mut groups = Vec::new();
    let mut skipped = 0;
    let mut pool_total = 0usize;
    for (size, m) in results {
        pool_total += size;
        match m {
            Mined::Group(g) => groups.push(g),
            Mined::Skipped => skipped += 1,
        }
    }
    let mean = |total: f64, n: usize| if n == 0 { 0.0 } else { total / n as f64 };
    let report = MiningReport {
        anchors: corpus.len(),
        groups: groups.len(),
        skipped_empty_pool: skipped,
        short_groups: groups.iter().filter(|g| g.short).count(),
        mean_pool_size: mean(pool_total as f64, corpus.len()),
        mean_positive_sim: mean(groups.iter().map(|g| g.positive_sim).sum(), groups.len()),
    };
    Ok((groups, report))
}

pub fn write_groups<W: Write>(mut w: W, groups: &[ContrastiveGroup]) -> std::io::Result<()> {
    for g in groups {
        writeln!(w, "{}", serde_json::to_string(g).expect("group serializes"))?;
    }
    Ok(())
}

pub fn read_groups<R: BufRead>(r: R) -> Result<Vec<ContrastiveGroup>, MiningError> {
    let mut out = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line.map_err(|e| MiningError::Format {
            line: n + 1,
            msg: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| MiningError::Format {
            line: n + 1,
            msg: e.to_string(),
        })?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Record;
    use crate::tree::ParseDialect;

    fn corpus(parses: &[&str]) -> Corpus {
        let recs = parses
            .iter()
            .enumerate()
            .map(|(i, p)| Record::new(format!("r{i}"), format!("utterance {i}"), *p))
            .collect();
        Corpus::new(recs, ParseDialect::SExpr).unwrap()
    }

    #[test]
    fn single_candidate_is_forced_positive() {
        let c = corpus(&["(a b)", "(a c)", "(z)"]);
        let cfg = MiningConfig::default();
        let Mined::Group(g) = mine_group_at(&c, 0, &[1], &cfg) else {
            panic!("expected a group");
        };
        assert_eq!(g.positive_id, "r1");
        assert!(g.hard_negative_ids.is_empty());
        assert_eq!(g.random_negative_ids, vec!["r2"]);
        assert!(g.short);
    }

    #[test]
    fn identical_parse_wins() {
        let c = corpus(&["(a b c)", "(a b d)", "(a b c)", "(x)"]);
        let Mined::Group(g) = mine_group_at(&c, 0, &[1, 2, 3], &MiningConfig::default()) else {
            panic!()
        };
        assert_eq!(g.positive_id, "r2");
        assert_eq!(g.positive_sim, 1.0);
        assert_eq!(g.hard_negative_ids, vec!["r3", "r1"]);
    }

    #[test]
    fn empty_pool_skips() {
        let c = corpus(&["(a)", "(b)"]);
        assert_eq!(mine_group_at(&c, 0, &[], &MiningConfig::default()), Mined::Skipped);
        assert_eq!(mine_group_at(&c, 0, &[0], &MiningConfig::default()), Mined::Skipped);
    }

    #[test]
    fn unknown_id() {
        let c = corpus(&["(a)"]);
        assert!(matches!(
            mine_group(&c, "nope", &[], &MiningConfig::default()),
            Err(MiningError::UnknownId(_))
        ));
    }

    #[test]
    fn random_negatives_seeded_per_anchor() {
        let parses: Vec<String> = (0..30).map(|i| format!("(n{i} x)")).collect();
        let refs: Vec<&str> = parses.iter().map(String::as_str).collect();
        let c = corpus(&refs);
        let cfg = MiningConfig { n_hard: 1, n_rand: 2, seed: 5 };
        let a = mine_group_at(&c, 3, &[4, 5], &cfg);
        let b = mine_group_at(&c, 3, &[4, 5], &cfg);
        assert_eq!(a, b);
        let Mined::Group(g) = a else { panic!() };
        for r in &g.random_negative_ids {
            assert!(!["r3", "r4", "r5"].contains(&r.as_str()));
        }
    }

    #[test]
    fn jsonl_round_trip() {
        let g = ContrastiveGroup {
            anchor_id: "a".into(),
            positive_id: "b".into(),
            hard_negative_ids: vec!["c".into()],
            random_negative_ids: vec!["d".into(), "e".into()],
            positive_sim: 0.75,
            short: false,
        };
        let mut buf = Vec::new();
        write_groups(&mut buf, std::slice::from_ref(&g)).unwrap();
        let line = String::from_utf8(buf.clone()).unwrap();
        assert!(line.starts_with("{\"anchor\":\"a\",\"positive\":\"b\""));
        assert_eq!(read_groups(buf.as_slice()).unwrap(), vec![g]);
        assert!(matches!(
            read_groups("{}\n".as_bytes()),
            Err(MiningError::Format { line: 1, .. })
        ));
    }
}
