//! Line-delimited exemplar corpora: one `{"id", "utterance", "parse"}` object
//! per line, with the parse dialect fixed per corpus.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bucketing::{extract_features, FeatureSet};
use crate::tree::{ParseDialect, ParseError, ParseTree};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Record {
    pub id: String,
    pub utterance: String,
    pub parse: String,
}

impl Record {
    pub fn new(id: impl Into<String>, utterance: impl Into<String>, parse: impl Into<String>) -> Self {
        Record {
            id: id.into(),
            utterance: utterance.into(),
            parse: parse.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {msg}")]
    Io { path: String, msg: String },
    #[error("line {line}: {msg}")]
    Json { line: usize, msg: String },
    #[error("record `{id}`: {source}")]
    Parse {
        id: String,
        #[source]
        source: ParseError,
    },
    #[error("duplicate record id `{0}`")]
    DuplicateId(String),
    #[error("record `{0}` has an empty utterance")]
    EmptyUtterance(String),
}

/// A corpus with every parse already turned into a tree.
#[derive(Debug, Clone)]
pub struct Corpus {
    dialect: ParseDialect,
    records: Vec<Record>,
    trees: Vec<ParseTree>,
    positions: HashMap<String, usize>,
}

impl Corpus {
    pub fn new(records: Vec<Record>, dialect: ParseDialect) -> Result<Self, CorpusError> {
        let mut positions = HashMap::with_capacity(records.len());
        let mut trees = Vec::with_capacity(records.len());
        for (i, rec) in records.iter().enumerate() {
            if positions.insert(rec.id.clone(), i).is_some() {
                return Err(CorpusError::DuplicateId(rec.id.clone()));
            }
            if rec.utterance.trim().is_empty() {
                return Err(CorpusError::EmptyUtterance(rec.id.clone()));
            }
            let tree = dialect.parse(&rec.parse).map_err(|source| CorpusError::Parse {
                id: rec.id.clone(),
                source,
            })?;
            trees.push(tree);
        }
        Ok(Corpus {
            dialect,
            records,
            trees,
            positions,
        })
    }

    pub fn load(path: &Path, dialect: ParseDialect) -> Result<Self, CorpusError> {
        Self::new(read_records(path)?, dialect)
    }

    /// Replaces every tree by its leaf-anonymized form.
    pub fn with_anonymized_leaves(mut self) -> Self {
        for t in &mut self.trees {
            *t = t.anonymize_leaves();
        }
        self
    }

    pub fn dialect(&self) -> ParseDialect {
        self.dialect
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn record(&self, i: usize) -> &Record {
        &self.records[i]
    }

    pub fn tree(&self, i: usize) -> &ParseTree {
        &self.trees[i]
    }

    pub fn trees(&self) -> &[ParseTree] {
        &self.trees
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.positions.get(id).copied()
    }

    pub fn features(&self, i: usize) -> FeatureSet {
        extract_features(&self.records[i].parse, self.dialect)
            .expect("parse validated at construction")
    }
}

pub fn read_records(path: &Path) -> Result<Vec<Record>, CorpusError> {
    let file = File::open(path).map_err(|e| CorpusError::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    })?;
    parse_records(BufReader::new(file)).map_err(|e| match e {
        CorpusError::Io { msg, .. } => CorpusError::Io {
            path: path.display().to_string(),
            msg,
        },
        other => other,
    })
}

pub fn parse_records<R: BufRead>(reader: R) -> Result<Vec<Record>, CorpusError> {
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| CorpusError::Io {
            path: String::new(),
            msg: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(&line).map_err(|e| CorpusError::Json {
            line: n + 1,
            msg: e.to_string(),
        })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_records<W: Write>(mut w: W, records: &[Record]) -> std::io::Result<()> {
    for r in records {
        writeln!(w, "{}", serde_json::to_string(r).expect("record serializes"))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_lines() {
        let text = "{\"id\":\"a\",\"utterance\":\"weather tomorrow\",\"parse\":\"[IN:GET_WEATHER [SL:DATE_TIME tomorrow ] ]\"}\n\n";
        let recs = parse_records(text.as_bytes()).unwrap();
        let c = Corpus::new(recs, ParseDialect::Bracketed).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.tree(0).size(), 3);
        assert_eq!(c.position("a"), Some(0));
    }

    #[test]
    fn errors_name_the_line_or_record() {
        let bad = "{\"id\":\"a\"}\n";
        assert!(matches!(
            parse_records(bad.as_bytes()),
            Err(CorpusError::Json { line: 1, .. })
        ));
        let recs = vec![Record::new("x", "hi", "[A x")];
        match Corpus::new(recs, ParseDialect::Bracketed) {
            Err(CorpusError::Parse { id, .. }) => assert_eq!(id, "x"),
            other => panic!("unexpected {other:?}"),
        }
        let dup = vec![Record::new("x", "a", "[A ]"), Record::new("x", "b", "[A ]")];
        assert!(matches!(
            Corpus::new(dup, ParseDialect::Bracketed),
            Err(CorpusError::DuplicateId(_))
        ));
    }

    #[test]
    fn anonymized_view() {
        let recs = vec![Record::new("a", "hi", "[IN:X [SL:Y friday ] ]")];
        let c = Corpus::new(recs, ParseDialect::Bracketed)
            .unwrap()
            .with_anonymized_leaves();
        assert_eq!(c.tree(0).leaves()[0].label(), "<TXT>");
    }
}
