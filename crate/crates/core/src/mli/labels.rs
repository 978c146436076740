use std::io::BufRead;

use super::{MliError, Property};

const POS_LABELS: &str = include_str!("../../data/labels/pos.txt");
const DEPS_LABELS: &str = include_str!("../../data/labels/deps.txt");
const PT_LABELS: &str = include_str!("../../data/labels/pt.txt");

/// Shipped merged label set for `property`.
pub fn default_label_set(property: Property) -> Vec<String> {
    let text = match property {
        Property::Pos => POS_LABELS,
        Property::Deps => DEPS_LABELS,
        Property::Pt => PT_LABELS,
    };
    read_label_set(text.as_bytes()).expect("shipped label sets are well formed")
}

/// One label per line; blank lines are ignored.
pub fn read_label_set<R: BufRead>(r: R) -> Result<Vec<String>, MliError> {
    let mut out: Vec<String> = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line.map_err(|e| MliError::Format { line: n + 1, msg: e.to_string() })?;
        let l = line.trim();
        if l.is_empty() {
            continue;
        }
        if out.iter().any(|x| x == l) {
            return Err(MliError::Format { line: n + 1, msg: format!("duplicate label `{l}`") });
        }
        out.push(l.to_string());
    }
    Ok(out)
}

/// Token-labelled sentences for one property.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenLabelCorpus {
    pub sentences: Vec<(Vec<String>, Vec<String>)>,
    pub label_set: Vec<String>,
    pub property: Property,
}

impl TokenLabelCorpus {
    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(|(t, _)| t.len()).sum()
    }

    /// Label index of every token, checking membership in the label set.
    pub(crate) fn label_ids(&self) -> Result<Vec<Vec<usize>>, MliError> {
        self.sentences
            .iter()
            .enumerate()
            .map(|(si, (toks, labels))| {
                if toks.is_empty() {
                    return Err(MliError::EmptySentence(si));
                }
                if toks.len() != labels.len() {
                    return Err(MliError::LengthMismatch {
                        sentence: si,
                        tokens: toks.len(),
                        labels: labels.len(),
                    });
                }
                labels
                    .iter()
                    .map(|l| {
                        self.label_set.iter().position(|x| x == l).ok_or_else(|| {
                            MliError::LabelSetMismatch { label: l.clone(), property: self.property }
                        })
                    })
                    .collect()
            })
            .collect()
    }
}

/// Reads `token<TAB>label` lines with a blank line between sentences.
pub fn parse_token_labels<R: BufRead>(
    r: R,
    label_set: Vec<String>,
    property: Property,
) -> Result<TokenLabelCorpus, MliError> {
    let mut sentences = Vec::new();
    let mut toks = Vec::new();
    let mut labels = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line.map_err(|e| MliError::Format { line: n + 1, msg: e.to_string() })?;
        let line = line.trim_end_matches(['\r', '\n']);
        if line.trim().is_empty() {
            if !toks.is_empty() {
                sentences.push((std::mem::take(&mut toks), std::mem::take(&mut labels)));
            }
            continue;
        }
        let (tok, label) = line.split_once('\t').ok_or_else(|| MliError::Format {
            line: n + 1,
            msg: "expected `token<TAB>label`".into(),
        })?;
        if tok.is_empty() || label.trim().is_empty() {
            return Err(MliError::Format { line: n + 1, msg: "empty token or label".into() });
        }
        toks.push(tok.to_string());
        labels.push(label.trim().to_string());
    }
    if !toks.is_empty() {
        sentences.push((toks, labels));
    }
    Ok(TokenLabelCorpus { sentences, label_set, property })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_sets() {
        let pos = default_label_set(Property::Pos);
        assert_eq!(pos.len(), 17);
        assert_eq!(pos.first().map(String::as_str), Some("ADJ"));
        assert_eq!(default_label_set(Property::Deps).len(), 25);
        let pt = default_label_set(Property::Pt);
        assert_eq!(pt.len(), 27);
        assert!(pt.contains(&"X-HLN".to_string()));
    }

    #[test]
    fn parse_sentences() {
        let text = "The\tDET\ncat\tNOUN\n\n\nsat\tVERB\n";
        let c = parse_token_labels(text.as_bytes(), default_label_set(Property::Pos), Property::Pos)
            .unwrap();
        assert_eq!(c.sentences.len(), 2);
        assert_eq!(c.sentences[0].0, vec!["The", "cat"]);
        assert_eq!(c.token_count(), 3);
        assert_eq!(c.label_ids().unwrap(), vec![vec![5, 7], vec![15]]);
    }

    #[test]
    fn bad_label_is_named() {
        let c = parse_token_labels("x\tFOO\n".as_bytes(), default_label_set(Property::Pos), Property::Pos)
            .unwrap();
        assert_eq!(
            c.label_ids(),
            Err(MliError::LabelSetMismatch { label: "FOO".into(), property: Property::Pos })
        );
        assert!(matches!(
            parse_token_labels("no-tab\n".as_bytes(), vec![], Property::Pos),
            Err(MliError::Format { line: 1, .. })
        ));
    }
}
