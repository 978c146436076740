use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::tree::{bracketed_parts, sexpr_parts, sql_feature_tokens, ParseDialect, ParseError};

/// Discrete features of one parse. Ordered for deterministic iteration.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSet {
    items: BTreeSet<String>,
}

impl FeatureSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, item: impl Into<String>) -> bool {
        self.items.insert(item.into())
    }

    pub fn contains(&self, item: &str) -> bool {
        self.items.contains(item)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.items.iter().map(String::as_str)
    }

    pub fn intersection_len(&self, other: &FeatureSet) -> usize {
        self.items.intersection(&other.items).count()
    }

    pub fn union_len(&self, other: &FeatureSet) -> usize {
        self.len() + other.len() - self.intersection_len(other)
    }
}

impl<S: Into<String>> FromIterator<S> for FeatureSet {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        FeatureSet {
            items: iter.into_iter().map(Into::into).collect(),
        }
    }
}

/// Lowercases and replaces every run of ASCII digits with `<d>`.
pub fn normalize_token(word: &str) -> String {
    let mut out = String::with_capacity(word.len());
    let mut in_digits = false;
    for ch in word.chars() {
        if ch.is_ascii_digit() {
            if !in_digits {
                out.push_str("<d>");
                in_digits = true;
            }
        } else {
            in_digits = false;
            out.extend(ch.to_lowercase());
        }
    }
    out
}

/// Features of a parse: structural labels plus normalized terminal tokens
/// for bracketed and S-expression parses; keywords, identifiers and function
/// names for SQL.
pub fn extract_features(parse: &str, dialect: ParseDialect) -> Result<FeatureSet, ParseError> {
    let mut set = FeatureSet::new();
    match dialect {
        ParseDialect::Bracketed | ParseDialect::SExpr => {
            let (labels, words) = if dialect == ParseDialect::Bracketed {
                bracketed_parts(parse)?
            } else {
                sexpr_parts(parse)?
            };
            for l in labels {
                set.insert(l);
            }
            for w in words {
                let t = normalize_token(&w);
                if !t.is_empty() {
                    set.insert(t);
                }
            }
        }
        ParseDialect::SqlSkeleton => {
            for t in sql_feature_tokens(parse)? {
                set.insert(t);
            }
        }
    }
    Ok(set)
}

/// `|a ∩ b| / |a ∪ b|`, with two empty sets counting as identical.
pub fn exact_jaccard(a: &FeatureSet, b: &FeatureSet) -> f64 {
    let union = a.union_len(b);
    if union == 0 {
        return 1.0;
    }
    a.intersection_len(b) as f64 / union as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(items: &[&str]) -> FeatureSet {
        items.iter().copied().collect()
    }

    #[test]
    fn bracketed_features() {
        let f = extract_features(
            "[IN:GET_WEATHER [SL:DATE_TIME for tomorrow ] ]",
            ParseDialect::Bracketed,
        )
        .unwrap();
        assert_eq!(f, set(&["IN:GET_WEATHER", "SL:DATE_TIME", "for", "tomorrow"]));
    }

    #[test]
    fn sql_features() {
        let f = extract_features("SELECT count(*) FROM t", ParseDialect::SqlSkeleton).unwrap();
        assert_eq!(f, set(&["SELECT", "FROM", "count", "t", "*"]));
    }

    #[test]
    fn sexpr_features() {
        let f = extract_features("(plan (Find :object (?= \"Westin 42\")))", ParseDialect::SExpr)
            .unwrap();
        assert_eq!(
            f,
            set(&["plan", "Find", "?=", ":object", "westin", "<d>"])
        );
    }

    #[test]
    fn digit_runs() {
        assert_eq!(normalize_token("5PM"), "<d>pm");
        assert_eq!(normalize_token("a12b3"), "a<d>b<d>");
    }

    #[test]
    fn deterministic() {
        let p = "[IN:X [SL:A me ] tell Angie [SL:B Friday 3 ] ]";
        assert_eq!(
            extract_features(p, ParseDialect::Bracketed).unwrap(),
            extract_features(p, ParseDialect::Bracketed).unwrap()
        );
    }

    #[test]
    fn parse_errors_propagate() {
        assert!(extract_features("[IN:X", ParseDialect::Bracketed).is_err());
    }

    #[test]
    fn jaccard() {
        assert_eq!(exact_jaccard(&set(&["a", "b", "c"]), &set(&["b", "c", "d"])), 0.5);
        assert_eq!(exact_jaccard(&set(&["a", "b"]), &set(&["a", "b"])), 1.0);
        assert_eq!(exact_jaccard(&set(&["a"]), &set(&["b"])), 0.0);
        assert_eq!(exact_jaccard(&set(&[]), &set(&[])), 1.0);
    }
}
