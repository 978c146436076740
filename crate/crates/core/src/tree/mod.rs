//! Labeled ordered trees built from raw semantic parses.
//!
//! Three surface dialects are supported:
//!
//! * [`ParseDialect::Bracketed`]: task-oriented parses such as
//!   `[IN:GET_WEATHER [SL:DATE_TIME for tomorrow ] ]`.
//! * [`ParseDialect::SExpr`]: Lisp-style serializations (Lispress).
//! * [`ParseDialect::SqlSkeleton`]: SQL queries reduced to a clause-level
//!   skeleton.
//!
//! Every non-terminal becomes a parent node and children keep the order they
//! have in the source text.

mod bracketed;
mod sexpr;
mod sql;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bracketed::parse_bracketed;
pub(crate) use bracketed::bracketed_parts;
pub use sexpr::parse_sexpr;
pub(crate) use sexpr::sexpr_parts;
pub use sql::{parse_sql_skeleton, sql_feature_tokens};

/// Label given to anonymized terminal leaves.
pub const ANON_LEAF: &str = "<TXT>";

/// Errors raised while turning a parse string into a tree. Positions are byte
/// offsets into the input.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("empty input")]
    EmptyInput,
    #[error("unbalanced brackets at byte {0}")]
    UnbalancedBrackets(usize),
    #[error("unbalanced parentheses at byte {0}")]
    UnbalancedParens(usize),
    #[error("unterminated string literal starting at byte {0}")]
    UnterminatedStringLiteral(usize),
    #[error("empty list `()` at byte {0}")]
    EmptyList(usize),
    #[error("unsupported SQL syntax `{token}` at byte {pos}")]
    UnsupportedSyntax { token: String, pos: usize },
    #[error("parse error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
}

impl ParseError {
    pub(crate) fn syntax(pos: usize, msg: impl Into<String>) -> Self {
        ParseError::Syntax {
            pos,
            msg: msg.into(),
        }
    }
}

/// Surface syntax of a corpus. One dialect applies to a whole corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParseDialect {
    Bracketed,
    #[serde(rename = "sexpr")]
    SExpr,
    #[serde(rename = "sql")]
    SqlSkeleton,
}

impl ParseDialect {
    pub fn parse(self, text: &str) -> Result<ParseTree, ParseError> {
        match self {
            ParseDialect::Bracketed => parse_bracketed(text),
            ParseDialect::SExpr => parse_sexpr(text),
            ParseDialect::SqlSkeleton => parse_sql_skeleton(text),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ParseDialect::Bracketed => "bracketed",
            ParseDialect::SExpr => "sexpr",
            ParseDialect::SqlSkeleton => "sql",
        }
    }
}

impl fmt::Display for ParseDialect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ParseDialect {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "bracketed" | "mtop" => Ok(ParseDialect::Bracketed),
            "sexpr" | "lispress" => Ok(ParseDialect::SExpr),
            "sql" | "sqlskeleton" | "sql_skeleton" => Ok(ParseDialect::SqlSkeleton),
            other => Err(format!(
                "unknown dialect `{other}` (expected bracketed, sexpr or sql)"
            )),
        }
    }
}

/// A labeled ordered tree. `size` is cached and always equals the number of
/// nodes in the subtree.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct ParseTree {
    label: String,
    children: Vec<ParseTree>,
    size: usize,
}

impl ParseTree {
    /// Builds an inner node (or a leaf when `children` is empty).
    ///
    /// Panics on an empty label; parsers never produce one.
    pub fn node(label: impl Into<String>, children: Vec<ParseTree>) -> Self {
        let label = label.into();
        assert!(!label.is_empty(), "tree labels must be non-empty");
        let size = 1 + children.iter().map(|c| c.size).sum::<usize>();
        ParseTree {
            label,
            children,
            size,
        }
    }

    pub fn leaf(label: impl Into<String>) -> Self {
        Self::node(label, Vec::new())
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn children(&self) -> &[ParseTree] {
        &self.children
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    pub fn depth(&self) -> usize {
        1 + self.children.iter().map(|c| c.depth()).max().unwrap_or(0)
    }

    /// Pre-order traversal of every node.
    pub fn preorder(&self) -> Vec<&ParseTree> {
        let mut out = Vec::with_capacity(self.size);
        let mut stack = vec![self];
        while let Some(node) = stack.pop() {
            out.push(node);
            stack.extend(node.children.iter().rev());
        }
        out
    }

    /// Leaves in left-to-right order.
    pub fn leaves(&self) -> Vec<&ParseTree> {
        self.preorder().into_iter().filter(|n| n.is_leaf()).collect()
    }

    /// Labels of all nodes, post-order. This is the node numbering used by
    /// the tree edit distance.
    pub fn postorder_labels(&self) -> Vec<&str> {
        fn walk<'a>(t: &'a ParseTree, out: &mut Vec<&'a str>) {
            for c in &t.children {
                walk(c, out);
            }
            out.push(&t.label);
        }
        let mut out = Vec::with_capacity(self.size);
        walk(self, &mut out);
        out
    }

    /// Replaces every non-structural leaf label with [`ANON_LEAF`].
    pub fn anonymize_leaves(&self) -> ParseTree {
        if self.children.is_empty() {
            if is_structural_label(&self.label) {
                return self.clone();
            }
            return ParseTree::leaf(ANON_LEAF);
        }
        ParseTree::node(
            self.label.clone(),
            self.children.iter().map(|c| c.anonymize_leaves()).collect(),
        )
    }
}

/// Free-function form of [`ParseTree::anonymize_leaves`].
pub fn anonymize_leaves(tree: &ParseTree) -> ParseTree {
    tree.anonymize_leaves()
}

/// Structural leaves survive anonymization: placeholders (`<NUM>`, `<TXT>`),
/// the SQL star, and tag-like labels that carry no lowercase letters
/// (non-terminal tags, SQL keywords). Terminal text is always lowercased by
/// the parsers, so it never looks structural.
pub fn is_structural_label(label: &str) -> bool {
    if label == "*" || (label.starts_with('<') && label.ends_with('>') && label.len() > 2) {
        return true;
    }
    label.chars().any(|c| c.is_ascii_uppercase()) && !label.chars().any(|c| c.is_lowercase())
}

/// Lowercases a terminal span and collapses internal whitespace.
pub(crate) fn normalize_span(text: &str) -> String {
    text.split_whitespace()
        .map(|w| w.to_lowercase())
        .collect::<Vec<_>>()
        .join(" ")
}

impl fmt::Debug for ParseTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Renders as `label(child, child, ...)`; leaves with spaces are quoted.
impl fmt::Display for ParseTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.label.contains(' ') && self.children.is_empty() {
            write!(f, "{:?}", self.label)?;
        } else {
            f.write_str(&self.label)?;
        }
        if !self.children.is_empty() {
            f.write_str("(")?;
            for (i, c) in self.children.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                fmt::Display::fmt(c, f)?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn count_nodes(t: &ParseTree) -> usize {
        1 + t.children().iter().map(count_nodes).sum::<usize>()
    }

    #[test]
    fn size_is_cached_node_count() {
        let t = ParseTree::node(
            "a",
            vec![
                ParseTree::leaf("b"),
                ParseTree::node("c", vec![ParseTree::leaf("d")]),
            ],
        );
        assert_eq!(t.size(), 4);
        assert_eq!(t.size(), count_nodes(&t));
        assert_eq!(t.postorder_labels(), vec!["b", "d", "c", "a"]);
        assert_eq!(t.depth(), 3);
    }

    #[test]
    #[should_panic]
    fn empty_label_rejected() {
        ParseTree::leaf("");
    }

    #[test]
    fn anonymize_terminal_leaf() {
        let t = ParseTree::node("IN:X", vec![ParseTree::leaf("for tomorrow")]);
        let a = t.anonymize_leaves();
        assert_eq!(a, ParseTree::node("IN:X", vec![ParseTree::leaf(ANON_LEAF)]));
    }

    #[test]
    fn anonymize_single_node() {
        assert_eq!(
            anonymize_leaves(&ParseTree::leaf("hello")),
            ParseTree::leaf(ANON_LEAF)
        );
    }

    #[test]
    fn anonymize_is_idempotent() {
        let t = parse_bracketed("[IN:X [SL:A me ] tell Angie [SL:B Friday ] ]").unwrap();
        let once = t.anonymize_leaves();
        assert_eq!(once.anonymize_leaves(), once);
        assert_eq!(once.size(), t.size());
    }

    #[test]
    fn structural_labels() {
        assert!(is_structural_label("<NUM>"));
        assert!(is_structural_label("SL:DATE_TIME"));
        assert!(is_structural_label("*"));
        assert!(is_structural_label("GROUP BY"));
        assert!(!is_structural_label("for tomorrow"));
        assert!(!is_structural_label("Thursday"));
        assert!(!is_structural_label("<"));
    }

    #[test]
    fn dialect_from_str() {
        assert_eq!("sql".parse::<ParseDialect>().unwrap(), ParseDialect::SqlSkeleton);
        assert_eq!("SExpr".parse::<ParseDialect>().unwrap(), ParseDialect::SExpr);
        assert!("xml".parse::<ParseDialect>().is_err());
    }
}
