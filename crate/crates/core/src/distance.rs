//! Ordered tree edit distance (Zhang–Shasha) and the normalized structural
//! similarity derived from it.

use log::trace;
use thiserror::Error;

use crate::tree::ParseTree;

/// Per-operation edit costs. Relabeling two identical labels is always free.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EditCosts {
    pub insert: f64,
    pub delete: f64,
    pub relabel: f64,
}

impl EditCosts {
    pub const UNIT: EditCosts = EditCosts {
        insert: 1.0,
        delete: 1.0,
        relabel: 1.0,
    };

    pub fn new(insert: f64, delete: f64, relabel: f64) -> Result<Self, DistanceError> {
        for (name, v) in [("insert", insert), ("delete", delete), ("relabel", relabel)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(DistanceError::InvalidCost { name, value: v });
            }
        }
        Ok(EditCosts {
            insert,
            delete,
            relabel,
        })
    }

    fn relabel_cost(&self, a: &str, b: &str) -> f64 {
        if a == b {
            0.0
        } else {
            self.relabel
        }
    }
}

impl Default for EditCosts {
    fn default() -> Self {
        EditCosts::UNIT
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DistanceError {
    #[error("edit cost `{name}` must be finite and non-negative, got {value}")]
    InvalidCost { name: &'static str, value: f64 },
    #[error("brute-force edit distance supports trees of at most {max} nodes, got {got}")]
    TooLarge { max: usize, got: usize },
}

/// Post-order view of a tree used by the dynamic program.
struct Indexed<'a> {
    labels: Vec<&'a str>,
    /// Post-order index of the leftmost leaf descendant of each node.
    lml: Vec<usize>,
    keyroots: Vec<usize>,
}

impl<'a> Indexed<'a> {
    fn new(tree: &'a ParseTree) -> Self {
        fn walk<'a>(t: &'a ParseTree, labels: &mut Vec<&'a str>, lml: &mut Vec<usize>) -> usize {
            let mut first_leaf = None;
            for c in t.children() {
                let l = walk(c, labels, lml);
                first_leaf.get_or_insert(l);
            }
            let idx = labels.len();
            labels.push(t.label());
            let l = first_leaf.unwrap_or(idx);
            lml.push(l);
            l
        }
        let mut labels = Vec::with_capacity(tree.size());
        let mut lml = Vec::with_capacity(tree.size());
        walk(tree, &mut labels, &mut lml);

        // A keyroot is the highest node among those sharing a leftmost leaf.
        let n = labels.len();
        let mut seen = vec![false; n];
        let mut keyroots = Vec::new();
        for i in (0..n).rev() {
            if !seen[lml[i]] {
                seen[lml[i]] = true;
                keyroots.push(i);
            }
        }
        keyroots.sort_unstable();
        Indexed {
            labels,
            lml,
            keyroots,
        }
    }
}

/// Minimum cost of node insertions, deletions and relabelings turning `a`
/// into `b` under the ordered-tree edit model.
pub fn ted(a: &ParseTree, b: &ParseTree, costs: &EditCosts) -> f64 {
    let ta = Indexed::new(a);
    let tb = Indexed::new(b);
    let (n, m) = (ta.labels.len(), tb.labels.len());

    let mut td = vec![0.0f64; n * m];
    let mut fd = vec![0.0f64; (n + 1) * (m + 1)];
    let w = m + 1;

    for &i in &ta.keyroots {
        for &j in &tb.keyroots {
            let (li, lj) = (ta.lml[i], tb.lml[j]);
            let rows = i - li + 2;
            let cols = j - lj + 2;
            fd[0] = 0.0;
            for x in 1..rows {
                fd[x * w] = fd[(x - 1) * w] + costs.delete;
            }
            for y in 1..cols {
                fd[y] = fd[y - 1] + costs.insert;
            }
            for x in 1..rows {
                let i1 = li + x - 1;
                for y in 1..cols {
                    let j1 = lj + y - 1;
                    let del = fd[(x - 1) * w + y] + costs.delete;
                    let ins = fd[x * w + y - 1] + costs.insert;
                    if ta.lml[i1] == li && tb.lml[j1] == lj {
                        let rel = fd[(x - 1) * w + y - 1]
                            + costs.relabel_cost(ta.labels[i1], tb.labels[j1]);
                        let v = del.min(ins).min(rel);
                        fd[x * w + y] = v;
                        td[i1 * m + j1] = v;
                    } else {
                        let p = ta.lml[i1] - li;
                        let q = tb.lml[j1] - lj;
                        let sub = fd[p * w + q] + td[i1 * m + j1];
                        fd[x * w + y] = del.min(ins).min(sub);
                    }
                }
            }
        }
    }
    td[(n - 1) * m + (m - 1)]
}

/// Unit-cost distance.
pub fn ted_unit(a: &ParseTree, b: &ParseTree) -> f64 {
    ted(a, b, &EditCosts::UNIT)
}

/// `1 - TED / max(|a|, |b|)` with unit costs, before clamping. This can drop
/// below zero when the trees share little structure.
pub fn sim_struct_raw(a: &ParseTree, b: &ParseTree) -> f64 {
    let d = ted_unit(a, b);
    1.0 - d / a.size().max(b.size()) as f64
}

/// Normalized structural similarity, clamped to `[0, 1]`.
pub fn sim_struct(a: &ParseTree, b: &ParseTree) -> f64 {
    clamp_similarity(sim_struct_raw(a, b))
}

pub(crate) fn clamp_similarity(raw: f64) -> f64 {
    if raw < 0.0 {
        trace!("sim_struct clamped from {raw}");
        0.0
    } else if raw > 1.0 {
        1.0
    } else {
        raw
    }
}

/// Largest tree accepted by [`ted_bruteforce`].
pub const BRUTEFORCE_MAX_NODES: usize = 4;

/// Exact edit distance by enumerating every valid ordered edit mapping.
/// Independent of the dynamic program above; only meant for small trees.
pub fn ted_bruteforce(a: &ParseTree, b: &ParseTree) -> Result<f64, DistanceError> {
    ted_bruteforce_with(a, b, &EditCosts::UNIT)
}

pub fn ted_bruteforce_with(
    a: &ParseTree,
    b: &ParseTree,
    costs: &EditCosts,
) -> Result<f64, DistanceError> {
    for t in [a, b] {
        if t.size() > BRUTEFORCE_MAX_NODES {
            return Err(DistanceError::TooLarge {
                max: BRUTEFORCE_MAX_NODES,
                got: t.size(),
            });
        }
    }
    let ra = Relations::new(a);
    let rb = Relations::new(b);
    let mut best = f64::INFINITY;
    let mut pairs = Vec::new();
    let mut used = vec![false; rb.labels.len()];
    enumerate(&ra, &rb, costs, 0, &mut pairs, &mut used, &mut best);
    Ok(best)
}

/// Post-order labels plus the ancestor relation.
struct Relations {
    labels: Vec<String>,
    ancestor: Vec<Vec<bool>>,
}

impl Relations {
    fn new(tree: &ParseTree) -> Self {
        fn walk(t: &ParseTree, labels: &mut Vec<String>, desc: &mut Vec<Vec<usize>>) -> Vec<usize> {
            let mut below = Vec::new();
            for c in t.children() {
                below.extend(walk(c, labels, desc));
            }
            let idx = labels.len();
            labels.push(t.label().to_string());
            desc.push(below.clone());
            below.push(idx);
            below
        }
        let mut labels = Vec::new();
        let mut desc = Vec::new();
        walk(tree, &mut labels, &mut desc);
        let n = labels.len();
        let mut ancestor = vec![vec![false; n]; n];
        for (u, ds) in desc.iter().enumerate() {
            for &v in ds {
                ancestor[u][v] = true;
            }
        }
        Relations { labels, ancestor }
    }
}

fn compatible(ra: &Relations, rb: &Relations, pairs: &[(usize, usize)], i: usize, j: usize) -> bool {
    pairs.iter().all(|&(pi, pj)| {
        (pi < i) == (pj < j)
            && ra.ancestor[pi][i] == rb.ancestor[pj][j]
            && ra.ancestor[i][pi] == rb.ancestor[j][pj]
    })
}

fn enumerate(
    ra: &Relations,
    rb: &Relations,
    costs: &EditCosts,
    i: usize,
    pairs: &mut Vec<(usize, usize)>,
    used: &mut [bool],
    best: &mut f64,
) {
    if i == ra.labels.len() {
        let mapped = pairs.len();
        let relabel: f64 = pairs
            .iter()
            .map(|&(x, y)| costs.relabel_cost(&ra.labels[x], &rb.labels[y]))
            .sum();
        let total = relabel
            + (ra.labels.len() - mapped) as f64 * costs.delete
            + (rb.labels.len() - mapped) as f64 * costs.insert;
        if total < *best {
            *best = total;
        }
        return;
    }
    // node i deleted
    enumerate(ra, rb, costs, i + 1, pairs, used, best);
    for j in 0..rb.labels.len() {
        if used[j] || !compatible(ra, rb, pairs, i, j) {
            continue;
        }
        used[j] = true;
        pairs.push((i, j));
        enumerate(ra, rb, costs, i + 1, pairs, used, best);
        pairs.pop();
        used[j] = false;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::parse_bracketed;

    fn leaf(s: &str) -> ParseTree {
        ParseTree::leaf(s)
    }

    fn n(l: &str, c: Vec<ParseTree>) -> ParseTree {
        ParseTree::node(l, c)
    }

    #[test]
    fn identical_trees() {
        let t = parse_bracketed("[IN:X [SL:A me ] tell Angie [SL:B Friday ] ]").unwrap();
        assert_eq!(ted_unit(&t, &t), 0.0);
        assert_eq!(sim_struct(&t, &t), 1.0);
    }

    #[test]
    fn one_leaf_relabel() {
        let a = n("f", vec![leaf("a"), leaf("b")]);
        let b = n("f", vec![leaf("a"), leaf("c")]);
        assert_eq!(ted_unit(&a, &b), 1.0);
        assert_eq!(ted_bruteforce(&a, &b).unwrap(), 1.0);
    }

    #[test]
    fn insert_parent() {
        let a = leaf("x");
        let b = n("f", vec![leaf("x")]);
        assert_eq!(ted_unit(&a, &b), 1.0);
        assert_eq!(ted_unit(&b, &a), 1.0);
    }

    #[test]
    fn sim_struct_examples() {
        let a = n("f", vec![leaf("x"), leaf("y")]);
        let b = n("f", vec![leaf("x"), leaf("z")]);
        assert!((sim_struct(&a, &b) - (1.0 - 1.0 / 3.0)).abs() < 1e-12);
        assert_eq!(sim_struct(&leaf("p"), &leaf("q")), 0.0);
    }

    #[test]
    fn bruteforce_small_disjoint() {
        let a = leaf("p");
        let b = n("a", vec![leaf("b"), leaf("c"), leaf("d")]);
        assert_eq!(ted_bruteforce(&a, &b).unwrap(), 4.0);
        assert_eq!(ted_unit(&a, &b), 4.0);
    }

    #[test]
    fn bruteforce_rejects_large() {
        let big = n("a", vec![leaf("b"), leaf("c"), leaf("d"), leaf("e")]);
        assert_eq!(
            ted_bruteforce(&big, &leaf("a")),
            Err(DistanceError::TooLarge { max: 4, got: 5 })
        );
    }

    #[test]
    fn chain_vs_star_needs_clamp() {
        // A 5-chain and a 5-star can share at most two mapped nodes.
        let chain = n("a", vec![n("a", vec![n("a", vec![n("a", vec![leaf("a")])])])]);
        let star = n("b", vec![leaf("b"), leaf("b"), leaf("b"), leaf("b")]);
        let raw = sim_struct_raw(&chain, &star);
        assert!(raw < 0.0, "raw = {raw}");
        assert!(raw >= -1.0);
        assert_eq!(sim_struct(&chain, &star), 0.0);
    }

    #[test]
    fn weighted_costs() {
        let c = EditCosts::new(2.0, 3.0, 0.5).unwrap();
        let a = n("f", vec![leaf("a")]);
        let b = n("g", vec![leaf("a"), leaf("b")]);
        // relabel f->g (0.5) + insert b (2.0)
        assert_eq!(ted(&a, &b, &c), 2.5);
        assert_eq!(ted_bruteforce_with(&a, &b, &c).unwrap(), 2.5);
        assert!(EditCosts::new(-1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn textbook_example() {
        // Zhang & Shasha's running example: f(d(a, c(b)), e) vs f(c(d(a, b)), e) = 2
        let a = n("f", vec![n("d", vec![leaf("a"), n("c", vec![leaf("b")])]), leaf("e")]);
        let b = n("f", vec![n("c", vec![n("d", vec![leaf("a"), leaf("b")])]), leaf("e")]);
        assert_eq!(ted_unit(&a, &b), 2.0);
    }
}
