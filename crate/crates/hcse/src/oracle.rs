//! Exhaustive enumeration of cluster trees on small graphs.
//!
//! The enumerators stream every topology exactly once and never hold more
//! than one tree (plus the running argmin set) in memory. Nothing here is
//! clever; the value of this module is that it is obviously correct, so it
//! can serve as ground truth for the heuristics elsewhere in the crate.

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::par;
use crate::tree::{ClusterTree, TreeShape};

/// Which family of topologies to enumerate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnumerationMode {
    /// Every internal node has exactly two children. There are
    /// `(2n-3)!! = 1, 3, 15, 105, ...` such trees on `n = 2, 3, 4, 5, ...`
    /// labeled leaves.
    Binary,
    /// Every rooted tree with labeled leaves and no internal node of
    /// out-degree one (so binary trees are included).
    Multifurcating,
}

const MAX_BINARY: usize = 9;
const MAX_MULTI: usize = 7;

/// Stream every topology on leaves `0..n` through the callback and return
/// how many were produced.
pub fn enumerate_trees(
    n: usize,
    mode: EnumerationMode,
    mut callback: impl FnMut(&TreeShape),
) -> Result<u64> {
    if n < 2 {
        return Err(Error::domain("enumeration needs at least two leaves"));
    }
    match mode {
        EnumerationMode::Binary if n > MAX_BINARY => Err(Error::domain(format!(
            "binary enumeration supports n <= {MAX_BINARY}; {n} leaves would generate \
             too many trees"
        ))),
        EnumerationMode::Multifurcating if n > MAX_MULTI => Err(Error::domain(format!(
            "multifurcating enumeration supports n <= {MAX_MULTI}; {n} leaves would \
             generate too many trees"
        ))),
        EnumerationMode::Binary => {
            let mut count = 0;
            let seed = TreeShape::Internal(vec![TreeShape::Leaf(0), TreeShape::Leaf(1)]);
            binary_rec(&seed, 2, n, &mut |t| {
                count += 1;
                callback(t);
            });
            Ok(count)
        }
        EnumerationMode::Multifurcating => {
            let leaves: Vec<usize> = (0..n).collect();
            let mut count = 0;
            multi_rec(&leaves, &mut |t| {
                count += 1;
                callback(t);
            });
            Ok(count)
        }
    }
}

/// Grow binary trees by inserting leaf `next` at every possible position.
/// Each tree with `k` leaves has `2k - 1` nodes, and replacing any one node
/// `S` by `(S, next)` gives each `k+1`-leaf tree exactly once.
fn binary_rec(shape: &TreeShape, next: usize, n: usize, cb: &mut dyn FnMut(&TreeShape)) {
    if next == n {
        cb(shape);
        return;
    }
    insert_at_every_node(shape, next, &mut |grown| binary_rec(&grown, next + 1, n, cb));
}

fn insert_at_every_node(shape: &TreeShape, leaf: usize, cb: &mut dyn FnMut(TreeShape)) {
    cb(TreeShape::Internal(vec![
        shape.clone(),
        TreeShape::Leaf(leaf),
    ]));
    if let TreeShape::Internal(children) = shape {
        for i in 0..children.len() {
            insert_at_every_node(&children[i], leaf, &mut |sub| {
                let mut next = children.clone();
                next[i] = sub;
                cb(TreeShape::Internal(next));
            });
        }
    }
}

/// Every multifurcating tree decomposes uniquely as a root whose children's
/// leaf sets partition the leaves into at least two blocks, each block
/// carrying any tree of the same kind. Recurse over set partitions.
fn multi_rec(leaves: &[usize], cb: &mut dyn FnMut(&TreeShape)) {
    if leaves.len() == 1 {
        cb(&TreeShape::Leaf(leaves[0]));
        return;
    }
    partitions(leaves, &mut |blocks| {
        let mut acc = Vec::with_capacity(blocks.len());
        block_combos(blocks, &mut acc, cb);
    });
}

fn block_combos(
    blocks: &[Vec<usize>],
    acc: &mut Vec<TreeShape>,
    cb: &mut dyn FnMut(&TreeShape),
) {
    if blocks.is_empty() {
        cb(&TreeShape::Internal(acc.clone()));
        return;
    }
    multi_rec(&blocks[0], &mut |sub| {
        acc.push(sub.clone());
        block_combos(&blocks[1..], acc, cb);
        acc.pop();
    });
}

/// Set partitions with at least two blocks, via restricted growth strings.
fn partitions(items: &[usize], cb: &mut dyn FnMut(&[Vec<usize>])) {
    let mut assignment = vec![0usize; items.len()];
    rgs(items, &mut assignment, 1, 1, cb);
}

fn rgs(
    items: &[usize],
    assignment: &mut Vec<usize>,
    pos: usize,
    max_used: usize,
    cb: &mut dyn FnMut(&[Vec<usize>]),
) {
    if pos == items.len() {
        if max_used < 2 {
            return; // single block: would create a unary chain
        }
        let mut blocks = vec![Vec::new(); max_used];
        for (i, &b) in assignment.iter().enumerate() {
            blocks[b].push(items[i]);
        }
        cb(&blocks);
        return;
    }
    for b in 0..=max_used {
        assignment[pos] = b;
        rgs(items, assignment, pos + 1, max_used.max(b + 1), cb);
    }
}

/// Outcome of an exhaustive cost minimization.
#[derive(Debug, Clone)]
pub struct BruteMinResult {
    pub minimum: f64,
    /// Every enumerated tree within `1e-9` of the minimum.
    pub argmin: Vec<TreeShape>,
    pub tree_count: u64,
}

const ARGMIN_TOL: f64 = 1e-9;

/// Evaluate a cost over every topology and return the exact minimum with the
/// complete argmin set. Cost evaluation fans out in batches; the enumeration
/// itself stays a single producer.
pub fn brute_min(
    graph: &Graph,
    mode: EnumerationMode,
    cost: impl Fn(&Graph, &ClusterTree) -> f64 + Sync,
) -> Result<BruteMinResult> {
    let n = graph.vertex_count();
    let mut minimum = f64::INFINITY;
    let mut argmin: Vec<(f64, TreeShape)> = Vec::new();
    let mut batch: Vec<TreeShape> = Vec::new();
    let batch_size = 256;

    let flush = |batch: &mut Vec<TreeShape>,
                     minimum: &mut f64,
                     argmin: &mut Vec<(f64, TreeShape)>| {
        let costs = par::map_collect(batch, |shape| {
            let tree = ClusterTree::from_shape(graph, shape)
                .expect("enumerated shape is valid for the graph");
            cost(graph, &tree)
        });
        for (shape, c) in batch.drain(..).zip(costs) {
            if c < *minimum - ARGMIN_TOL {
                *minimum = c;
                argmin.retain(|(ac, _)| *ac <= *minimum + ARGMIN_TOL);
            }
            if c <= *minimum + ARGMIN_TOL {
                *minimum = minimum.min(c);
                argmin.push((c, shape));
            }
        }
        // tighten after the batch: the minimum may have dropped mid-batch
        argmin.retain(|(ac, _)| *ac <= *minimum + ARGMIN_TOL);
    };

    let tree_count = enumerate_trees(n, mode, |shape| {
        batch.push(shape.clone());
        if batch.len() >= batch_size {
            flush(&mut batch, &mut minimum, &mut argmin);
        }
    })?;
    flush(&mut batch, &mut minimum, &mut argmin);

    Ok(BruteMinResult {
        minimum,
        argmin: argmin.into_iter().map(|(_, s)| s).collect(),
        tree_count,
    })
}

/// Size-split cost of a binary tree: over every internal node with child
/// leaf sets `A`, `B`, sum `|A| * |B| * log2(|A| + |B|)`. For a unit-weight
/// clique this differs from [`crate::costs::cost_se`] by the constant
/// `|E| * log2(n-1)`, so both orders agree on every binary tree.
pub fn size_product_cost(tree: &ClusterTree) -> Result<f64> {
    let mut total = 0.0;
    for id in tree.internal_nodes() {
        let node = tree.node(id);
        if node.children.len() != 2 {
            return Err(Error::domain(format!(
                "size_product_cost needs a binary tree; node {id} has {} children",
                node.children.len()
            )));
        }
        let a = tree.node(node.children[0]).leaf_count as f64;
        let b = tree.node(node.children[1]).leaf_count as f64;
        total += a * b * (a + b).log2();
    }
    Ok(total)
}

/// True when every internal node has exactly two children whose leaf counts
/// differ by at most one.
pub fn is_balanced_binary(shape: &TreeShape) -> bool {
    match shape {
        TreeShape::Leaf(_) => true,
        TreeShape::Internal(children) => {
            if children.len() != 2 {
                return false;
            }
            let a = children[0].leaf_count() as i64;
            let b = children[1].leaf_count() as i64;
            (a - b).abs() <= 1 && children.iter().all(is_balanced_binary)
        }
    }
}

/// Number of everywhere-balanced binary trees on `n` labeled leaves:
/// split `n` into halves, choose the members of the larger half, and recurse;
/// equal halves are unordered, hence the division by two.
pub fn balanced_binary_count(n: usize) -> u64 {
    if n <= 1 {
        return 1;
    }
    let a = n / 2;
    let b = n - a;
    let choose = binomial(n, b);
    if a == b {
        choose * balanced_binary_count(a) * balanced_binary_count(b) / 2
    } else {
        choose * balanced_binary_count(a) * balanced_binary_count(b)
    }
}

fn binomial(n: usize, k: usize) -> u64 {
    let mut num = 1u64;
    let mut den = 1u64;
    for i in 0..k {
        num *= (n - i) as u64;
        den *= (i + 1) as u64;
    }
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::costs;
    use std::collections::BTreeSet;

    fn clique(n: usize) -> Graph {
        let mut edges = Vec::new();
        for u in 0..n {
            for v in (u + 1)..n {
                edges.push((u, v, 1.0));
            }
        }
        Graph::new(n, edges).unwrap()
    }

    #[test]
    fn binary_counts_match_double_factorial() {
        let expected = [(2, 1), (3, 3), (4, 15), (5, 105), (6, 945)];
        for (n, want) in expected {
            let count = enumerate_trees(n, EnumerationMode::Binary, |_| {}).unwrap();
            assert_eq!(count, want, "n = {n}");
        }
    }

    #[test]
    fn multifurcating_counts() {
        let expected = [(2, 1), (3, 4), (4, 26), (5, 236), (6, 2752)];
        for (n, want) in expected {
            let count = enumerate_trees(n, EnumerationMode::Multifurcating, |_| {}).unwrap();
            assert_eq!(count, want, "n = {n}");
        }
    }

    #[test]
    fn streams_are_duplicate_free() {
        for mode in [EnumerationMode::Binary, EnumerationMode::Multifurcating] {
            let mut seen = BTreeSet::new();
            let count = enumerate_trees(5, mode, |t| {
                assert!(seen.insert(t.canonical()), "duplicate tree {t:?}");
            })
            .unwrap();
            assert_eq!(seen.len() as u64, count);
        }
    }

    #[test]
    fn bounds_are_enforced() {
        assert!(enumerate_trees(10, EnumerationMode::Binary, |_| {}).is_err());
        assert!(enumerate_trees(8, EnumerationMode::Multifurcating, |_| {}).is_err());
        assert!(enumerate_trees(1, EnumerationMode::Binary, |_| {}).is_err());
    }

    #[test]
    fn multifurcating_has_no_unary_nodes() {
        enumerate_trees(5, EnumerationMode::Multifurcating, |t| {
            fn check(s: &TreeShape) {
                if let TreeShape::Internal(cs) = s {
                    assert!(cs.len() >= 2);
                    cs.iter().for_each(check);
                }
            }
            check(t);
        })
        .unwrap();
    }

    #[test]
    fn k5_minimizers_are_balanced() {
        let g = clique(5);
        let result = brute_min(&g, EnumerationMode::Binary, |g, t| {
            costs::cost_se(g, t).unwrap()
        })
        .unwrap();
        assert_eq!(result.tree_count, 105);
        assert!(!result.argmin.is_empty());
        for t in &result.argmin {
            assert!(is_balanced_binary(t));
        }
        assert_eq!(result.argmin.len() as u64, balanced_binary_count(5));
    }

    #[test]
    fn k4_dasgupta_constant_over_binary_trees() {
        let g = clique(4);
        let result = brute_min(&g, EnumerationMode::Binary, |g, t| {
            costs::cost_dasgupta(g, t).unwrap()
        })
        .unwrap();
        assert_eq!(result.minimum, 20.0);
        assert_eq!(result.argmin.len(), 15, "all binary trees achieve 20");
    }

    #[test]
    fn size_product_examples() {
        let g = clique(4);
        let shape = TreeShape::Internal(vec![
            TreeShape::Internal(vec![TreeShape::Leaf(0), TreeShape::Leaf(1)]),
            TreeShape::Internal(vec![TreeShape::Leaf(2), TreeShape::Leaf(3)]),
        ]);
        let t = ClusterTree::from_shape(&g, &shape).unwrap();
        assert!((size_product_cost(&t).unwrap() - 10.0).abs() < 1e-12);

        let g2 = clique(2);
        let t2 = ClusterTree::trivial(&g2).unwrap();
        assert!((size_product_cost(&t2).unwrap() - 1.0).abs() < 1e-12);

        let t_multi = ClusterTree::trivial(&g).unwrap();
        assert!(size_product_cost(&t_multi).is_err());
    }

    #[test]
    fn clique_cost_difference_is_constant() {
        // cost_se(t) - size_product_cost(t) = |E| * log2(n-1) on unit cliques
        let n = 5;
        let g = clique(n);
        let edges = g.edges().len() as f64;
        let expected = edges * ((n - 1) as f64).log2();
        enumerate_trees(n, EnumerationMode::Binary, |shape| {
            let t = ClusterTree::from_shape(&g, shape).unwrap();
            let diff = costs::cost_se(&g, &t).unwrap() - size_product_cost(&t).unwrap();
            assert!((diff - expected).abs() < 1e-9);
        })
        .unwrap();
    }

    #[test]
    fn log_size_cost_matches_volume_cost_on_regular_graphs() {
        // on a regular graph vol(S) is proportional to |S|, so minimizing
        // sum w * log2|lca| and sum w * log2 vol(lca) pick the same trees
        let g = clique(5);
        let by_size = brute_min(&g, EnumerationMode::Binary, |g, t| {
            costs::cost_concave(g, t, |s| (s as f64).log2()).unwrap()
        })
        .unwrap();
        let by_volume = brute_min(&g, EnumerationMode::Binary, |g, t| {
            costs::cost_se(g, t).unwrap()
        })
        .unwrap();
        let canon = |shapes: &[TreeShape]| -> BTreeSet<TreeShape> {
            shapes.iter().map(TreeShape::canonical).collect()
        };
        assert_eq!(canon(&by_size.argmin), canon(&by_volume.argmin));
    }

    #[test]
    fn entropy_and_cost_minimizers_coincide() {
        // minimizing structural entropy and minimizing the edge/volume cost
        // are the same search, related by the exact identity
        let two_triangles = Graph::new(
            6,
            vec![
                (0, 1, 1.0),
                (0, 2, 1.0),
                (1, 2, 1.0),
                (3, 4, 1.0),
                (3, 5, 1.0),
                (4, 5, 1.0),
                (2, 3, 1.0),
            ],
        )
        .unwrap();
        for g in [clique(5), two_triangles] {
            let by_entropy = brute_min(&g, EnumerationMode::Multifurcating, |g, t| {
                costs::structural_entropy(g, t).unwrap()
            })
            .unwrap();
            let by_cost = brute_min(&g, EnumerationMode::Multifurcating, |g, t| {
                costs::cost_se(g, t).unwrap()
            })
            .unwrap();
            let canon = |shapes: &[TreeShape]| -> BTreeSet<TreeShape> {
                shapes.iter().map(TreeShape::canonical).collect()
            };
            assert_eq!(canon(&by_entropy.argmin), canon(&by_cost.argmin));

            let vol = g.total_volume();
            let degree_term: f64 = (0..g.vertex_count())
                .map(|v| {
                    let d = g.degree(v);
                    if d > 0.0 {
                        d * d.log2()
                    } else {
                        0.0
                    }
                })
                .sum();
            let reconstructed = (-degree_term + 2.0 * by_cost.minimum) / vol;
            assert!(
                (by_entropy.minimum - reconstructed).abs() <= 1e-9,
                "identity between minima: {} vs {}",
                by_entropy.minimum,
                reconstructed
            );
        }
    }

    #[test]
    fn balanced_counts() {
        assert_eq!(balanced_binary_count(2), 1);
        assert_eq!(balanced_binary_count(3), 3);
        assert_eq!(balanced_binary_count(4), 3);
        assert_eq!(balanced_binary_count(5), 30);
        assert_eq!(balanced_binary_count(6), 90);
        assert_eq!(balanced_binary_count(7), 315);
        assert_eq!(balanced_binary_count(8), 315);
    }

    #[test]
    fn balanced_counts_match_enumeration() {
        for n in 2..=6 {
            let mut bbt = 0u64;
            enumerate_trees(n, EnumerationMode::Binary, |t| {
                if is_balanced_binary(t) {
                    bbt += 1;
                }
            })
            .unwrap();
            assert_eq!(bbt, balanced_binary_count(n), "n = {n}");
        }
    }
}
