//! Agreement metrics between clusterings.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::tree::ClusterTree;

/// A partition of the vertex set into disjoint non-empty blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlatPartition {
    /// Blocks with sorted members, ordered by their smallest member.
    pub blocks: Vec<Vec<usize>>,
    pub n: usize,
}

impl FlatPartition {
    pub fn from_blocks(n: usize, blocks: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = vec![false; n];
        let mut blocks: Vec<Vec<usize>> = blocks
            .into_iter()
            .map(|mut b| {
                b.sort_unstable();
                b
            })
            .collect();
        blocks.sort_by_key(|b| b.first().copied());
        for block in &blocks {
            if block.is_empty() {
                return Err(Error::domain("empty block in partition"));
            }
            for &v in block {
                if v >= n {
                    return Err(Error::domain(format!("vertex {v} out of range")));
                }
                if seen[v] {
                    return Err(Error::domain(format!("vertex {v} in two blocks")));
                }
                seen[v] = true;
            }
        }
        if seen.iter().any(|&s| !s) {
            return Err(Error::domain("partition does not cover every vertex"));
        }
        Ok(FlatPartition { blocks, n })
    }

    /// Vertex-indexed block labels.
    pub fn labels(&self) -> Vec<usize> {
        let mut labels = vec![0usize; self.n];
        for (i, block) in self.blocks.iter().enumerate() {
            for &v in block {
                labels[v] = i;
            }
        }
        labels
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }
}

/// The flat clustering a uniform-depth tree induces at internal level `j`:
/// the leaf sets of the nodes one level below, i.e. the clusters that level
/// `j`'s triangles partition the vertices into. For the trivial tree and
/// `j = 0` this is the singleton partition.
pub fn partition_at_level(tree: &ClusterTree, level: usize) -> Result<FlatPartition> {
    let height = tree.height();
    if level >= height {
        return Err(Error::domain(format!(
            "level {level} out of range for a tree of height {height}"
        )));
    }
    tree.levels()?; // enforces uniform leaf depth
    let blocks: Vec<Vec<usize>> = tree
        .nodes_at_depth(level + 1)
        .into_iter()
        .map(|id| tree.leaves_under(id))
        .collect();
    FlatPartition::from_blocks(tree.leaf_count(), blocks)
}

/// How mutual information is normalized into [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NmiNormalization {
    /// Divide by the arithmetic mean of the two entropies.
    #[default]
    Arithmetic,
    /// Divide by the geometric mean, for comparability with toolchains
    /// that use that convention.
    Geometric,
}

/// Normalized mutual information between two partitions of the same
/// vertex set, with arithmetic-mean normalization.
pub fn nmi(a: &FlatPartition, b: &FlatPartition) -> Result<f64> {
    nmi_with(a, b, NmiNormalization::Arithmetic)
}

/// NMI with an explicit normalization. Counts-based plug-in estimates, log
/// base 2. When both partitions are trivial (single block, zero entropy)
/// the score is 1 if they are equal and 0 otherwise; when exactly one side
/// has zero entropy the score is 0.
pub fn nmi_with(a: &FlatPartition, b: &FlatPartition, norm: NmiNormalization) -> Result<f64> {
    if a.n != b.n {
        return Err(Error::domain(format!(
            "partitions cover different universes: {} vs {} vertices",
            a.n, b.n
        )));
    }
    if a.n == 0 {
        return Err(Error::domain("empty vertex set"));
    }
    let n = a.n as f64;
    let la = a.labels();
    let lb = b.labels();

    let mut joint: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for v in 0..a.n {
        *joint.entry((la[v], lb[v])).or_insert(0.0) += 1.0;
    }
    let entropy = |p: &FlatPartition| -> f64 {
        p.blocks
            .iter()
            .map(|b| {
                let q = b.len() as f64 / n;
                -q * q.log2()
            })
            .sum()
    };
    let ha = entropy(a);
    let hb = entropy(b);

    if ha == 0.0 && hb == 0.0 {
        return Ok(if a.blocks == b.blocks { 1.0 } else { 0.0 });
    }

    let mut mi = 0.0;
    for (&(i, j), &count) in &joint {
        let pij = count / n;
        let pi = a.blocks[i].len() as f64 / n;
        let pj = b.blocks[j].len() as f64 / n;
        if pij > 0.0 {
            mi += pij * (pij / (pi * pj)).log2();
        }
    }

    let denom = match norm {
        NmiNormalization::Arithmetic => (ha + hb) / 2.0,
        NmiNormalization::Geometric => (ha * hb).sqrt(),
    };
    if denom == 0.0 {
        return Ok(0.0);
    }
    Ok((mi / denom).clamp(0.0, 1.0))
}

/// Average best-match Jaccard index: for every ground-truth cluster, the
/// best `|A intersect B| / |A union B|` over the tree's internal nodes
/// (root included, leaves excluded), averaged over the truth clusters.
pub fn avg_jaccard(tree: &ClusterTree, truth: &[Vec<usize>]) -> Result<f64> {
    if truth.is_empty() {
        return Err(Error::domain("empty ground-truth cluster list"));
    }
    let n = tree.leaf_count();
    let node_leaves: Vec<(usize, Vec<usize>)> = tree
        .internal_nodes()
        .map(|id| (id, tree.leaves_under(id)))
        .collect();

    let mut total = 0.0;
    for cluster in truth {
        if cluster.is_empty() {
            return Err(Error::domain("empty ground-truth cluster"));
        }
        let mut member = vec![false; n];
        for &v in cluster {
            if v >= n {
                return Err(Error::domain(format!("vertex {v} out of range")));
            }
            member[v] = true;
        }
        let mut best = 0.0f64;
        for (_, leaves) in &node_leaves {
            let inter = leaves.iter().filter(|&&v| member[v]).count() as f64;
            let union = leaves.len() as f64 + cluster.len() as f64 - inter;
            if union > 0.0 {
                best = best.max(inter / union);
            }
        }
        total += best;
    }
    Ok(total / truth.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use crate::tree::TreeShape;

    fn part(n: usize, blocks: &[&[usize]]) -> FlatPartition {
        FlatPartition::from_blocks(n, blocks.iter().map(|b| b.to_vec()).collect()).unwrap()
    }

    #[test]
    fn partition_validation() {
        assert!(FlatPartition::from_blocks(3, vec![vec![0, 1]]).is_err());
        assert!(FlatPartition::from_blocks(3, vec![vec![0, 1], vec![1, 2]]).is_err());
        assert!(FlatPartition::from_blocks(3, vec![vec![0, 1, 2], vec![]]).is_err());
        let p = part(4, &[&[2, 3], &[0, 1]]);
        assert_eq!(p.blocks, vec![vec![0, 1], vec![2, 3]]);
    }

    #[test]
    fn partition_at_level_cases() {
        let mut edges = Vec::new();
        for u in 0..4 {
            for v in (u + 1)..4 {
                edges.push((u, v, 1.0));
            }
        }
        let g = Graph::new(4, edges).unwrap();
        let trivial = ClusterTree::trivial(&g).unwrap();
        let p = partition_at_level(&trivial, 0).unwrap();
        assert_eq!(p.block_count(), 4, "trivial tree induces singletons");

        let shape = TreeShape::Internal(vec![
            TreeShape::Internal(vec![TreeShape::Leaf(0), TreeShape::Leaf(1)]),
            TreeShape::Internal(vec![TreeShape::Leaf(2), TreeShape::Leaf(3)]),
        ]);
        let t = ClusterTree::from_shape(&g, &shape).unwrap();
        let p = partition_at_level(&t, 0).unwrap();
        assert_eq!(p.blocks, vec![vec![0, 1], vec![2, 3]]);
        assert!(partition_at_level(&t, 2).is_err());
    }

    #[test]
    fn nmi_identical_partitions() {
        let a = part(4, &[&[0, 1], &[2, 3]]);
        assert_eq!(nmi(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn nmi_single_block_side_is_zero() {
        let one = part(4, &[&[0, 1, 2, 3]]);
        let two = part(4, &[&[0, 1], &[2, 3]]);
        assert_eq!(nmi(&one, &two).unwrap(), 0.0);
        assert_eq!(nmi(&one, &one).unwrap(), 1.0, "equal trivial partitions");
    }

    #[test]
    fn nmi_independent_partitions() {
        let a = part(4, &[&[0, 1], &[2, 3]]);
        let b = part(4, &[&[0, 2], &[1, 3]]);
        assert_eq!(nmi(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn nmi_symmetry_and_relabeling() {
        let a = part(6, &[&[0, 1, 2], &[3, 4], &[5]]);
        let b = part(6, &[&[0, 1], &[2, 3, 4], &[5]]);
        assert_eq!(nmi(&a, &b).unwrap(), nmi(&b, &a).unwrap());
        // permuting block order changes nothing
        let b2 = part(6, &[&[5], &[2, 3, 4], &[0, 1]]);
        assert_eq!(nmi(&a, &b).unwrap(), nmi(&a, &b2).unwrap());
    }

    #[test]
    fn nmi_geometric_variant() {
        let a = part(6, &[&[0, 1, 2], &[3, 4, 5]]);
        let b = part(6, &[&[0, 1], &[2, 3], &[4, 5]]);
        let arith = nmi_with(&a, &b, NmiNormalization::Arithmetic).unwrap();
        let geo = nmi_with(&a, &b, NmiNormalization::Geometric).unwrap();
        assert!(geo >= arith, "geometric mean <= arithmetic mean");
        assert!(nmi(&a, &part(5, &[&[0, 1, 2, 3, 4]])).is_err());
    }

    #[test]
    fn jaccard_examples() {
        let mut edges = Vec::new();
        for u in 0..4 {
            for v in (u + 1)..4 {
                edges.push((u, v, 1.0));
            }
        }
        let g = Graph::new(4, edges).unwrap();
        let shape = TreeShape::Internal(vec![
            TreeShape::Internal(vec![TreeShape::Leaf(0), TreeShape::Leaf(1)]),
            TreeShape::Internal(vec![TreeShape::Leaf(2), TreeShape::Leaf(3)]),
        ]);
        let t = ClusterTree::from_shape(&g, &shape).unwrap();

        // the tree's own clusters match themselves
        let own = vec![vec![0, 1], vec![2, 3]];
        assert_eq!(avg_jaccard(&t, &own).unwrap(), 1.0);

        // {0,1,2}: best internal node is the root at 3/4
        let truth = vec![vec![0, 1, 2]];
        assert!((avg_jaccard(&t, &truth).unwrap() - 0.75).abs() < 1e-12);

        assert!(avg_jaccard(&t, &[]).is_err());
        assert!(avg_jaccard(&t, &[vec![]]).is_err());
    }

    #[test]
    fn jaccard_order_invariance() {
        let mut edges = Vec::new();
        for u in 0..4 {
            for v in (u + 1)..4 {
                edges.push((u, v, 1.0));
            }
        }
        let g = Graph::new(4, edges).unwrap();
        let t = ClusterTree::trivial(&g).unwrap();
        let a = vec![vec![0, 1], vec![2, 3]];
        let b = vec![vec![2, 3], vec![0, 1]];
        assert_eq!(avg_jaccard(&t, &a).unwrap(), avg_jaccard(&t, &b).unwrap());
    }
}
