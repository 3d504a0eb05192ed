//! Entropy and cost functionals over (graph, cluster tree) pairs.
//!
//! All logarithms are base 2 and `0 * log 0` is taken as 0, so isolated
//! vertices and empty clusters contribute nothing.

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::tree::ClusterTree;

fn check_pair(graph: &Graph, tree: &ClusterTree) -> Result<()> {
    if tree.leaf_count() != graph.vertex_count() {
        return Err(Error::domain(format!(
            "tree has {} leaves but graph has {} vertices",
            tree.leaf_count(),
            graph.vertex_count()
        )));
    }
    if graph.total_volume() <= 0.0 {
        return Err(Error::domain("graph has no edges: total volume is zero"));
    }
    Ok(())
}

/// Entropy of the degree-proportional distribution over vertices:
/// `-sum_v (d_v / vol) log2(d_v / vol)`.
pub fn one_level_entropy(graph: &Graph) -> Result<f64> {
    let vol = graph.total_volume();
    if vol <= 0.0 {
        return Err(Error::domain("graph has no edges: total volume is zero"));
    }
    let mut h = 0.0;
    for v in 0..graph.vertex_count() {
        let d = graph.degree(v);
        if d > 0.0 {
            h -= d / vol * (d / vol).log2();
        }
    }
    Ok(h)
}

/// Structural entropy of the graph on a cluster tree: for every non-root
/// node `a` with parent `p`, add `(cut_a / vol) * log2(vol_p / vol_a)`.
/// Nodes with zero cut or zero volume contribute nothing.
pub fn structural_entropy(graph: &Graph, tree: &ClusterTree) -> Result<f64> {
    check_pair(graph, tree)?;
    let vol = graph.total_volume();
    let mut h = 0.0;
    for id in 0..tree.node_count() {
        if id == tree.root() {
            continue;
        }
        let node = tree.node(id);
        if node.cut <= 0.0 || node.volume <= 0.0 {
            continue;
        }
        let parent = tree.node(node.parent);
        h += node.cut / vol * (parent.volume / node.volume).log2();
    }
    Ok(h)
}

/// Edge-sum cost: `sum_{(u,v) in E} w(u,v) * log2(vol(lca(u,v)))`.
///
/// Minimizing this over trees is equivalent to minimizing structural
/// entropy; see [`entropy_identity_residual`] for the exact relation.
pub fn cost_se(graph: &Graph, tree: &ClusterTree) -> Result<f64> {
    check_pair(graph, tree)?;
    let mut cost = 0.0;
    for e in graph.edges() {
        let lca = tree.lca(e.u, e.v)?;
        cost += e.w * tree.node(lca).volume.log2();
    }
    Ok(cost)
}

/// Dasgupta's cost: `sum_{(u,v) in E} w(u,v) * |lca(u,v)|` with `|.|` the
/// leaf count of the cluster.
pub fn cost_dasgupta(graph: &Graph, tree: &ClusterTree) -> Result<f64> {
    check_pair(graph, tree)?;
    let mut cost = 0.0;
    for e in graph.edges() {
        let lca = tree.lca(e.u, e.v)?;
        cost += e.w * tree.node(lca).leaf_count as f64;
    }
    Ok(cost)
}

/// Generalized size-based cost: `sum_{(u,v) in E} w(u,v) * f(|lca(u,v)|)`.
/// `f` must be finite on every cluster size that occurs.
pub fn cost_concave(
    graph: &Graph,
    tree: &ClusterTree,
    f: impl Fn(usize) -> f64,
) -> Result<f64> {
    check_pair(graph, tree)?;
    let mut cost = 0.0;
    for e in graph.edges() {
        let lca = tree.lca(e.u, e.v)?;
        let size = tree.node(lca).leaf_count;
        let val = f(size);
        if !val.is_finite() {
            return Err(Error::domain(format!(
                "cost function undefined at cluster size {size}"
            )));
        }
        cost += e.w * val;
    }
    Ok(cost)
}

/// Residual of the identity linking the node-sum and edge-sum routes:
///
/// `structural_entropy - (1/vol) * ( -sum_u d_u log2 d_u + 2 * cost_se )`
///
/// The two routes traverse different objects (tree nodes vs. graph edges),
/// so a residual within float error is strong evidence both are correct.
pub fn entropy_identity_residual(graph: &Graph, tree: &ClusterTree) -> Result<f64> {
    let h = structural_entropy(graph, tree)?;
    let cost = cost_se(graph, tree)?;
    let vol = graph.total_volume();
    let mut degree_term = 0.0;
    for v in 0..graph.vertex_count() {
        let d = graph.degree(v);
        if d > 0.0 {
            degree_term += d * d.log2();
        }
    }
    Ok(h - (-degree_term + 2.0 * cost) / vol)
}

/// The main functionals evaluated together, as reported by the CLI.
#[derive(Debug, Clone, PartialEq)]
pub struct CostReport {
    pub one_level_entropy: f64,
    pub structural_entropy: f64,
    pub cost_se: f64,
    pub cost_dasgupta: f64,
}

impl CostReport {
    pub fn compute(graph: &Graph, tree: &ClusterTree) -> Result<Self> {
        Ok(CostReport {
            one_level_entropy: one_level_entropy(graph)?,
            structural_entropy: structural_entropy(graph, tree)?,
            cost_se: cost_se(graph, tree)?,
            cost_dasgupta: cost_dasgupta(graph, tree)?,
        })
    }

    /// Flat `key value` lines, one per field.
    pub fn to_kv(&self) -> String {
        format!(
            "one_level_entropy {}\nstructural_entropy {}\ncost_se {}\ncost_dasgupta {}\n",
            self.one_level_entropy, self.structural_entropy, self.cost_se, self.cost_dasgupta
        )
    }
}
