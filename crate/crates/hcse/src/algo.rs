//! Sparsest-level stratification of cluster trees.
//!
//! One round of stratification splits a whole tree level in two. For every
//! internal node `u` the local parent-children structure (the `u`-triangle)
//! is restructured on a trial basis: *stretch* greedily agglomerates the
//! children into a binary subtree, merging the best-ranked sibling pair at
//! every step, and *compress* flattens that subtree back to height two with
//! the least total entropy increase. The level whose triangles offer the
//! best combined reduction (see [`LevelObjective`]) is then actually split.
//! Iterating this grows the tree one level per round; the recorded
//! per-round entropy reductions drive the automatic choice of the final
//! height.
//!
//! Everything is deterministic: ties in the greedy choices break toward the
//! smallest node ids, and parallel trial evaluation collects results in a
//! fixed order before reducing.

use crate::costs;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::par;
use crate::tree::{ClusterTree, TreeShape};
use std::collections::HashMap;

/// Which cut weight a triangle's local entropy sums over.
///
/// The local entropy of an internal node `u` is the part of the tree's
/// structural entropy contributed by `u`'s children. `ChildCut` weights each
/// term by the child's own cut, which makes the sum exactly the children's
/// share of the global entropy. `ApexCut` weights every term by the apex's
/// cut instead and is kept only for comparison: under it the root always has
/// zero local entropy, so the root level could never be selected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CutConvention {
    #[default]
    ChildCut,
    ApexCut,
}

/// How the round's level to split is chosen among the levels' triangles.
///
/// `ScaledReduction` (the default) scores a level by its total entropy
/// reduction divided by the square root of its width. The plain total
/// favors populous levels of many small gains over a single strong
/// triangle, while the plain mean lets a worthless one-triangle
/// rearrangement outrank a broad level of real refinements; the square-root
/// scaling sits between the two and keeps strong coherent levels first.
/// `MeanSparsity` maximizes the average relative reduction (each triangle's
/// reduction divided by its local entropy); it systematically prefers
/// structureless levels, whose relative gain is scale-free, and is kept for
/// comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LevelObjective {
    #[default]
    ScaledReduction,
    MeanSparsity,
}

/// Tuning knobs for the clustering entry points.
#[derive(Debug, Clone)]
pub struct HcseOptions {
    /// Upper bound on stratification rounds in automatic mode.
    pub max_rounds: usize,
    pub cut_convention: CutConvention,
    pub level_objective: LevelObjective,
    /// Permit the automatic rule to settle on a two-level tree by treating
    /// the undefined first second-difference as equal to the second one.
    /// Off by default, which makes the earliest selectable height three.
    pub allow_height_two: bool,
    /// Cross-check every closed-form entropy delta against a full
    /// recomputation from the graph. Slow; meant for tests.
    pub validate: bool,
}

impl Default for HcseOptions {
    fn default() -> Self {
        HcseOptions {
            max_rounds: 12,
            cut_convention: CutConvention::ChildCut,
            level_objective: LevelObjective::ScaledReduction,
            allow_height_two: false,
            validate: false,
        }
    }
}

/// An internal node together with its children and the contraction of the
/// graph onto the children's clusters.
#[derive(Debug, Clone)]
pub struct Triangle {
    pub apex: usize,
    /// Child node ids, ascending; index `i` is cluster `i` of the quotient.
    pub children: Vec<usize>,
    pub quotient: crate::graph::QuotientGraph,
}

/// Build the triangle rooted at `apex`, contracting the graph onto the
/// children's leaf sets.
pub fn triangle(tree: &ClusterTree, graph: &Graph, apex: usize) -> Result<Triangle> {
    let node = tree.node(apex);
    if node.is_leaf() {
        return Err(Error::domain(format!(
            "node {apex} is a leaf, not a triangle apex"
        )));
    }
    let mut children = node.children.clone();
    children.sort_unstable();
    let clusters: Vec<Vec<usize>> = children.iter().map(|&c| tree.leaves_under(c)).collect();
    let quotient = graph.quotient(&clusters)?;
    Ok(Triangle {
        apex,
        children,
        quotient,
    })
}

/// Local entropy of an internal node: the sum over its children `v` of
/// `(cut / vol(V)) * log2(vol(u) / vol(v))`, the children's contribution to
/// the structural entropy. See [`CutConvention`] for the weight choice.
pub fn local_entropy(
    tree: &ClusterTree,
    graph: &Graph,
    u: usize,
    convention: CutConvention,
) -> Result<f64> {
    let node = tree.node(u);
    if node.is_leaf() {
        return Err(Error::domain(format!("node {u} is a leaf")));
    }
    let vol = graph.total_volume();
    if vol <= 0.0 {
        return Ok(0.0);
    }
    let mut h = 0.0;
    for &c in &node.children {
        let child = tree.node(c);
        let weight = match convention {
            CutConvention::ChildCut => child.cut,
            CutConvention::ApexCut => node.cut,
        };
        if weight > 0.0 && child.volume > 0.0 && node.volume > child.volume {
            h += weight / vol * (node.volume / child.volume).log2();
        }
    }
    Ok(h)
}

/// Entropy reduction from merging two current children of the apex into a
/// new intermediate node: `(2 w(a,b) / vol(V)) * log2(vol(u) / vol(a u b))`,
/// never negative. `a` and `b` are child node ids.
pub fn merge_gain(tri: &Triangle, graph: &Graph, a: usize, b: usize) -> Result<f64> {
    if a == b {
        return Err(Error::domain("merge_gain needs two distinct children"));
    }
    let position = |id: usize| {
        tri.children
            .iter()
            .position(|&c| c == id)
            .ok_or_else(|| Error::domain(format!("{id} is not a child of the apex")))
    };
    let ia = position(a)?;
    let ib = position(b)?;
    let apex_volume: f64 = tri.quotient.cluster_volume.iter().sum();
    Ok(pair_gain(
        tri.quotient.weight(ia, ib),
        tri.quotient.cluster_volume[ia] + tri.quotient.cluster_volume[ib],
        apex_volume,
        graph.total_volume(),
    ))
}

fn pair_gain(w: f64, merged_volume: f64, apex_volume: f64, total_volume: f64) -> f64 {
    if w <= 0.0 || merged_volume <= 0.0 || total_volume <= 0.0 {
        return 0.0;
    }
    let ratio = apex_volume / merged_volume;
    if ratio <= 1.0 {
        return 0.0;
    }
    2.0 * w / total_volume * ratio.log2()
}

/// Ranking used by [`stretch`] to pick the next sibling pair: the merge's
/// entropy gain normalized by the geometric mean of the two volumes.
///
/// Ranking by the raw gain lets a large cluster outbid dense local merges
/// for weakly linked vertices (its volume-ratio factor shrinks only
/// logarithmically), which measurably collapses sparse block-model graphs
/// into one giant cluster. Normalizing by the merged volume overshoots the
/// other way: it prices extending a half-built cluster above starting fresh
/// pairs, so agglomeration degenerates into pairing everything once and
/// seeding many mixed blocks. The geometric mean keeps growth ahead of fresh
/// seeding while still refusing stragglers, and pairs with no linking weight
/// all rank zero.
fn merge_rank(gain: f64, volume_a: f64, volume_b: f64) -> f64 {
    let norm = (volume_a * volume_b).sqrt();
    if norm <= 0.0 {
        return 0.0;
    }
    gain / norm
}

/// The working copy of a triangle while it is stretched and compressed.
///
/// Locals `0..leaf_count` are the original children (the subtree's leaves,
/// ordered like [`Triangle::children`]); nodes created by merging are
/// appended after them. A `parent` of `None` means the node hangs directly
/// under the apex.
#[derive(Debug, Clone)]
pub struct LocalTree {
    nodes: Vec<LocalNode>,
    leaf_count: usize,
    apex_volume: f64,
    total_volume: f64,
    /// Running structural-entropy reduction relative to the flat triangle:
    /// merge gains accumulate, contraction penalties subtract.
    pub entropy_gain: f64,
}

#[derive(Debug, Clone)]
struct LocalNode {
    parent: Option<usize>,
    children: Vec<usize>,
    volume: f64,
    cut: f64,
    alive: bool,
}

impl LocalTree {
    fn from_triangle(tri: &Triangle, graph: &Graph) -> Self {
        let l = tri.children.len();
        LocalTree {
            nodes: (0..l)
                .map(|i| LocalNode {
                    parent: None,
                    children: Vec::new(),
                    volume: tri.quotient.cluster_volume[i],
                    cut: tri.quotient.cluster_cut[i],
                    alive: true,
                })
                .collect(),
            leaf_count: l,
            apex_volume: tri.quotient.cluster_volume.iter().sum(),
            total_volume: graph.total_volume(),
            entropy_gain: 0.0,
        }
    }

    pub fn leaf_count(&self) -> usize {
        self.leaf_count
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_alive(&self, id: usize) -> bool {
        self.nodes[id].alive
    }

    pub fn parent(&self, id: usize) -> Option<usize> {
        self.nodes[id].parent
    }

    pub fn children(&self, id: usize) -> &[usize] {
        &self.nodes[id].children
    }

    pub fn volume(&self, id: usize) -> f64 {
        self.nodes[id].volume
    }

    pub fn cut(&self, id: usize) -> f64 {
        self.nodes[id].cut
    }

    /// Alive nodes hanging directly under the apex, ascending.
    pub fn roots(&self) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&i| self.nodes[i].alive && self.nodes[i].parent.is_none())
            .collect()
    }

    /// Depth of every node below the apex (the apex itself is at depth 0);
    /// dead nodes get `usize::MAX`.
    fn depths(&self) -> Vec<usize> {
        let mut depth = vec![usize::MAX; self.nodes.len()];
        let mut queue: std::collections::VecDeque<usize> = self.roots().into();
        for &r in &queue {
            depth[r] = 1;
        }
        while let Some(id) = queue.pop_front() {
            for &c in &self.nodes[id].children {
                depth[c] = depth[id] + 1;
                queue.push_back(c);
            }
        }
        depth
    }

    /// Distance from the apex to the deepest subtree leaf.
    pub fn height(&self) -> usize {
        let depth = self.depths();
        (0..self.leaf_count).map(|i| depth[i]).max().unwrap_or(0)
    }

    /// Assemble the whole tree's topology with this local structure swapped
    /// in under the apex.
    fn full_shape(&self, tree: &ClusterTree, tri: &Triangle) -> TreeShape {
        fn walk(
            tree: &ClusterTree,
            node: usize,
            local: &LocalTree,
            tri: &Triangle,
        ) -> TreeShape {
            if node == tri.apex {
                return TreeShape::Internal(
                    local
                        .roots()
                        .into_iter()
                        .map(|r| local.shape_of(r, tree, tri))
                        .collect(),
                );
            }
            match tree.node(node).vertex {
                Some(v) => TreeShape::Leaf(v),
                None => TreeShape::Internal(
                    tree.node(node)
                        .children
                        .iter()
                        .map(|&c| walk(tree, c, local, tri))
                        .collect(),
                ),
            }
        }
        walk(tree, tree.root(), self, tri)
    }

    fn shape_of(&self, id: usize, tree: &ClusterTree, tri: &Triangle) -> TreeShape {
        if id < self.leaf_count {
            tree.shape_of(tri.children[id])
        } else {
            TreeShape::Internal(
                self.nodes[id]
                    .children
                    .iter()
                    .map(|&c| self.shape_of(c, tree, tri))
                    .collect(),
            )
        }
    }
}

/// Cross-check of closed-form deltas against full recomputation from the
/// graph, plus the extremes needed by the monotonicity contracts.
#[derive(Debug, Clone)]
pub struct ValidationStats {
    pub checks: usize,
    /// Largest |closed form - brute difference| observed.
    pub max_deviation: f64,
    pub min_merge_gain: f64,
    pub min_contract_penalty: f64,
    pub min_trial_delta: f64,
    pub min_round_delta: f64,
}

impl Default for ValidationStats {
    fn default() -> Self {
        ValidationStats {
            checks: 0,
            max_deviation: 0.0,
            min_merge_gain: f64::INFINITY,
            min_contract_penalty: f64::INFINITY,
            min_trial_delta: f64::INFINITY,
            min_round_delta: f64::INFINITY,
        }
    }
}

impl ValidationStats {
    fn absorb(&mut self, other: &ValidationStats) {
        self.checks += other.checks;
        self.max_deviation = self.max_deviation.max(other.max_deviation);
        self.min_merge_gain = self.min_merge_gain.min(other.min_merge_gain);
        self.min_contract_penalty = self.min_contract_penalty.min(other.min_contract_penalty);
        self.min_trial_delta = self.min_trial_delta.min(other.min_trial_delta);
        self.min_round_delta = self.min_round_delta.min(other.min_round_delta);
    }
}

/// Observer that rebuilds the full tree after every elementary edit and
/// compares the true entropy change against the closed form.
struct Validator<'a> {
    tree: &'a ClusterTree,
    graph: &'a Graph,
    tri: &'a Triangle,
    previous_entropy: f64,
    stats: ValidationStats,
}

impl<'a> Validator<'a> {
    fn new(
        tree: &'a ClusterTree,
        graph: &'a Graph,
        tri: &'a Triangle,
        local: &LocalTree,
    ) -> Result<Self> {
        let materialized = ClusterTree::from_shape(graph, &local.full_shape(tree, tri))?;
        let previous_entropy = costs::structural_entropy(graph, &materialized)?;
        Ok(Validator {
            tree,
            graph,
            tri,
            previous_entropy,
            stats: ValidationStats::default(),
        })
    }

    fn observe(&mut self, local: &LocalTree, closed_delta: f64, is_merge: bool) -> Result<()> {
        let materialized =
            ClusterTree::from_shape(self.graph, &local.full_shape(self.tree, self.tri))?;
        let entropy = costs::structural_entropy(self.graph, &materialized)?;
        let brute = if is_merge {
            self.previous_entropy - entropy
        } else {
            entropy - self.previous_entropy
        };
        self.previous_entropy = entropy;
        self.stats.checks += 1;
        self.stats.max_deviation = self.stats.max_deviation.max((closed_delta - brute).abs());
        if is_merge {
            self.stats.min_merge_gain = self.stats.min_merge_gain.min(closed_delta);
        } else {
            self.stats.min_contract_penalty = self.stats.min_contract_penalty.min(closed_delta);
        }
        Ok(())
    }
}

/// Agglomerate the triangle's children into a binary subtree, merging the
/// best-ranked sibling pair at every step: entropy gain normalized by the
/// geometric mean of the pair's volumes, ties toward the smallest pair of
/// ids. `entropy_gain` accumulates the exact entropy reduction of the
/// merges performed. Runs exactly `l - 1` merges; with a single child it
/// inserts one wrapper node instead.
pub fn stretch(tri: &Triangle, graph: &Graph) -> LocalTree {
    stretch_observed(tri, graph, &mut None).expect("stretch without validation cannot fail")
}

fn stretch_observed(
    tri: &Triangle,
    graph: &Graph,
    validator: &mut Option<Validator<'_>>,
) -> Result<LocalTree> {
    let l = tri.children.len();
    let mut local = LocalTree::from_triangle(tri, graph);
    if l == 1 {
        wrap(&mut local, 0);
        return Ok(local);
    }

    let mut adjacency: Vec<HashMap<usize, f64>> = vec![HashMap::new(); l];
    for (a, b, w) in tri.quotient.pairs() {
        adjacency[a].insert(b, w);
        adjacency[b].insert(a, w);
    }
    let mut active: std::collections::BTreeSet<usize> = (0..l).collect();

    for _ in 0..(l - 1) {
        // the lexicographically smallest active pair backs the search: all
        // zero-weight pairs rank zero, so only linked pairs need enumerating
        let mut it = active.iter();
        let (&a0, &b0) = (it.next().unwrap(), it.next().unwrap());
        let seed_gain = pair_gain(
            adjacency[a0].get(&b0).copied().unwrap_or(0.0),
            local.nodes[a0].volume + local.nodes[b0].volume,
            local.apex_volume,
            local.total_volume,
        );
        let mut best = (
            merge_rank(seed_gain, local.nodes[a0].volume, local.nodes[b0].volume),
            a0,
            b0,
        );
        for &a in &active {
            for (&b, &w) in &adjacency[a] {
                if b <= a || w <= 0.0 || !active.contains(&b) {
                    continue;
                }
                let (va, vb) = (local.nodes[a].volume, local.nodes[b].volume);
                let rank = merge_rank(
                    pair_gain(w, va + vb, local.apex_volume, local.total_volume),
                    va,
                    vb,
                );
                if rank > best.0 || (rank == best.0 && (a, b) < (best.1, best.2)) {
                    best = (rank, a, b);
                }
            }
        }

        let (_, a, b) = best;
        let id = local.nodes.len();
        let w_ab = adjacency[a].get(&b).copied().unwrap_or(0.0);
        let gain = pair_gain(
            w_ab,
            local.nodes[a].volume + local.nodes[b].volume,
            local.apex_volume,
            local.total_volume,
        );
        local.nodes.push(LocalNode {
            parent: None,
            children: vec![a, b],
            volume: local.nodes[a].volume + local.nodes[b].volume,
            cut: local.nodes[a].cut + local.nodes[b].cut - 2.0 * w_ab,
            alive: true,
        });
        local.nodes[a].parent = Some(id);
        local.nodes[b].parent = Some(id);
        local.entropy_gain += gain;

        let mut merged = std::mem::take(&mut adjacency[a]);
        merged.remove(&b);
        for (k, w) in adjacency[b].drain() {
            if k != a {
                *merged.entry(k).or_insert(0.0) += w;
            }
        }
        for (&x, &w) in &merged {
            adjacency[x].remove(&a);
            adjacency[x].remove(&b);
            adjacency[x].insert(id, w);
        }
        adjacency.push(merged);
        active.remove(&a);
        active.remove(&b);
        active.insert(id);

        if let Some(v) = validator.as_mut() {
            v.observe(&local, gain, true)?;
        }
    }
    Ok(local)
}

fn wrap(local: &mut LocalTree, child: usize) {
    let id = local.nodes.len();
    local.nodes.push(LocalNode {
        parent: None,
        children: vec![child],
        volume: local.nodes[child].volume,
        cut: local.nodes[child].cut,
        alive: true,
    });
    local.nodes[child].parent = Some(id);
}

/// Entropy increase from contracting the edge above node `v`: `v`'s children
/// move up to `v`'s parent and `v` disappears. Equals
/// `((sum of children cuts) - cut(v)) / vol(V) * log2(vol(parent) / vol(v))`,
/// never negative: the numerator is twice the weight linking `v`'s children.
pub fn compress_penalty(local: &LocalTree, v: usize) -> Result<f64> {
    if v < local.leaf_count {
        return Err(Error::domain(format!(
            "local node {v} is a leaf of the subtree"
        )));
    }
    if !local.nodes[v].alive {
        return Err(Error::domain(format!(
            "local node {v} was already contracted"
        )));
    }
    Ok(contract_penalty_unchecked(local, v))
}

fn contract_penalty_unchecked(local: &LocalTree, v: usize) -> f64 {
    let node = &local.nodes[v];
    let parent_volume = match node.parent {
        Some(p) => local.nodes[p].volume,
        None => local.apex_volume,
    };
    if node.volume <= 0.0 || parent_volume <= node.volume || local.total_volume <= 0.0 {
        return 0.0;
    }
    let child_cuts: f64 = node.children.iter().map(|&c| local.nodes[c].cut).sum();
    let internal = child_cuts - node.cut;
    if internal <= 0.0 {
        return 0.0;
    }
    internal / local.total_volume * (parent_volume / node.volume).log2()
}

/// Flatten a stretched subtree to height two with the least total entropy
/// increase: keep the antichain of subtree nodes that preserves the most
/// entropy reduction in the final configuration (a linear tree walk over the
/// merge hierarchy) and contract every other internal edge. Leaves that
/// surface directly under the apex receive an entropy-neutral wrapper, so
/// every subtree leaf ends at depth exactly two.
pub fn compress(local: &mut LocalTree) {
    compress_observed(local, &mut None).expect("compress without validation cannot fail")
}

fn compress_observed(local: &mut LocalTree, validator: &mut Option<Validator<'_>>) -> Result<()> {
    let n = local.nodes.len();

    // a node kept as a group under the apex preserves, relative to the flat
    // triangle, (sum of member cuts - own cut) / vol * log2(apex / vol):
    // twice the weight linking its members, priced at the final depth
    let mut member_cut_sum = vec![0.0; n];
    let mut value = vec![0.0; n];
    for leaf in 0..local.leaf_count {
        member_cut_sum[leaf] = local.nodes[leaf].cut;
    }
    for s in local.leaf_count..n {
        member_cut_sum[s] = local.nodes[s]
            .children
            .iter()
            .map(|&c| member_cut_sum[c])
            .sum();
        let node = &local.nodes[s];
        let internal = member_cut_sum[s] - node.cut;
        if internal > 0.0
            && node.volume > 0.0
            && local.apex_volume > node.volume
            && local.total_volume > 0.0
        {
            value[s] = internal / local.total_volume * (local.apex_volume / node.volume).log2();
        }
    }

    // best achievable value per subtree; merge nodes are created after their
    // children, so creation order is topological
    let mut best = vec![0.0; n];
    for s in local.leaf_count..n {
        let descend: f64 = local.nodes[s].children.iter().map(|&c| best[c]).sum();
        best[s] = value[s].max(descend);
    }

    // walk down from the roots, keeping a node when it beats its interior
    // (ties keep the coarser node)
    let mut keep = vec![false; n];
    let mut stack = local.roots();
    while let Some(s) = stack.pop() {
        if s < local.leaf_count {
            keep[s] = true; // stray leaf, wrapped below
            continue;
        }
        let descend: f64 = local.nodes[s].children.iter().map(|&c| best[c]).sum();
        if value[s] >= descend {
            keep[s] = true;
        } else {
            stack.extend(local.nodes[s].children.iter().copied());
        }
    }

    // contract every non-kept merge node, top-down, charging each literal
    // penalty as it happens
    for v in (local.leaf_count..n).rev() {
        if keep[v] || !local.nodes[v].alive {
            continue;
        }
        let penalty = contract_penalty_unchecked(local, v);
        let parent = local.nodes[v].parent;
        let children = std::mem::take(&mut local.nodes[v].children);
        for &c in &children {
            local.nodes[c].parent = parent;
        }
        if let Some(p) = parent {
            let pos = local.nodes[p]
                .children
                .iter()
                .position(|&c| c == v)
                .expect("child lists stay consistent");
            local.nodes[p].children.remove(pos);
            local.nodes[p].children.extend(children);
        }
        local.nodes[v].alive = false;
        local.entropy_gain -= penalty;

        if let Some(obs) = validator.as_mut() {
            obs.observe(local, penalty, false)?;
        }
    }

    // wrap leaves that ended up directly under the apex
    for leaf in 0..local.leaf_count {
        if local.nodes[leaf].parent.is_none() {
            wrap(local, leaf);
        }
    }
    debug_assert_eq!(local.height(), 2);
    Ok(())
}

/// A staged intermediate node: which current children of the apex it adopts
/// and its volume and cut caches.
#[derive(Debug, Clone)]
pub struct TrialGroup {
    /// Real tree node ids, ascending.
    pub members: Vec<usize>,
    pub volume: f64,
    pub cut: f64,
}

/// Result of trying a stretch-and-compress round on one triangle.
#[derive(Debug, Clone)]
pub struct Trial {
    /// Entropy reduction of applying `groups`; never negative. Zero means
    /// the triangle gains nothing and will only be wrapped.
    pub delta: f64,
    pub groups: Vec<TrialGroup>,
}

/// Stretch and compress a copy of the `u`-triangle and report the staged
/// intermediate level together with its entropy reduction. The tree itself
/// is not modified. A reduction that is not strictly positive degenerates to
/// a single wrapper group, keeping the flat triangle.
pub fn trial_stratify(tree: &ClusterTree, graph: &Graph, apex: usize) -> Result<Trial> {
    Ok(trial_observed(tree, graph, apex, false)?.0)
}

fn trial_observed(
    tree: &ClusterTree,
    graph: &Graph,
    apex: usize,
    validate: bool,
) -> Result<(Trial, Option<ValidationStats>)> {
    let tri = triangle(tree, graph, apex)?;
    let wrapper = |tri: &Triangle| -> Trial {
        let node = tree.node(tri.apex);
        Trial {
            delta: 0.0,
            groups: vec![TrialGroup {
                members: tri.children.clone(),
                volume: node.volume,
                cut: node.cut,
            }],
        }
    };

    if tri.children.len() == 1 {
        return Ok((wrapper(&tri), validate.then(ValidationStats::default)));
    }

    let mut validator = if validate {
        let flat = LocalTree::from_triangle(&tri, graph);
        Some(Validator::new(tree, graph, &tri, &flat)?)
    } else {
        None
    };

    let mut local = stretch_observed(&tri, graph, &mut validator)?;
    compress_observed(&mut local, &mut validator)?;

    let mut stats = validator.map(|v| v.stats);
    if let Some(s) = stats.as_mut() {
        s.min_trial_delta = s.min_trial_delta.min(local.entropy_gain);
    }

    if local.entropy_gain <= 0.0 {
        return Ok((wrapper(&tri), stats));
    }

    let mut groups: Vec<TrialGroup> = local
        .roots()
        .into_iter()
        .map(|r| {
            let mut members: Vec<usize> = if r < local.leaf_count() {
                vec![tri.children[r]]
            } else {
                local.children(r).iter().map(|&c| tri.children[c]).collect()
            };
            members.sort_unstable();
            TrialGroup {
                members,
                volume: local.volume(r),
                cut: local.cut(r),
            }
        })
        .collect();
    groups.sort_by_key(|g| g.members[0]);

    Ok((
        Trial {
            delta: local.entropy_gain,
            groups,
        },
        stats,
    ))
}

/// Per-node and average sparsity of one level.
#[derive(Debug, Clone)]
pub struct LevelSparsity {
    pub level: usize,
    /// `(node id, sparsity)` pairs, ascending by node id.
    pub per_node: Vec<(usize, f64)>,
    pub average: f64,
}

/// Sparsity of level `j`: for every node `u` there, the trial entropy
/// reduction relative to the local entropy (`delta(u) / H(u)`, zero when the
/// local entropy vanishes), averaged over the level.
pub fn level_sparsity(
    tree: &ClusterTree,
    graph: &Graph,
    level: usize,
    convention: CutConvention,
) -> Result<LevelSparsity> {
    let levels = tree.levels()?;
    let nodes = levels
        .get(level)
        .ok_or_else(|| Error::domain(format!("level {level} out of range")))?;
    let trials = par::map_collect(nodes, |&u| trial_stratify(tree, graph, u));
    let mut per_node = Vec::with_capacity(nodes.len());
    for (&u, trial) in nodes.iter().zip(trials) {
        let trial = trial?;
        let h = local_entropy(tree, graph, u, convention)?;
        let spar = if h > 0.0 { trial.delta / h } else { 0.0 };
        per_node.push((u, spar));
    }
    let average = if per_node.is_empty() {
        0.0
    } else {
        per_node.iter().map(|(_, s)| s).sum::<f64>() / per_node.len() as f64
    };
    Ok(LevelSparsity {
        level,
        per_node,
        average,
    })
}

/// One record per stratification round.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRound {
    /// 1-based round index.
    pub round: usize,
    /// Structural entropy removed by this round.
    pub delta: f64,
    /// The level that was split.
    pub chosen_level: usize,
    /// Average sparsity of every level at decision time.
    pub level_sparsities: Vec<f64>,
}

/// The per-round entropy-reduction history of a clustering run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StratificationTrace {
    pub rounds: Vec<TraceRound>,
}

impl StratificationTrace {
    /// Second differences `delta_t - delta_{t-1}`, element `i` belonging to
    /// round `i + 2`.
    pub fn second_differences(&self) -> Vec<f64> {
        self.rounds
            .windows(2)
            .map(|w| w[1].delta - w[0].delta)
            .collect()
    }

    /// CSV with one row per round: `t,delta_h,second_difference,chosen_level`.
    /// The second difference is empty on the first row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,delta_h,second_difference,chosen_level\n");
        for (i, round) in self.rounds.iter().enumerate() {
            let second = if i == 0 {
                String::new()
            } else {
                format!("{}", round.delta - self.rounds[i - 1].delta)
            };
            out.push_str(&format!(
                "{},{},{},{}\n",
                round.round, round.delta, second, round.chosen_level
            ));
        }
        out
    }

    /// Long-format CSV of the per-level average sparsities seen each round:
    /// `t,level,avg_sparsity`.
    pub fn sparsity_csv(&self) -> String {
        let mut out = String::from("t,level,avg_sparsity\n");
        for round in &self.rounds {
            for (level, spar) in round.level_sparsities.iter().enumerate() {
                out.push_str(&format!("{},{},{}\n", round.round, level, spar));
            }
        }
        out
    }
}

/// Result of one stratification round.
#[derive(Debug)]
pub struct StratifyStep {
    pub tree: ClusterTree,
    /// Entropy reduction; zero when no level could improve.
    pub delta: f64,
    /// The level that was split; `None` when every level had zero sparsity
    /// and the tree was returned unchanged.
    pub chosen_level: Option<usize>,
    pub level_sparsities: Vec<f64>,
    pub validation: Option<ValidationStats>,
}

/// Split the best level of a uniform-depth tree in two, chosen by the
/// configured [`LevelObjective`]. Every node of the winning level receives
/// its staged intermediate groups; nodes with no gain receive a single
/// wrapper, so the tree height grows by exactly one everywhere. Returns the
/// tree unchanged when no level can reduce the entropy.
pub fn stratify_once(tree: ClusterTree, graph: &Graph, opts: &HcseOptions) -> Result<StratifyStep> {
    let levels = tree.levels()?;
    let mut validation = opts.validate.then(ValidationStats::default);
    let entropy_before = if opts.validate {
        Some(costs::structural_entropy(graph, &tree)?)
    } else {
        None
    };

    // trial-stratify every internal node of every level in one parallel pass
    let all_nodes: Vec<usize> = levels.iter().flatten().copied().collect();
    let trials: Vec<Result<(Trial, Option<ValidationStats>)>> =
        par::map_collect(&all_nodes, |&u| trial_observed(&tree, graph, u, opts.validate));
    let mut by_node: HashMap<usize, Trial> = HashMap::with_capacity(all_nodes.len());
    for (&u, result) in all_nodes.iter().zip(trials) {
        let (trial, stats) = result?;
        if let (Some(total), Some(stats)) = (validation.as_mut(), stats.as_ref()) {
            total.absorb(stats);
        }
        by_node.insert(u, trial);
    }

    let mut level_sparsities = Vec::with_capacity(levels.len());
    let mut level_scores = Vec::with_capacity(levels.len());
    for nodes in &levels {
        let mut sparsity = 0.0;
        let mut reduction = 0.0;
        for &u in nodes {
            let h = local_entropy(&tree, graph, u, opts.cut_convention)?;
            if h > 0.0 {
                sparsity += by_node[&u].delta / h;
            }
            reduction += by_node[&u].delta;
        }
        let count = nodes.len().max(1) as f64;
        level_sparsities.push(sparsity / count);
        level_scores.push(reduction / count.sqrt());
    }

    let objective = match opts.level_objective {
        LevelObjective::ScaledReduction => &level_scores,
        LevelObjective::MeanSparsity => &level_sparsities,
    };
    let (chosen, best) = objective
        .iter()
        .enumerate()
        .fold((0usize, 0.0f64), |acc, (j, &s)| if s > acc.1 { (j, s) } else { acc });

    if best <= 0.0 {
        return Ok(StratifyStep {
            tree,
            delta: 0.0,
            chosen_level: None,
            level_sparsities,
            validation,
        });
    }

    let mut tree = tree;
    let mut delta = 0.0;
    for &u in &levels[chosen] {
        let trial = &by_node[&u];
        if trial.delta > 0.0 {
            for group in &trial.groups {
                tree.insert_group(u, &group.members, group.volume, group.cut);
            }
            delta += trial.delta;
        } else {
            // wrapper: one intermediate node adopting all current children
            let mut members = tree.node(u).children.clone();
            members.sort_unstable();
            let (volume, cut) = (tree.node(u).volume, tree.node(u).cut);
            tree.insert_group(u, &members, volume, cut);
        }
    }
    tree.refresh_depths();

    if let (Some(stats), Some(before)) = (validation.as_mut(), entropy_before) {
        tree.validate_caches(graph, 1e-9)?;
        let after = costs::structural_entropy(graph, &tree)?;
        stats.checks += 1;
        stats.max_deviation = stats.max_deviation.max((delta - (before - after)).abs());
        stats.min_round_delta = stats.min_round_delta.min(delta);
    }

    Ok(StratifyStep {
        tree,
        delta,
        chosen_level: Some(chosen),
        level_sparsities,
        validation,
    })
}

/// How an automatic run settled on its final height.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HeightChoice {
    /// Fixed-height run: the caller asked for this height.
    Requested,
    /// First inflection of the second differences at this round.
    Inflection(usize),
    /// Every level's sparsity hit zero at this height.
    SparsityExhausted(usize),
    /// No inflection within the round budget; fell back to the round with
    /// the largest second difference.
    MaxSecondDifference(usize),
}

/// A finished clustering run.
#[derive(Debug)]
pub struct ClusterOutcome {
    pub tree: ClusterTree,
    pub trace: StratificationTrace,
    pub height: usize,
    pub choice: HeightChoice,
    /// Set when the requested height exceeded `n - 1` and was clamped.
    pub height_clamped: bool,
    pub validation: Option<ValidationStats>,
}

fn max_height(graph: &Graph) -> usize {
    graph.vertex_count().saturating_sub(1).max(1)
}

/// Grow a cluster tree to the requested height by repeated sparsest-level
/// stratification, stopping early when no level can improve. A height above
/// `n - 1` is clamped.
pub fn cluster_to_height(
    graph: &Graph,
    height: usize,
    opts: &HcseOptions,
) -> Result<ClusterOutcome> {
    if height < 1 {
        return Err(Error::domain("height must be at least 1"));
    }
    let target = height.min(max_height(graph));
    let mut tree = ClusterTree::trivial(graph)?;
    let mut trace = StratificationTrace::default();
    let mut validation = opts.validate.then(ValidationStats::default);

    while tree.height() < target {
        let round = trace.rounds.len() + 1;
        let step = stratify_once(tree, graph, opts)?;
        tree = step.tree;
        if let (Some(total), Some(stats)) = (validation.as_mut(), step.validation.as_ref()) {
            total.absorb(stats);
        }
        match step.chosen_level {
            None => break,
            Some(level) => trace.rounds.push(TraceRound {
                round,
                delta: step.delta,
                chosen_level: level,
                level_sparsities: step.level_sparsities,
            }),
        }
    }

    let reached = tree.height();
    Ok(ClusterOutcome {
        tree,
        trace,
        height: reached,
        choice: HeightChoice::Requested,
        height_clamped: target < height,
        validation,
    })
}

/// Find the least round `t` whose second difference is a local maximum:
/// `D(t) >= D(t-1)` and `D(t) >= D(t+1)` where `D(t) = delta_t - delta_{t-1}`.
/// `D(1)` is undefined; by default it is treated as `+inf`, which makes the
/// earliest admissible choice `t = 3`. With `allow_height_two` it is treated
/// as equal to `D(2)`, so `t = 2` becomes selectable. Checking round `t`
/// needs `delta_{t+1}`, so the scan covers `t < deltas.len()`.
pub fn first_inflection(deltas: &[f64], allow_height_two: bool) -> Option<usize> {
    let d = |t: usize| deltas[t - 1] - deltas[t - 2]; // defined for 2 <= t <= len
    let t_min = if allow_height_two { 2 } else { 3 };
    for t in t_min..deltas.len() {
        // at t == 2 (only reachable under the height-two policy) the missing
        // left neighbor counts as equal, so the left check always holds
        let left = if t == 2 { d(2) } else { d(t - 1) };
        if d(t) >= left && d(t) >= d(t + 1) {
            return Some(t);
        }
    }
    None
}

/// Round with the largest second difference (ties toward the smallest id),
/// the fallback when the round budget runs out without an inflection.
fn max_second_difference(deltas: &[f64]) -> Option<usize> {
    let mut best: Option<(f64, usize)> = None;
    for t in 2..=deltas.len() {
        let d = deltas[t - 1] - deltas[t - 2];
        if best.is_none_or(|(bd, _)| d > bd) {
            best = Some((d, t));
        }
    }
    best.map(|(_, t)| t)
}

/// Cluster with automatic height selection: stratify round by round,
/// recording the entropy reduction `delta_t`, and return the tree of height
/// `t` for the first inflection `t` of the second differences. When the
/// sparsity hits zero before an inflection shows, the reached height is
/// kept; when the round budget is exhausted, the round with the largest
/// second difference is chosen and flagged via [`HeightChoice`].
pub fn cluster_auto(graph: &Graph, opts: &HcseOptions) -> Result<ClusterOutcome> {
    if opts.max_rounds < 3 {
        return Err(Error::domain(
            "automatic height selection needs max_rounds >= 3",
        ));
    }
    let mut current = ClusterTree::trivial(graph)?;
    let mut snapshots: Vec<ClusterTree> = vec![current.clone()]; // index h-1: height h
    let mut deltas: Vec<f64> = Vec::new();
    let mut trace = StratificationTrace::default();
    let mut validation = opts.validate.then(ValidationStats::default);
    let round_cap = opts.max_rounds.min(max_height(graph));

    let mut exhausted = false;
    while deltas.len() < round_cap {
        let round = deltas.len() + 1;
        let step = stratify_once(current, graph, opts)?;
        current = step.tree;
        if let (Some(total), Some(stats)) = (validation.as_mut(), step.validation.as_ref()) {
            total.absorb(stats);
        }
        match step.chosen_level {
            None => {
                exhausted = true;
                break;
            }
            Some(level) => {
                trace.rounds.push(TraceRound {
                    round,
                    delta: step.delta,
                    chosen_level: level,
                    level_sparsities: step.level_sparsities,
                });
                deltas.push(step.delta);
                snapshots.push(current.clone());
            }
        }
        if let Some(t) = first_inflection(&deltas, opts.allow_height_two) {
            return Ok(ClusterOutcome {
                tree: snapshots.swap_remove(t - 1),
                trace,
                height: t,
                choice: HeightChoice::Inflection(t),
                height_clamped: false,
                validation,
            });
        }
    }

    if exhausted {
        let height = current.height();
        return Ok(ClusterOutcome {
            tree: current,
            trace,
            height,
            choice: HeightChoice::SparsityExhausted(height),
            height_clamped: false,
            validation,
        });
    }

    // budget ran out before an inflection could be confirmed
    let t = max_second_difference(&deltas).unwrap_or(snapshots.len());
    let t = t.min(snapshots.len());
    Ok(ClusterOutcome {
        tree: snapshots.swap_remove(t - 1),
        trace,
        height: t,
        choice: HeightChoice::MaxSecondDifference(t),
        height_clamped: false,
        validation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::TreeShape;

    fn clique(n: usize) -> Graph {
        let mut edges = Vec::new();
        for u in 0..n {
            for v in (u + 1)..n {
                edges.push((u, v, 1.0));
            }
        }
        Graph::new(n, edges).unwrap()
    }

    /// Two unit triangles joined by a single bridge edge (2-3).
    fn two_triangles() -> Graph {
        Graph::new(
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
        .unwrap()
    }

    const TOL: f64 = 1e-12;

    #[test]
    fn local_entropy_examples() {
        let g = clique(4);
        let trivial = ClusterTree::trivial(&g).unwrap();
        let h = local_entropy(&trivial, &g, trivial.root(), CutConvention::ChildCut).unwrap();
        assert!((h - 2.0).abs() < TOL);

        let shape = TreeShape::Internal(vec![
            TreeShape::Internal(vec![TreeShape::Leaf(0), TreeShape::Leaf(1)]),
            TreeShape::Internal(vec![TreeShape::Leaf(2), TreeShape::Leaf(3)]),
        ]);
        let balanced = ClusterTree::from_shape(&g, &shape).unwrap();
        let h = local_entropy(&balanced, &g, balanced.root(), CutConvention::ChildCut).unwrap();
        assert!((h - 2.0 / 3.0).abs() < TOL);

        let leaf = trivial.leaf_of_vertex(0).unwrap();
        assert!(local_entropy(&trivial, &g, leaf, CutConvention::ChildCut).is_err());
    }

    #[test]
    fn local_entropy_single_child_is_zero() {
        let g = clique(3);
        let mut t = ClusterTree::trivial(&g).unwrap();
        let leaf = t.leaf_of_vertex(0).unwrap();
        let (vol, cut) = (t.node(leaf).volume, t.node(leaf).cut);
        let wrapper = t.insert_group(t.root(), &[leaf], vol, cut);
        t.refresh_depths();
        let h = local_entropy(&t, &g, wrapper, CutConvention::ChildCut).unwrap();
        assert_eq!(h, 0.0);
    }

    #[test]
    fn apex_cut_makes_root_entropy_zero() {
        let g = clique(4);
        let t = ClusterTree::trivial(&g).unwrap();
        let h = local_entropy(&t, &g, t.root(), CutConvention::ApexCut).unwrap();
        assert_eq!(h, 0.0);
    }

    #[test]
    fn merge_gain_k4() {
        let g = clique(4);
        let t = ClusterTree::trivial(&g).unwrap();
        let tri = triangle(&t, &g, t.root()).unwrap();
        let a = t.leaf_of_vertex(0).unwrap();
        let b = t.leaf_of_vertex(1).unwrap();
        let gain = merge_gain(&tri, &g, a, b).unwrap();
        assert!((gain - 1.0 / 6.0).abs() < TOL);
        let sym = merge_gain(&tri, &g, b, a).unwrap();
        assert_eq!(gain, sym);
        assert!(merge_gain(&tri, &g, a, a).is_err());
    }

    #[test]
    fn merge_gain_disconnected_components_is_zero() {
        // two disjoint unit edges
        let g = Graph::new(4, vec![(0, 1, 1.0), (2, 3, 1.0)]).unwrap();
        let t = ClusterTree::trivial(&g).unwrap();
        let tri = triangle(&t, &g, t.root()).unwrap();
        let a = t.leaf_of_vertex(0).unwrap();
        let c = t.leaf_of_vertex(2).unwrap();
        assert_eq!(merge_gain(&tri, &g, a, c).unwrap(), 0.0);
    }

    #[test]
    fn stretch_k4_builds_three_merge_nodes() {
        let g = clique(4);
        let t = ClusterTree::trivial(&g).unwrap();
        let tri = triangle(&t, &g, t.root()).unwrap();
        let local = stretch(&tri, &g);
        assert_eq!(local.node_count(), 4 + 3);
        // first merge takes the smallest tied pair, locals 0 and 1
        assert_eq!(local.children(4), &[0, 1]);
        assert_eq!(local.children(5), &[2, 3]);
        assert_eq!(local.children(6), &[4, 5]);
        assert!((local.entropy_gain - 1.0 / 3.0).abs() < TOL);
        assert_eq!(local.height(), 3);
    }

    #[test]
    fn stretch_prefers_intra_block_merges() {
        let g = two_triangles();
        let t = ClusterTree::trivial(&g).unwrap();
        let tri = triangle(&t, &g, t.root()).unwrap();
        let local = stretch(&tri, &g);
        // the first merge node groups two vertices of the same triangle
        let first = local.children(6);
        assert_eq!(first, &[0, 1]);
    }

    #[test]
    fn compress_penalty_examples() {
        let g = clique(4);
        let t = ClusterTree::trivial(&g).unwrap();
        let tri = triangle(&t, &g, t.root()).unwrap();
        let local = stretch(&tri, &g);
        // node 6 spans everything: volume ratio 1, penalty 0
        assert_eq!(compress_penalty(&local, 6).unwrap(), 0.0);
        // node 4 = {0,1}: children cuts 3+3, own cut 4, parent volume 12
        let expected = (6.0 - 4.0) / 12.0 * (12.0_f64 / 6.0).log2();
        assert!((compress_penalty(&local, 4).unwrap() - expected).abs() < TOL);
        assert!(compress_penalty(&local, 0).is_err());
    }

    #[test]
    fn compress_flattens_to_height_two() {
        let g = clique(5);
        let t = ClusterTree::trivial(&g).unwrap();
        let tri = triangle(&t, &g, t.root()).unwrap();
        let mut local = stretch(&tri, &g);
        compress(&mut local);
        assert_eq!(local.height(), 2);
        // K5 flattens to a balanced-as-possible 3 + 2 split
        let roots = local.roots();
        let mut blocks: Vec<Vec<usize>> = roots
            .iter()
            .map(|&r| {
                let mut c = local.children(r).to_vec();
                c.sort_unstable();
                c
            })
            .collect();
        blocks.sort();
        assert_eq!(blocks, vec![vec![0, 1, 4], vec![2, 3]]);
        // total gain matches the direct entropy difference of the two trees
        let shape = TreeShape::Internal(vec![
            TreeShape::Internal(vec![
                TreeShape::Leaf(0),
                TreeShape::Leaf(1),
                TreeShape::Leaf(4),
            ]),
            TreeShape::Internal(vec![TreeShape::Leaf(2), TreeShape::Leaf(3)]),
        ]);
        let split = ClusterTree::from_shape(&g, &shape).unwrap();
        let direct = costs::structural_entropy(&g, &t).unwrap()
            - costs::structural_entropy(&g, &split).unwrap();
        assert!((local.entropy_gain - direct).abs() < 1e-12);
    }

    #[test]
    fn compress_already_flat_is_identity() {
        let g = clique(2);
        let t = ClusterTree::trivial(&g).unwrap();
        let tri = triangle(&t, &g, t.root()).unwrap();
        let mut local = stretch(&tri, &g);
        let before = local.roots();
        compress(&mut local);
        assert_eq!(local.roots(), before);
        assert_eq!(local.height(), 2);
    }

    #[test]
    fn trial_k4_reduces_one_third() {
        let g = clique(4);
        let t = ClusterTree::trivial(&g).unwrap();
        let trial = trial_stratify(&t, &g, t.root()).unwrap();
        assert!((trial.delta - 1.0 / 3.0).abs() < TOL);
        assert_eq!(trial.groups.len(), 2);
    }

    #[test]
    fn trial_single_child_wraps() {
        let g = clique(3);
        let mut t = ClusterTree::trivial(&g).unwrap();
        let leaf = t.leaf_of_vertex(0).unwrap();
        let (vol, cut) = (t.node(leaf).volume, t.node(leaf).cut);
        let wrapper = t.insert_group(t.root(), &[leaf], vol, cut);
        t.refresh_depths();
        let trial = trial_stratify(&t, &g, wrapper).unwrap();
        assert_eq!(trial.delta, 0.0);
        assert_eq!(trial.groups.len(), 1);
    }

    #[test]
    fn trial_two_triangles_recovers_blocks() {
        let g = two_triangles();
        let t = ClusterTree::trivial(&g).unwrap();
        let trial = trial_stratify(&t, &g, t.root()).unwrap();
        let blocks: Vec<Vec<usize>> = trial
            .groups
            .iter()
            .map(|grp| {
                grp.members
                    .iter()
                    .map(|&m| t.node(m).vertex.unwrap())
                    .collect()
            })
            .collect();
        assert_eq!(blocks, vec![vec![0, 1, 2], vec![3, 4, 5]]);
        assert!((trial.delta - 6.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn trial_validation_matches_brute_force() {
        let g = two_triangles();
        let t = ClusterTree::trivial(&g).unwrap();
        let (_, stats) = trial_observed(&t, &g, t.root(), true).unwrap();
        let stats = stats.unwrap();
        assert!(stats.checks >= 5);
        assert!(stats.max_deviation < 1e-12, "deviation {}", stats.max_deviation);
        assert!(stats.min_merge_gain >= 0.0);
        assert!(stats.min_contract_penalty >= 0.0);
    }

    #[test]
    fn level_sparsity_k4_trivial() {
        let g = clique(4);
        let t = ClusterTree::trivial(&g).unwrap();
        let s = level_sparsity(&t, &g, 0, CutConvention::ChildCut).unwrap();
        assert!((s.average - 1.0 / 6.0).abs() < TOL);
        assert!(level_sparsity(&t, &g, 3, CutConvention::ChildCut).is_err());
    }

    #[test]
    fn stratify_once_k4() {
        let g = clique(4);
        let t = ClusterTree::trivial(&g).unwrap();
        let step = stratify_once(t, &g, &HcseOptions::default()).unwrap();
        assert_eq!(step.chosen_level, Some(0));
        assert!((step.delta - 1.0 / 3.0).abs() < TOL);
        assert_eq!(step.tree.height(), 2);
        let h = costs::structural_entropy(&g, &step.tree).unwrap();
        assert!((h - 5.0 / 3.0).abs() < TOL);
        step.tree.levels().unwrap();
    }

    #[test]
    fn stratify_once_no_gain_is_identity() {
        // a single edge cannot be split further
        let g = clique(2);
        let t = ClusterTree::trivial(&g).unwrap();
        let step = stratify_once(t, &g, &HcseOptions::default()).unwrap();
        assert_eq!(step.chosen_level, None);
        assert_eq!(step.delta, 0.0);
        assert_eq!(step.tree.height(), 1);
    }

    #[test]
    fn cluster_to_height_k1_and_k2() {
        let g = clique(4);
        let out = cluster_to_height(&g, 1, &HcseOptions::default()).unwrap();
        assert_eq!(out.height, 1);
        assert!(out.trace.rounds.is_empty());

        let out = cluster_to_height(&g, 2, &HcseOptions::default()).unwrap();
        assert_eq!(out.height, 2);
        let h = costs::structural_entropy(&g, &out.tree).unwrap();
        assert!((h - 5.0 / 3.0).abs() < TOL);
    }

    #[test]
    fn cluster_two_triangles_finds_blocks() {
        let g = two_triangles();
        let out = cluster_to_height(&g, 2, &HcseOptions::default()).unwrap();
        let levels = out.tree.levels().unwrap();
        let blocks: Vec<Vec<usize>> = levels[1]
            .iter()
            .map(|&id| out.tree.leaves_under(id))
            .collect();
        assert_eq!(blocks, vec![vec![0, 1, 2], vec![3, 4, 5]]);
    }

    #[test]
    fn two_triangle_blocks_are_the_exact_two_level_optimum() {
        // enumerate every partition of the six vertices, build the two-level
        // tree it induces and take the entropy minimizer: the planted blocks
        let g = two_triangles();
        let mut best: Option<(f64, Vec<Vec<usize>>)> = None;
        let mut assignment = vec![0usize; 6];
        fn visit(
            g: &Graph,
            assignment: &mut Vec<usize>,
            pos: usize,
            used: usize,
            best: &mut Option<(f64, Vec<Vec<usize>>)>,
        ) {
            if pos == assignment.len() {
                let mut blocks = vec![Vec::new(); used];
                for (v, &b) in assignment.iter().enumerate() {
                    blocks[b].push(v);
                }
                let shape = TreeShape::Internal(
                    blocks
                        .iter()
                        .map(|block| {
                            if block.len() == 1 {
                                TreeShape::Leaf(block[0])
                            } else {
                                TreeShape::Internal(
                                    block.iter().map(|&v| TreeShape::Leaf(v)).collect(),
                                )
                            }
                        })
                        .collect(),
                );
                let tree = ClusterTree::from_shape(g, &shape).unwrap();
                let h = costs::structural_entropy(g, &tree).unwrap();
                if best.as_ref().is_none_or(|(bh, _)| h < *bh) {
                    *best = Some((h, blocks));
                }
                return;
            }
            for b in 0..=used.min(assignment.len() - 1) {
                assignment[pos] = b;
                visit(g, assignment, pos + 1, used.max(b + 1), best);
            }
        }
        visit(&g, &mut assignment, 0, 0, &mut best);
        let (_, blocks) = best.unwrap();
        assert_eq!(blocks, vec![vec![0, 1, 2], vec![3, 4, 5]]);

        // and the pipeline lands exactly on it
        let out = cluster_to_height(&g, 2, &HcseOptions::default()).unwrap();
        let levels = out.tree.levels().unwrap();
        let mine: Vec<Vec<usize>> = levels[1]
            .iter()
            .map(|&id| out.tree.leaves_under(id))
            .collect();
        assert_eq!(mine, blocks);
    }

    #[test]
    fn auto_falls_back_to_max_second_difference_on_tiny_budget() {
        // a 12-clique keeps stratifying; with only three rounds allowed the
        // inflection can never be confirmed, so the fallback fires
        let g = clique(12);
        let opts = HcseOptions {
            max_rounds: 3,
            ..HcseOptions::default()
        };
        let out = cluster_auto(&g, &opts).unwrap();
        match out.choice {
            HeightChoice::MaxSecondDifference(t) => {
                assert_eq!(out.height, t);
                assert!(t >= 2);
            }
            other => panic!("expected the fallback, got {other:?}"),
        }
    }

    #[test]
    fn height_clamped_for_large_k() {
        let g = clique(3);
        let out = cluster_to_height(&g, 50, &HcseOptions::default()).unwrap();
        assert!(out.height_clamped);
        assert!(out.height <= 2);
    }

    #[test]
    fn inflection_rule_on_spec_sequence() {
        // D2 = -0.4, D3 = -0.05, D4 = -0.35: round 3 is the first local max
        let deltas = [0.9, 0.5, 0.45, 0.1];
        assert_eq!(first_inflection(&deltas, false), Some(3));
        // with only three deltas round 3 cannot be checked yet
        assert_eq!(first_inflection(&deltas[..3], false), None);
        // the height-two policy may fire earlier when D2 >= D3
        let early = [1.0, 0.9, 0.3, 0.25];
        assert_eq!(first_inflection(&early, true), Some(2));
        assert_eq!(first_inflection(&early, false), None);
    }

    #[test]
    fn auto_stops_when_sparsity_exhausts() {
        let g = clique(4);
        let out = cluster_auto(&g, &HcseOptions::default()).unwrap();
        match out.choice {
            HeightChoice::SparsityExhausted(t) => assert_eq!(t, out.height),
            other => panic!("expected exhaustion, got {other:?}"),
        }
        out.tree.validate_caches(&g, 1e-9).unwrap();
    }

    #[test]
    fn auto_rejects_tiny_round_budget() {
        let g = clique(4);
        let opts = HcseOptions {
            max_rounds: 2,
            ..HcseOptions::default()
        };
        assert!(cluster_auto(&g, &opts).is_err());
    }

    #[test]
    fn deltas_nonincreasing_entropy() {
        let g = two_triangles();
        let opts = HcseOptions {
            validate: true,
            ..HcseOptions::default()
        };
        let out = cluster_auto(&g, &opts).unwrap();
        for round in &out.trace.rounds {
            assert!(round.delta >= 0.0);
        }
        let v = out.validation.unwrap();
        assert!(v.max_deviation < 1e-9, "deviation {}", v.max_deviation);
    }

    #[test]
    fn trace_csv_shape() {
        let trace = StratificationTrace {
            rounds: vec![
                TraceRound {
                    round: 1,
                    delta: 0.5,
                    chosen_level: 0,
                    level_sparsities: vec![0.25],
                },
                TraceRound {
                    round: 2,
                    delta: 0.25,
                    chosen_level: 1,
                    level_sparsities: vec![0.1, 0.2],
                },
            ],
        };
        let csv = trace.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,delta_h,second_difference,chosen_level");
        assert_eq!(lines[1], "1,0.5,,0");
        assert_eq!(lines[2], "2,0.25,-0.25,1");
        assert_eq!(trace.second_differences(), vec![-0.25]);
        assert!(trace.sparsity_csv().lines().count() == 4);
    }
}
