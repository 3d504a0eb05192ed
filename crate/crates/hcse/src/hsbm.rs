//! Hierarchical stochastic block model benchmark generator.
//!
//! The generator plants a multi-level cluster hierarchy over `n` vertices
//! and draws each vertex pair as an independent unit-weight edge with a
//! probability that depends on the depth of the pair's lowest common planted
//! cluster: the deeper the shared cluster, the higher the probability.
//!
//! Determinism: the same spec reproduces the same graph bit for bit. The RNG
//! is ChaCha8 seeded with the spec's 64-bit seed; stream 0 draws the cluster
//! size compositions (top level first, then the bottom vertex counts),
//! stream 1 draws edges over vertex pairs `(u, v)` with `u < v` in
//! lexicographic order, one uniform draw per pair regardless of outcome.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::metrics::FlatPartition;
use crate::tree::{ClusterTree, TreeShape};

fn default_min_cluster_size() -> usize {
    2
}

/// Generative parameters for one benchmark instance.
///
/// `level_cluster_counts` lists the total number of clusters per level from
/// shallow to deep, e.g. `[5, 25, 250]`. `p[d]` is the edge probability for
/// vertex pairs whose lowest common planted cluster sits at depth `d`
/// (`p[0]` for pairs split at the root), so `p` has one more entry than
/// `level_cluster_counts` and must increase strictly with depth. Cluster
/// sizes are drawn uniformly over compositions with the given minimum.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HsbmSpec {
    pub n: usize,
    pub level_cluster_counts: Vec<usize>,
    pub p: Vec<f64>,
    pub seed: u64,
    #[serde(default = "default_min_cluster_size")]
    pub min_cluster_size: usize,
}

impl HsbmSpec {
    pub fn validate(&self) -> Result<()> {
        if self.level_cluster_counts.is_empty() {
            return Err(Error::domain("need at least one cluster level"));
        }
        if self.p.len() != self.level_cluster_counts.len() + 1 {
            return Err(Error::domain(format!(
                "p must have {} entries (one per LCA depth), got {}",
                self.level_cluster_counts.len() + 1,
                self.p.len()
            )));
        }
        if self
            .p
            .iter()
            .any(|&p| !p.is_finite() || !(0.0..=1.0).contains(&p))
        {
            return Err(Error::domain("every entry of p must lie in [0, 1]"));
        }
        for w in self.p.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::domain(
                    "p must increase strictly with depth: deeper shared clusters mean \
                     higher edge probability",
                ));
            }
        }
        let mut previous = 1usize;
        for &count in &self.level_cluster_counts {
            if count < previous {
                return Err(Error::domain(
                    "level_cluster_counts must not decrease: every parent needs at \
                     least one child",
                ));
            }
            previous = count;
        }
        if self.min_cluster_size < 1 {
            return Err(Error::domain("min_cluster_size must be at least 1"));
        }
        let deepest = *self.level_cluster_counts.last().unwrap();
        if self.n < deepest * self.min_cluster_size {
            return Err(Error::domain(format!(
                "n = {} cannot host {} bottom clusters of at least {} vertices",
                self.n, deepest, self.min_cluster_size
            )));
        }
        Ok(())
    }
}

/// The planted hierarchy: the full cluster tree over the generated graph and
/// the flat partition read off at every cluster level. Index `j` holds the
/// clusters at tree depth `j + 1`; the leaf level is not included.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub tree: ClusterTree,
    pub level_partitions: Vec<FlatPartition>,
}

impl GroundTruth {
    /// The planted clusters at the given level, shallow to deep.
    pub fn planted_partition(&self, level: usize) -> Result<&FlatPartition> {
        self.level_partitions
            .get(level)
            .ok_or_else(|| Error::domain(format!("level {level} out of range")))
    }

    pub fn level_count(&self) -> usize {
        self.level_partitions.len()
    }
}

/// Split `total` into `parts` summands, each at least `min`, uniformly over
/// all such compositions: distribute the slack by placing `parts - 1` bars
/// among `slack + parts - 1` positions and reading off the gaps.
fn uniform_composition(rng: &mut ChaCha8Rng, total: usize, parts: usize, min: usize) -> Vec<usize> {
    debug_assert!(total >= parts * min);
    if parts == 1 {
        return vec![total];
    }
    let slack = total - parts * min;
    let positions = slack + parts - 1;
    let mut bars = rand::seq::index::sample(rng, positions, parts - 1).into_vec();
    bars.sort_unstable();
    let mut sizes = Vec::with_capacity(parts);
    let mut previous: i64 = -1;
    for &bar in &bars {
        sizes.push(min + (bar as i64 - previous - 1) as usize);
        previous = bar as i64;
    }
    sizes.push(min + (positions as i64 - previous - 1) as usize);
    debug_assert_eq!(sizes.iter().sum::<usize>(), total);
    sizes
}

/// Generate a graph with planted hierarchical structure. Pure function of
/// the spec: the same seed gives an identical graph and ground truth.
pub fn generate(spec: &HsbmSpec) -> Result<(Graph, GroundTruth)> {
    spec.validate()?;
    let levels = spec.level_cluster_counts.len();

    // stream 0: structural randomness
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(0);

    // children per parent, level by level: counts[l] clusters distributed
    // over the previous level's clusters with at least one child each
    let mut child_counts: Vec<Vec<usize>> = Vec::with_capacity(levels);
    let mut previous = 1usize;
    for &count in &spec.level_cluster_counts {
        child_counts.push(uniform_composition(&mut rng, count, previous, 1));
        previous = count;
    }
    let deepest = *spec.level_cluster_counts.last().unwrap();
    let bottom_sizes = uniform_composition(&mut rng, spec.n, deepest, spec.min_cluster_size);

    // parent ids per level, in planting order
    let mut parent_of: Vec<Vec<usize>> = Vec::with_capacity(levels);
    for counts in &child_counts {
        let mut ids = Vec::new();
        for (parent, &children) in counts.iter().enumerate() {
            ids.extend(std::iter::repeat_n(parent, children));
        }
        parent_of.push(ids);
    }
    // chain[b][l] = id of the level-l ancestor of bottom cluster b
    let mut chain = vec![vec![0usize; levels]; deepest];
    for (b, row) in chain.iter_mut().enumerate() {
        row[levels - 1] = b;
        for l in (0..levels - 1).rev() {
            row[l] = parent_of[l + 1][row[l + 1]];
        }
    }

    // vertex -> bottom cluster, contiguous blocks in planting order
    let mut bottom_of = vec![0usize; spec.n];
    let mut cursor = 0usize;
    for (b, &size) in bottom_sizes.iter().enumerate() {
        bottom_of[cursor..cursor + size].fill(b);
        cursor += size;
    }

    // stream 1: one edge draw per vertex pair in lexicographic order
    let mut rng_edges = ChaCha8Rng::seed_from_u64(spec.seed);
    rng_edges.set_stream(1);
    let mut edges = Vec::new();
    for u in 0..spec.n {
        for v in (u + 1)..spec.n {
            let depth = lca_depth(&chain, bottom_of[u], bottom_of[v], levels);
            let draw: f64 = rng_edges.gen();
            if draw < spec.p[depth] {
                edges.push((u, v, 1.0));
            }
        }
    }
    let graph = Graph::new(spec.n, edges)?;

    // planted tree: nest bottom-cluster leaf blocks up the ancestor chains
    let mut shapes: Vec<TreeShape> = {
        let mut out = Vec::with_capacity(deepest);
        let mut cursor = 0usize;
        for &size in &bottom_sizes {
            out.push(TreeShape::Internal(
                (cursor..cursor + size).map(TreeShape::Leaf).collect(),
            ));
            cursor += size;
        }
        out
    };
    for level in (1..levels).rev() {
        let parents = spec.level_cluster_counts[level - 1];
        let mut grouped: Vec<Vec<TreeShape>> = vec![Vec::new(); parents];
        for (id, shape) in shapes.into_iter().enumerate() {
            grouped[parent_of[level][id]].push(shape);
        }
        shapes = grouped.into_iter().map(TreeShape::Internal).collect();
    }
    let tree = ClusterTree::from_shape(&graph, &TreeShape::Internal(shapes))?;

    let mut level_partitions = Vec::with_capacity(levels);
    for level in 0..levels {
        let blocks: Vec<Vec<usize>> = tree
            .nodes_at_depth(level + 1)
            .into_iter()
            .map(|id| tree.leaves_under(id))
            .collect();
        level_partitions.push(FlatPartition::from_blocks(spec.n, blocks)?);
    }

    Ok((
        graph,
        GroundTruth {
            tree,
            level_partitions,
        },
    ))
}

/// Depth of the lowest common planted cluster of two bottom clusters:
/// `levels` when they coincide, otherwise the deepest level where their
/// ancestors still agree (0 means they only share the root).
fn lca_depth(chain: &[Vec<usize>], a: usize, b: usize, levels: usize) -> usize {
    if a == b {
        return levels;
    }
    let mut depth = 0;
    for l in 0..levels {
        if chain[a][l] == chain[b][l] {
            depth = l + 1;
        } else {
            break;
        }
    }
    depth
}
