//! Shared fixtures for the integration suites.

use hcse::{Graph, TreeShape};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn clique(n: usize) -> Graph {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            edges.push((u, v, 1.0));
        }
    }
    Graph::new(n, edges).unwrap()
}

/// Connected-ish random weighted graph: a random spanning tree plus extra
/// random edges, weights uniform in (0, max_weight].
pub fn random_graph(rng: &mut ChaCha8Rng, n: usize, extra_edges: usize, max_weight: f64) -> Graph {
    let mut edges = Vec::new();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    for i in 1..n {
        let j = rng.gen_range(0..i);
        let w = rng.gen_range(0.0..max_weight).max(1e-3);
        edges.push((order[i], order[j], w));
    }
    for _ in 0..extra_edges {
        let u = rng.gen_range(0..n);
        let v = rng.gen_range(0..n);
        if u != v {
            let w = rng.gen_range(0.0..max_weight).max(1e-3);
            edges.push((u, v, w));
        }
    }
    Graph::new(n, edges).unwrap()
}

/// Uniformly messy random topology over the given leaves: random fan-outs,
/// random block sizes, occasional unary-free multifurcation.
pub fn random_shape(rng: &mut ChaCha8Rng, leaves: &[usize]) -> TreeShape {
    if leaves.len() == 1 {
        return TreeShape::Leaf(leaves[0]);
    }
    let mut shuffled = leaves.to_vec();
    shuffled.shuffle(rng);
    let blocks = rng.gen_range(2..=shuffled.len().min(4));
    let mut cuts: Vec<usize> = (1..shuffled.len()).collect();
    cuts.shuffle(rng);
    let mut cuts: Vec<usize> = cuts.into_iter().take(blocks - 1).collect();
    cuts.sort_unstable();
    let mut children = Vec::new();
    let mut start = 0;
    for cut in cuts.into_iter().chain(std::iter::once(shuffled.len())) {
        children.push(random_shape(rng, &shuffled[start..cut]));
        start = cut;
    }
    TreeShape::Internal(children)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
