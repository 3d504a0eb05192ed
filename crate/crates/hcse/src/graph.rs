//! Weighted undirected graphs and cluster contraction.

use std::collections::HashMap;
use std::io::BufRead;

use crate::error::{Error, Result};

/// A weighted edge between two distinct vertices, stored with `u < v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub w: f64,
}

/// An immutable weighted undirected graph.
///
/// Vertices are dense indices `0..n`. Self-loops are rejected and duplicate
/// edges are merged by summing their weights. Per-vertex weighted degrees and
/// the total volume (sum of all degrees, i.e. twice the total edge weight)
/// are cached at construction.
#[derive(Debug, Clone)]
pub struct Graph {
    n: usize,
    edges: Vec<Edge>,
    degree: Vec<f64>,
    total_volume: f64,
}

impl Graph {
    /// Build a graph from an edge list. Duplicate pairs are merged by weight
    /// summation; zero and negative weights, non-finite weights, self-loops
    /// and out-of-range endpoints are rejected.
    pub fn new(n: usize, raw: impl IntoIterator<Item = (usize, usize, f64)>) -> Result<Self> {
        let mut edges: Vec<Edge> = Vec::new();
        for (a, b, w) in raw {
            if a == b {
                return Err(Error::domain(format!("self-loop on vertex {a}")));
            }
            if a >= n || b >= n {
                return Err(Error::domain(format!(
                    "edge ({a},{b}) out of range for {n} vertices"
                )));
            }
            if w <= 0.0 || !w.is_finite() {
                return Err(Error::domain(format!(
                    "edge ({a},{b}) has non-positive weight {w}"
                )));
            }
            let (u, v) = if a < b { (a, b) } else { (b, a) };
            edges.push(Edge { u, v, w });
        }
        edges.sort_by_key(|e| (e.u, e.v));
        edges.dedup_by(|next, kept| {
            if next.u == kept.u && next.v == kept.v {
                kept.w += next.w;
                true
            } else {
                false
            }
        });

        let mut degree = vec![0.0; n];
        for e in &edges {
            degree[e.u] += e.w;
            degree[e.v] += e.w;
        }
        let total_volume = degree.iter().sum();
        Ok(Graph {
            n,
            edges,
            degree,
            total_volume,
        })
    }

    /// Parse the whitespace-separated edge-list text format.
    ///
    /// Each non-blank line that does not start with `#` is either `u v` or
    /// `u v w` with `w > 0`. Vertex tokens are arbitrary strings, mapped to
    /// dense indices in order of first appearance; the label table is
    /// returned alongside the graph.
    pub fn from_edge_list(reader: impl BufRead) -> Result<(Self, Vec<String>)> {
        let mut labels: Vec<String> = Vec::new();
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut raw: Vec<(usize, usize, f64)> = Vec::new();

        let mut intern = |tok: &str, labels: &mut Vec<String>| -> usize {
            if let Some(&i) = index.get(tok) {
                return i;
            }
            let i = labels.len();
            labels.push(tok.to_string());
            index.insert(tok.to_string(), i);
            i
        };

        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = lineno + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let mut toks = trimmed.split_whitespace();
            let a = toks.next().unwrap();
            let b = toks
                .next()
                .ok_or_else(|| Error::parse(lineno, "expected at least two tokens"))?;
            let w = match toks.next() {
                Some(t) => t
                    .parse::<f64>()
                    .map_err(|_| Error::parse(lineno, format!("bad weight {t:?}")))?,
                None => 1.0,
            };
            if toks.next().is_some() {
                return Err(Error::parse(lineno, "too many tokens"));
            }
            if w <= 0.0 || !w.is_finite() {
                return Err(Error::domain(format!(
                    "line {lineno}: weight must be positive, got {w}"
                )));
            }
            let u = intern(a, &mut labels);
            let v = intern(b, &mut labels);
            if u == v {
                return Err(Error::domain(format!("line {lineno}: self-loop on {a:?}")));
            }
            raw.push((u, v, w));
        }

        let graph = Graph::new(labels.len(), raw)?;
        Ok((graph, labels))
    }

    /// Render the graph in the edge-list text format, one `u v w` line per
    /// edge in sorted order. Deterministic for a given graph and label table.
    pub fn to_edge_list_string(&self, labels: &[String]) -> String {
        let mut out = String::new();
        for e in &self.edges {
            out.push_str(&format!("{} {} {}\n", labels[e.u], labels[e.v], e.w));
        }
        out
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Weighted degree of a vertex.
    pub fn degree(&self, u: usize) -> f64 {
        self.degree[u]
    }

    /// Sum of all degrees; equals twice the total edge weight.
    pub fn total_volume(&self) -> f64 {
        self.total_volume
    }

    /// Volume of a vertex subset: the sum of the members' degrees.
    pub fn subset_volume(&self, subset: &[usize]) -> Result<f64> {
        let mut vol = 0.0;
        for &u in subset {
            if u >= self.n {
                return Err(Error::domain(format!("vertex {u} out of range")));
            }
            vol += self.degree[u];
        }
        Ok(vol)
    }

    /// Contract each cluster to a super-vertex, keeping the total weight of
    /// inter-cluster links and dropping internal edges. The clusters must be
    /// pairwise disjoint and non-empty but need not cover all vertices.
    pub fn quotient(&self, clusters: &[Vec<usize>]) -> Result<QuotientGraph> {
        let mut owner: Vec<Option<usize>> = vec![None; self.n];
        for (c, members) in clusters.iter().enumerate() {
            if members.is_empty() {
                return Err(Error::domain(format!("cluster {c} is empty")));
            }
            for &u in members {
                if u >= self.n {
                    return Err(Error::domain(format!("vertex {u} out of range")));
                }
                if owner[u].is_some() {
                    return Err(Error::domain(format!(
                        "vertex {u} appears in more than one cluster"
                    )));
                }
                owner[u] = Some(c);
            }
        }

        let k = clusters.len();
        let mut weights: std::collections::BTreeMap<(usize, usize), f64> =
            std::collections::BTreeMap::new();
        let mut internal = vec![0.0; k];
        for e in &self.edges {
            match (owner[e.u], owner[e.v]) {
                (Some(a), Some(b)) if a != b => {
                    let key = if a < b { (a, b) } else { (b, a) };
                    *weights.entry(key).or_insert(0.0) += e.w;
                }
                (Some(a), Some(_)) => internal[a] += e.w,
                _ => {}
            }
        }

        let mut cluster_volume = vec![0.0; k];
        for (c, members) in clusters.iter().enumerate() {
            cluster_volume[c] = self.subset_volume(members)?;
        }
        let cluster_cut = cluster_volume
            .iter()
            .zip(&internal)
            .map(|(vol, int)| vol - 2.0 * int)
            .collect();

        Ok(QuotientGraph {
            cluster_count: k,
            weights,
            cluster_volume,
            cluster_cut,
        })
    }
}

/// The contraction of a graph onto a family of disjoint clusters.
///
/// `weight(a, b)` is the total weight of original edges with one endpoint in
/// cluster `a` and the other in cluster `b`. `cluster_cut[a]` is the cut of
/// cluster `a` in the *original* graph, so it also counts links to vertices
/// outside the contracted family.
#[derive(Debug, Clone)]
pub struct QuotientGraph {
    pub cluster_count: usize,
    weights: std::collections::BTreeMap<(usize, usize), f64>,
    pub cluster_volume: Vec<f64>,
    pub cluster_cut: Vec<f64>,
}

impl QuotientGraph {
    /// Inter-cluster link weight; zero when no edge crosses the pair.
    pub fn weight(&self, a: usize, b: usize) -> f64 {
        let key = if a < b { (a, b) } else { (b, a) };
        self.weights.get(&key).copied().unwrap_or(0.0)
    }

    /// Iterate over the positive inter-cluster weights in sorted pair order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.weights.iter().map(|(&(a, b), &w)| (a, b, w))
    }
}
