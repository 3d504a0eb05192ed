//! Rooted cluster trees over graph vertices.
//!
//! A cluster tree has one leaf per graph vertex; every internal node stands
//! for the cluster of its descendant leaves. Nodes cache the cluster volume,
//! the cut weight (total weight of edges leaving the cluster), the depth and
//! the leaf count. Caches are maintained incrementally by the stratification
//! algorithms and can always be rebuilt from the graph with
//! [`ClusterTree::recompute_caches`].

use serde::{Deserialize, Serialize};
use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::graph::Graph;

/// A node of a [`ClusterTree`]. The root is its own parent.
#[derive(Debug, Clone)]
pub struct TreeNode {
    pub parent: usize,
    pub children: Vec<usize>,
    /// Volume of the node's cluster: sum of member degrees.
    pub volume: f64,
    /// Total weight of edges with exactly one endpoint inside the cluster.
    pub cut: f64,
    pub depth: usize,
    pub leaf_count: usize,
    /// The graph vertex this leaf stands for; `None` for internal nodes.
    pub vertex: Option<usize>,
}

impl TreeNode {
    pub fn is_leaf(&self) -> bool {
        self.vertex.is_some()
    }
}

/// Pure tree topology over labeled leaves, used for construction,
/// serialization and exhaustive enumeration.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum TreeShape {
    Leaf(usize),
    Internal(Vec<TreeShape>),
}

impl TreeShape {
    pub fn leaf_count(&self) -> usize {
        match self {
            TreeShape::Leaf(_) => 1,
            TreeShape::Internal(children) => children.iter().map(TreeShape::leaf_count).sum(),
        }
    }

    /// Recursively sort children so that structurally equal trees compare
    /// equal regardless of child order.
    pub fn canonical(&self) -> TreeShape {
        match self {
            TreeShape::Leaf(v) => TreeShape::Leaf(*v),
            TreeShape::Internal(children) => {
                let mut sorted: Vec<TreeShape> =
                    children.iter().map(TreeShape::canonical).collect();
                sorted.sort();
                TreeShape::Internal(sorted)
            }
        }
    }
}

/// The JSON interchange form of a cluster tree. Internal nodes carry an
/// optional name and a list of children; leaves carry the vertex label.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TreeDoc {
    Leaf {
        leaf: String,
    },
    Internal {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
        children: Vec<TreeDoc>,
    },
}

/// A rooted cluster tree bound to a graph's vertex set.
#[derive(Debug, Clone)]
pub struct ClusterTree {
    nodes: Vec<TreeNode>,
    root: usize,
    leaf_of_vertex: Vec<usize>,
}

impl ClusterTree {
    /// The one-level tree: every vertex is a direct leaf child of the root.
    pub fn trivial(graph: &Graph) -> Result<Self> {
        if graph.vertex_count() == 0 {
            return Err(Error::domain("cannot build a cluster tree on an empty graph"));
        }
        let shape = TreeShape::Internal(
            (0..graph.vertex_count()).map(TreeShape::Leaf).collect(),
        );
        Self::from_shape(graph, &shape)
    }

    /// Materialize a topology against a graph, computing all caches.
    ///
    /// The shape's leaves must be exactly the vertices `0..n`, each once.
    pub fn from_shape(graph: &Graph, shape: &TreeShape) -> Result<Self> {
        let n = graph.vertex_count();
        if n == 0 {
            return Err(Error::domain("cannot build a cluster tree on an empty graph"));
        }
        let mut tree = ClusterTree {
            nodes: Vec::new(),
            root: 0,
            leaf_of_vertex: vec![usize::MAX; n],
        };
        let root = tree.build_from_shape(shape)?;
        tree.root = root;
        tree.nodes[root].parent = root;
        for (v, &leaf) in tree.leaf_of_vertex.iter().enumerate() {
            if leaf == usize::MAX {
                return Err(Error::domain(format!("vertex {v} missing from the tree")));
            }
        }
        tree.recompute_caches(graph)?;
        Ok(tree)
    }

    fn build_from_shape(&mut self, shape: &TreeShape) -> Result<usize> {
        let id = self.nodes.len();
        self.nodes.push(TreeNode {
            parent: usize::MAX,
            children: Vec::new(),
            volume: 0.0,
            cut: 0.0,
            depth: 0,
            leaf_count: 0,
            vertex: None,
        });
        match shape {
            TreeShape::Leaf(v) => {
                if *v >= self.leaf_of_vertex.len() {
                    return Err(Error::domain(format!("leaf vertex {v} out of range")));
                }
                if self.leaf_of_vertex[*v] != usize::MAX {
                    return Err(Error::domain(format!("vertex {v} appears twice")));
                }
                self.leaf_of_vertex[*v] = id;
                self.nodes[id].vertex = Some(*v);
            }
            TreeShape::Internal(children) => {
                if children.is_empty() {
                    return Err(Error::domain("internal node with no children"));
                }
                for child in children {
                    let c = self.build_from_shape(child)?;
                    self.nodes[c].parent = id;
                    self.nodes[id].children.push(c);
                }
            }
        }
        Ok(id)
    }

    /// Extract the pure topology with graph vertices as leaf labels.
    pub fn shape(&self) -> TreeShape {
        self.shape_of(self.root)
    }

    pub fn shape_of(&self, node: usize) -> TreeShape {
        let n = &self.nodes[node];
        match n.vertex {
            Some(v) => TreeShape::Leaf(v),
            None => TreeShape::Internal(n.children.iter().map(|&c| self.shape_of(c)).collect()),
        }
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn node(&self, id: usize) -> &TreeNode {
        &self.nodes[id]
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn leaf_count(&self) -> usize {
        self.leaf_of_vertex.len()
    }

    pub fn leaf_of_vertex(&self, v: usize) -> Result<usize> {
        self.leaf_of_vertex
            .get(v)
            .copied()
            .ok_or_else(|| Error::domain(format!("unknown vertex {v}")))
    }

    /// Maximum leaf depth.
    pub fn height(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| n.is_leaf())
            .map(|n| n.depth)
            .max()
            .unwrap_or(0)
    }

    pub fn internal_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(|&i| !self.nodes[i].is_leaf())
    }

    /// Internal node ids at the given depth, ascending.
    pub fn internal_nodes_at_depth(&self, depth: usize) -> Vec<usize> {
        self.internal_nodes()
            .filter(|&i| self.nodes[i].depth == depth)
            .collect()
    }

    /// All node ids (leaves included) at the given depth, ascending.
    pub fn nodes_at_depth(&self, depth: usize) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&i| self.nodes[i].depth == depth)
            .collect()
    }

    /// Graph vertices under a node, ascending.
    pub fn leaves_under(&self, node: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.nodes[node].leaf_count);
        let mut stack = vec![node];
        while let Some(id) = stack.pop() {
            match self.nodes[id].vertex {
                Some(v) => out.push(v),
                None => stack.extend(&self.nodes[id].children),
            }
        }
        out.sort_unstable();
        out
    }

    /// Deepest node containing both vertices.
    pub fn lca(&self, u: usize, v: usize) -> Result<usize> {
        if u == v {
            return Err(Error::domain("lca expects two distinct vertices"));
        }
        let mut a = self.leaf_of_vertex(u)?;
        let mut b = self.leaf_of_vertex(v)?;
        while self.nodes[a].depth > self.nodes[b].depth {
            a = self.nodes[a].parent;
        }
        while self.nodes[b].depth > self.nodes[a].depth {
            b = self.nodes[b].parent;
        }
        while a != b {
            a = self.nodes[a].parent;
            b = self.nodes[b].parent;
        }
        Ok(a)
    }

    /// Internal nodes grouped by depth: element `j` holds the nodes at
    /// distance `j` from the root. Requires every leaf at the same depth.
    pub fn levels(&self) -> Result<Vec<Vec<usize>>> {
        let height = self.height();
        for n in &self.nodes {
            if n.is_leaf() && n.depth != height {
                return Err(Error::domain(
                    "levels() requires uniform leaf depth; found a shallow leaf",
                ));
            }
        }
        let mut levels = vec![Vec::new(); height];
        for id in self.internal_nodes() {
            levels[self.nodes[id].depth].push(id);
        }
        Ok(levels)
    }

    /// Rebuild volume, cut, depth and leaf-count caches from the graph,
    /// verifying topology on the way. Volumes and cuts are recomputed from
    /// edge data, so this also repairs stale caches after external edits.
    pub fn recompute_caches(&mut self, graph: &Graph) -> Result<()> {
        let n_nodes = self.nodes.len();
        if self.leaf_of_vertex.len() != graph.vertex_count() {
            return Err(Error::domain(format!(
                "tree has {} leaves but graph has {} vertices",
                self.leaf_of_vertex.len(),
                graph.vertex_count()
            )));
        }

        // breadth-first from the root: validates reachability and acyclicity
        let mut order = Vec::with_capacity(n_nodes);
        let mut seen = vec![false; n_nodes];
        let mut queue = std::collections::VecDeque::new();
        queue.push_back(self.root);
        seen[self.root] = true;
        self.nodes[self.root].depth = 0;
        while let Some(id) = queue.pop_front() {
            order.push(id);
            let depth = self.nodes[id].depth;
            let children = self.nodes[id].children.clone();
            for c in children {
                if seen[c] {
                    return Err(Error::Integrity(format!("node {c} reached twice")));
                }
                if self.nodes[c].parent != id {
                    return Err(Error::Integrity(format!(
                        "node {c} has parent {} but is a child of {id}",
                        self.nodes[c].parent
                    )));
                }
                seen[c] = true;
                self.nodes[c].depth = depth + 1;
                queue.push_back(c);
            }
        }
        if order.len() != n_nodes {
            return Err(Error::Integrity("orphan nodes not reachable from root".into()));
        }

        // volumes and leaf counts bottom-up
        for &id in order.iter().rev() {
            let node = &self.nodes[id];
            match node.vertex {
                Some(v) => {
                    let d = graph.degree(v);
                    let node = &mut self.nodes[id];
                    node.volume = d;
                    node.leaf_count = 1;
                }
                None => {
                    let mut vol = 0.0;
                    let mut leaves = 0;
                    for &c in &node.children {
                        vol += self.nodes[c].volume;
                        leaves += self.nodes[c].leaf_count;
                    }
                    let node = &mut self.nodes[id];
                    node.volume = vol;
                    node.leaf_count = leaves;
                }
            }
        }

        // cuts: an edge is internal to every ancestor of its LCA (inclusive),
        // so cut = volume - 2 * internal weight
        let mut internal = vec![0.0; n_nodes];
        for e in graph.edges() {
            let mut a = self.lca(e.u, e.v)?;
            loop {
                internal[a] += e.w;
                if a == self.root {
                    break;
                }
                a = self.nodes[a].parent;
            }
        }
        for (id, node) in self.nodes.iter_mut().enumerate() {
            node.cut = node.volume - 2.0 * internal[id];
        }
        Ok(())
    }

    /// Compare cached volumes and cuts against a fresh recomputation.
    pub fn validate_caches(&self, graph: &Graph, tol: f64) -> Result<()> {
        let mut fresh = self.clone();
        fresh.recompute_caches(graph)?;
        for (id, (a, b)) in self.nodes.iter().zip(&fresh.nodes).enumerate() {
            let scale = 1.0_f64.max(b.volume.abs());
            if (a.volume - b.volume).abs() > tol * scale {
                return Err(Error::Integrity(format!(
                    "node {id}: cached volume {} but recomputed {}",
                    a.volume, b.volume
                )));
            }
            let scale = 1.0_f64.max(b.cut.abs());
            if (a.cut - b.cut).abs() > tol * scale {
                return Err(Error::Integrity(format!(
                    "node {id}: cached cut {} but recomputed {}",
                    a.cut, b.cut
                )));
            }
            if a.depth != b.depth || a.leaf_count != b.leaf_count {
                return Err(Error::Integrity(format!("node {id}: stale depth or leaf count")));
            }
        }
        Ok(())
    }

    /// Insert a new internal node under `apex` adopting `members`, which must
    /// currently be children of `apex`. Caches for the new node are supplied
    /// by the caller; depths of moved subtrees are refreshed afterwards via
    /// [`ClusterTree::refresh_depths`]. Returns the new node id.
    pub(crate) fn insert_group(
        &mut self,
        apex: usize,
        members: &[usize],
        volume: f64,
        cut: f64,
    ) -> usize {
        debug_assert!(!members.is_empty());
        let id = self.nodes.len();
        let depth = self.nodes[apex].depth + 1;
        let leaf_count = members.iter().map(|&m| self.nodes[m].leaf_count).sum();
        self.nodes.push(TreeNode {
            parent: apex,
            children: members.to_vec(),
            volume,
            cut,
            depth,
            leaf_count,
            vertex: None,
        });
        for &m in members {
            debug_assert_eq!(self.nodes[m].parent, apex);
            self.nodes[m].parent = id;
        }
        self.nodes[apex].children.retain(|c| !members.contains(c));
        self.nodes[apex].children.push(id);
        id
    }

    /// Recompute every node's depth from the root.
    pub(crate) fn refresh_depths(&mut self) {
        let mut queue = std::collections::VecDeque::new();
        queue.push_back((self.root, 0usize));
        while let Some((id, d)) = queue.pop_front() {
            self.nodes[id].depth = d;
            for &c in &self.nodes[id].children {
                queue.push_back((c, d + 1));
            }
        }
    }

    /// Render as a [`TreeDoc`] using the given vertex labels.
    pub fn to_doc(&self, labels: &[String]) -> TreeDoc {
        self.doc_of(self.root, labels)
    }

    fn doc_of(&self, node: usize, labels: &[String]) -> TreeDoc {
        let n = &self.nodes[node];
        match n.vertex {
            Some(v) => TreeDoc::Leaf {
                leaf: labels[v].clone(),
            },
            None => TreeDoc::Internal {
                name: None,
                children: n.children.iter().map(|&c| self.doc_of(c, labels)).collect(),
            },
        }
    }

    /// Rebuild a tree from a document against a graph and its label table.
    /// Caches are recomputed from the graph; internal node names are not
    /// retained.
    pub fn from_doc(doc: &TreeDoc, graph: &Graph, labels: &[String]) -> Result<Self> {
        let mut by_label: HashMap<&str, usize> = HashMap::new();
        for (v, l) in labels.iter().enumerate() {
            if by_label.insert(l.as_str(), v).is_some() {
                return Err(Error::domain(format!("duplicate vertex label {l:?}")));
            }
        }
        let shape = doc_to_shape(doc, &by_label)?;
        Self::from_shape(graph, &shape)
    }

    pub fn to_json(&self, labels: &[String]) -> Result<String> {
        let mut s = serde_json::to_string_pretty(&self.to_doc(labels))?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(json: &str, graph: &Graph, labels: &[String]) -> Result<Self> {
        let doc: TreeDoc = serde_json::from_str(json)?;
        Self::from_doc(&doc, graph, labels)
    }
}

fn doc_to_shape(doc: &TreeDoc, by_label: &HashMap<&str, usize>) -> Result<TreeShape> {
    match doc {
        TreeDoc::Leaf { leaf } => by_label
            .get(leaf.as_str())
            .map(|&v| TreeShape::Leaf(v))
            .ok_or_else(|| Error::domain(format!("leaf label {leaf:?} not in the graph"))),
        TreeDoc::Internal { children, .. } => {
            if children.is_empty() {
                return Err(Error::domain("internal node with no children"));
            }
            children
                .iter()
                .map(|c| doc_to_shape(c, by_label))
                .collect::<Result<Vec<_>>>()
                .map(TreeShape::Internal)
        }
    }
}
