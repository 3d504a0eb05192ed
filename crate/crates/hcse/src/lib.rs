//! Hierarchical graph clustering driven by structural entropy.
//!
//! The crate provides:
//!
//! - a weighted undirected [`Graph`] with edge-list ingestion and cluster
//!   contraction ([`Graph::quotient`]),
//! - a rooted [`ClusterTree`] over graph vertices with cached volumes and
//!   cut weights, plus a JSON document format for interchange,
//! - the entropy and cost functionals in [`costs`] (one-level entropy,
//!   structural entropy, the edge/volume cost sum, Dasgupta's cost and its
//!   concave generalization),
//! - the stratification algorithms in [`algo`]: stretch, compress,
//!   sparsest-level selection, clustering to a fixed height and automatic
//!   height detection from the entropy-reduction trace,
//! - a hierarchical stochastic block model generator ([`hsbm`]) with planted
//!   ground truth,
//! - clustering agreement metrics ([`metrics`]): per-level NMI and average
//!   best-match Jaccard,
//! - an exhaustive-search [`oracle`] that enumerates all cluster trees of
//!   small graphs and finds exact cost minimizers.
//!
//! With the default `parallel` feature, per-triangle trial stratification and
//! oracle cost evaluation fan out over rayon; without it everything runs
//! sequentially on one thread. Results are bit-identical either way.

pub mod algo;
pub mod costs;
mod error;
pub mod graph;
pub mod hsbm;
pub mod metrics;
pub mod oracle;
mod par;
pub mod tree;

pub use error::{Error, Result};
pub use graph::{Edge, Graph, QuotientGraph};
pub use tree::{ClusterTree, TreeDoc, TreeNode, TreeShape};
