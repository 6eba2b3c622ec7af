//! Graph structures, splits, label-driven augmentations and a synthetic
//! stochastic-block-model generator.
//!
//! [`Graph`] stores *in-neighbor* lists in CSR form: the neighbors listed for
//! node `i` are the nodes whose messages `i` aggregates. An edge `(u, v)`
//! handed to [`Graph::build`] is a message from `u` to `v`.

mod augment;
mod edges;
mod nodes;
mod sbm;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use augment::{augment_virtual_nodes, virtual_node_features, AugmentedGraph, Polarity, VirtualEdges, VirtualFeatures};
pub use edges::{split_edges_with_negatives, EdgeSplit};
pub use nodes::{append_label_features, split_nodes, LabelMode, NodeTable, Split, SplitRatios};
pub use sbm::{generate_sbm, SbmConfig};

/// Immutable CSR adjacency with optional per-edge weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Graph {
    num_nodes: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    edge_weights: Option<Vec<f64>>,
    directed: bool,
}

impl Graph {
    /// Builds a graph from `(src, dst)` pairs. In-neighbor lists are sorted
    /// and deduplicated; an undirected graph materializes both directions.
    pub fn build(edges: &[(usize, usize)], num_nodes: usize, directed: bool) -> Result<Self> {
        let mut lists: Vec<Vec<usize>> = vec![Vec::new(); num_nodes];
        for &(u, v) in edges {
            for id in [u, v] {
                if id >= num_nodes {
                    return Err(Error::NodeOutOfRange { id, num_nodes });
                }
            }
            lists[v].push(u);
            if !directed {
                lists[u].push(v);
            }
        }
        for list in &mut lists {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Self::from_lists(lists, directed))
    }

    /// Builds a weighted graph. Duplicate `(src, dst)` pairs keep the first
    /// weight seen.
    pub fn build_weighted(
        edges: &[(usize, usize, f64)],
        num_nodes: usize,
        directed: bool,
    ) -> Result<Self> {
        let mut lists: Vec<Vec<(usize, f64)>> = vec![Vec::new(); num_nodes];
        for &(u, v, w) in edges {
            for id in [u, v] {
                if id >= num_nodes {
                    return Err(Error::NodeOutOfRange { id, num_nodes });
                }
            }
            if !w.is_finite() {
                return Err(Error::NonFinite("edge weight"));
            }
            lists[v].push((u, w));
            if !directed {
                lists[u].push((v, w));
            }
        }
        let mut row_offsets = Vec::with_capacity(num_nodes + 1);
        let mut cols = Vec::new();
        let mut weights = Vec::new();
        row_offsets.push(0);
        for list in &mut lists {
            // stable sort keeps the first weight for duplicates
            list.sort_by_key(|&(j, _)| j);
            list.dedup_by_key(|&mut (j, _)| j);
            for &(j, w) in list.iter() {
                cols.push(j);
                weights.push(w);
            }
            row_offsets.push(cols.len());
        }
        Ok(Graph {
            num_nodes,
            row_offsets,
            col_indices: cols,
            edge_weights: Some(weights),
            directed,
        })
    }

    /// Validating constructor from raw CSR arrays.
    pub fn from_csr(
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        edge_weights: Option<Vec<f64>>,
        directed: bool,
    ) -> Result<Self> {
        let num_nodes = row_offsets
            .len()
            .checked_sub(1)
            .ok_or(Error::InvalidArgument("row_offsets must be non-empty".into()))?;
        if row_offsets[0] != 0 || row_offsets[num_nodes] != col_indices.len() {
            return Err(Error::InvalidArgument(
                "row_offsets must start at 0 and end at len(col_indices)".into(),
            ));
        }
        if row_offsets.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidArgument("row_offsets must be non-decreasing".into()));
        }
        if let Some(&id) = col_indices.iter().find(|&&c| c >= num_nodes) {
            return Err(Error::NodeOutOfRange { id, num_nodes });
        }
        if let Some(w) = &edge_weights {
            if w.len() != col_indices.len() {
                return Err(Error::dims("Graph::from_csr", col_indices.len(), w.len()));
            }
        }
        let g = Graph {
            num_nodes,
            row_offsets,
            col_indices,
            edge_weights,
            directed,
        };
        if !directed && !g.is_symmetric() {
            return Err(Error::InvalidArgument(
                "undirected graph must have a symmetric adjacency".into(),
            ));
        }
        Ok(g)
    }

    pub(crate) fn from_lists(lists: Vec<Vec<usize>>, directed: bool) -> Self {
        let mut row_offsets = Vec::with_capacity(lists.len() + 1);
        row_offsets.push(0);
        let mut col_indices = Vec::with_capacity(lists.iter().map(Vec::len).sum());
        for list in &lists {
            col_indices.extend_from_slice(list);
            row_offsets.push(col_indices.len());
        }
        Graph {
            num_nodes: lists.len(),
            row_offsets,
            col_indices,
            edge_weights: None,
            directed,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// Number of stored (directed) adjacency entries.
    pub fn num_entries(&self) -> usize {
        self.col_indices.len()
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn edge_weights(&self) -> Option<&[f64]> {
        self.edge_weights.as_deref()
    }

    /// In-neighbors of `i`, sorted ascending.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.col_indices[self.row_offsets[i]..self.row_offsets[i + 1]]
    }

    pub fn in_degree(&self, i: usize) -> usize {
        self.row_offsets[i + 1] - self.row_offsets[i]
    }

    /// Whether `src` sends messages to `dst`.
    pub fn has_edge(&self, src: usize, dst: usize) -> bool {
        dst < self.num_nodes && self.neighbors(dst).binary_search(&src).is_ok()
    }

    /// Undirected edges as `(u, v)` with `u < v`, excluding self-loops.
    pub fn canonical_edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for v in 0..self.num_nodes {
            for &u in self.neighbors(v) {
                if u < v {
                    out.push((u, v));
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// All stored `(src, dst)` pairs in CSR order.
    pub fn directed_edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.num_nodes).flat_map(move |v| self.neighbors(v).iter().map(move |&u| (u, v)))
    }

    pub fn is_symmetric(&self) -> bool {
        self.directed_edges().all(|(u, v)| self.has_edge(v, u))
    }

    pub fn has_self_loops(&self) -> bool {
        (0..self.num_nodes).all(|i| self.has_edge(i, i))
    }

    /// Adds a self-loop (weight 1 for weighted graphs) to every node that
    /// lacks one. Idempotent.
    pub fn add_self_loops(&self) -> Graph {
        let mut row_offsets = Vec::with_capacity(self.num_nodes + 1);
        let mut cols = Vec::with_capacity(self.col_indices.len() + self.num_nodes);
        let mut weights = self.edge_weights.as_ref().map(|_| Vec::new());
        row_offsets.push(0);
        for i in 0..self.num_nodes {
            let start = self.row_offsets[i];
            let list = self.neighbors(i);
            let pos = list.partition_point(|&j| j < i);
            let present = list.get(pos) == Some(&i);
            for (k, &j) in list.iter().enumerate() {
                if k == pos && !present {
                    cols.push(i);
                    if let Some(w) = weights.as_mut() {
                        w.push(1.0);
                    }
                }
                cols.push(j);
                if let (Some(w), Some(src)) = (weights.as_mut(), self.edge_weights.as_ref()) {
                    w.push(src[start + k]);
                }
            }
            if pos == list.len() {
                cols.push(i);
                if let Some(w) = weights.as_mut() {
                    w.push(1.0);
                }
            }
            row_offsets.push(cols.len());
        }
        Graph {
            num_nodes: self.num_nodes,
            row_offsets,
            col_indices: cols,
            edge_weights: weights,
            directed: self.directed,
        }
    }
}

/// Free-function form of [`Graph::build`].
pub fn build_graph(edges: &[(usize, usize)], num_nodes: usize, directed: bool) -> Result<Graph> {
    Graph::build(edges, num_nodes, directed)
}

/// Free-function form of [`Graph::add_self_loops`].
pub fn add_self_loops(g: &Graph) -> Graph {
    g.add_self_loops()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn undirected_single_edge() {
        let g = Graph::build(&[(0, 1)], 2, false).unwrap();
        assert_eq!(g.row_offsets(), &[0, 1, 2]);
        assert_eq!(g.col_indices(), &[1, 0]);
        assert!(g.is_symmetric());
    }

    #[test]
    fn empty_graph() {
        let g = Graph::build(&[], 3, false).unwrap();
        assert_eq!(g.row_offsets(), &[0, 0, 0, 0]);
        assert_eq!(g.num_entries(), 0);
    }

    #[test]
    fn directed_dedup() {
        let g = Graph::build(&[(0, 1), (0, 1)], 2, true).unwrap();
        assert_eq!(g.neighbors(1), &[0]);
        assert!(g.neighbors(0).is_empty());
    }

    #[test]
    fn endpoint_out_of_range() {
        assert!(matches!(
            Graph::build(&[(0, 5)], 2, false),
            Err(Error::NodeOutOfRange { id: 5, .. })
        ));
    }

    #[test]
    fn self_loops_isolated_node() {
        let g = Graph::build(&[], 1, false).unwrap().add_self_loops();
        assert_eq!(g.row_offsets(), &[0, 1]);
        assert_eq!(g.col_indices(), &[0]);
    }

    #[test]
    fn self_loops_path_and_idempotence() {
        let g = Graph::build(&[(0, 1)], 2, false).unwrap().add_self_loops();
        assert_eq!(g.neighbors(0), &[0, 1]);
        assert_eq!(g.neighbors(1), &[0, 1]);
        assert_eq!(g.add_self_loops(), g);
    }

    #[test]
    fn self_loops_keep_order_and_weights() {
        let g = Graph::build_weighted(&[(0, 2, 0.5), (1, 2, 2.0)], 3, true).unwrap();
        let l = g.add_self_loops();
        assert_eq!(l.neighbors(2), &[0, 1, 2]);
        assert_eq!(l.edge_weights().unwrap(), &[1.0, 1.0, 0.5, 2.0, 1.0]);
    }

    #[test]
    fn from_csr_validates() {
        assert!(Graph::from_csr(vec![0, 2, 1], vec![0, 1], None, true).is_err());
        assert!(Graph::from_csr(vec![0, 1, 1], vec![1], None, false).is_err());
        assert!(Graph::from_csr(vec![0, 1, 2], vec![1, 0], None, false).is_ok());
        assert!(Graph::from_csr(vec![0, 1], vec![3], None, true).is_err());
    }

    #[test]
    fn canonical_edges_skip_loops() {
        let g = Graph::build(&[(2, 1), (1, 1), (0, 2)], 3, false).unwrap();
        assert_eq!(g.canonical_edges(), vec![(0, 2), (1, 2)]);
    }
}
