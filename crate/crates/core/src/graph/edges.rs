use std::collections::HashSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::nodes::SplitRatios;
use super::Graph;
use crate::error::{Error, Result};

/// Positive/negative edge sets for link prediction plus the graph used for
/// message passing (training positives only).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeSplit {
    pub pos_train: Vec<(usize, usize)>,
    pub pos_val: Vec<(usize, usize)>,
    pub pos_test: Vec<(usize, usize)>,
    pub neg_train: Vec<(usize, usize)>,
    pub neg_val: Vec<(usize, usize)>,
    pub neg_test: Vec<(usize, usize)>,
    pub message_graph: Graph,
}

/// Partitions the undirected edges of `g` and samples an equal number of
/// non-edges for every partition. Negatives are drawn once, uniformly and
/// without replacement, from pairs `u < v` that are not edges.
pub fn split_edges_with_negatives<R: Rng + ?Sized>(
    g: &Graph,
    ratios: SplitRatios,
    rng: &mut R,
) -> Result<EdgeSplit> {
    if g.is_directed() {
        return Err(Error::InvalidArgument("edge split requires an undirected graph".into()));
    }
    ratios.validate()?;
    let mut edges = g.canonical_edges();
    if edges.is_empty() {
        return Err(Error::Empty("edge split over a graph without edges"));
    }
    let n = g.num_nodes();
    let (n_train, n_val, _) = ratios.counts(edges.len());

    let needed = edges.len();
    let total_pairs = n * (n - 1) / 2;
    let available = total_pairs - edges.len();
    if available < needed {
        return Err(Error::NotEnoughNonEdges { needed, available });
    }
    let negatives = if available >= 2 * needed {
        sample_by_rejection(g, needed, rng)
    } else {
        let non_edges: Vec<(usize, usize)> = (0..n)
            .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
            .filter(|&(u, v)| !g.has_edge(u, v))
            .collect();
        non_edges.choose_multiple(rng, needed).copied().collect()
    };

    edges.shuffle(rng);
    let pos_train = edges[..n_train].to_vec();
    let pos_val = edges[n_train..n_train + n_val].to_vec();
    let pos_test = edges[n_train + n_val..].to_vec();
    let neg_train = negatives[..n_train].to_vec();
    let neg_val = negatives[n_train..n_train + n_val].to_vec();
    let neg_test = negatives[n_train + n_val..].to_vec();
    let message_graph = Graph::build(&pos_train, n, false)?;

    Ok(EdgeSplit {
        pos_train,
        pos_val,
        pos_test,
        neg_train,
        neg_val,
        neg_test,
        message_graph,
    })
}

fn sample_by_rejection<R: Rng + ?Sized>(g: &Graph, needed: usize, rng: &mut R) -> Vec<(usize, usize)> {
    let n = g.num_nodes();
    let mut seen = HashSet::with_capacity(needed);
    let mut out = Vec::with_capacity(needed);
    while out.len() < needed {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a == b {
            continue;
        }
        let pair = (a.min(b), a.max(b));
        if g.has_edge(pair.0, pair.1) || !seen.insert(pair) {
            continue;
        }
        out.push(pair);
    }
    out
}
