use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::nodes::NodeTable;
use super::Graph;
use crate::error::{Error, Result};
use crate::kernel::DenseMatrix;

/// Parameters of the planted-partition generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbmConfig {
    pub block_sizes: Vec<usize>,
    pub p_in: f64,
    pub p_out: f64,
    pub feature_dim: usize,
    /// Norm of each class mean; class means are mutually orthogonal.
    pub class_separation: f64,
}

impl Default for SbmConfig {
    fn default() -> Self {
        SbmConfig {
            block_sizes: vec![100, 100],
            p_in: 0.1,
            p_out: 0.01,
            feature_dim: 16,
            class_separation: 2.0,
        }
    }
}

/// Samples an undirected stochastic block model with Gaussian node
/// features `x_i = mu_{block(i)} + N(0, I)`, where `mu_c = sep * e_c`.
/// Labels are block ids; the split is left unassigned.
pub fn generate_sbm<R: Rng + ?Sized>(cfg: &SbmConfig, rng: &mut R) -> Result<(Graph, NodeTable)> {
    if cfg.block_sizes.is_empty() {
        return Err(Error::Empty("block list"));
    }
    for p in [cfg.p_in, cfg.p_out] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidArgument(format!("probability {p} outside [0, 1]")));
        }
    }
    let k = cfg.block_sizes.len();
    if cfg.feature_dim < k {
        return Err(Error::InvalidArgument(format!(
            "feature_dim {} is smaller than the number of blocks {k}",
            cfg.feature_dim
        )));
    }
    let labels: Vec<usize> = cfg
        .block_sizes
        .iter()
        .enumerate()
        .flat_map(|(c, &size)| std::iter::repeat_n(c, size))
        .collect();
    let n = labels.len();

    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let p = if labels[u] == labels[v] { cfg.p_in } else { cfg.p_out };
            if rng.random_bool(p) {
                edges.push((u, v));
            }
        }
    }
    let graph = Graph::build(&edges, n, false)?;

    let mut features = DenseMatrix::zeros(n, cfg.feature_dim);
    for (i, &c) in labels.iter().enumerate() {
        let row = features.row_mut(i);
        for x in row.iter_mut() {
            *x = rng.sample(StandardNormal);
        }
        row[c] += cfg.class_separation;
    }
    let nt = NodeTable::new(features, labels.into_iter().map(Some).collect(), k)?;
    Ok((graph, nt))
}
