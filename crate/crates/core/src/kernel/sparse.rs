use rayon::prelude::*;

use super::matrix::DenseMatrix;
use crate::error::{Error, Result};
use crate::graph::Graph;

const PAR_ROWS: usize = 512;

/// A CSR structure with one real weight per stored in-edge `j -> i`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency {
    csr: Graph,
    weights: Vec<f64>,
}

fn raw_weight(g: &Graph, pos: usize) -> f64 {
    g.edge_weights().map_or(1.0, |w| w[pos])
}

impl NormalizedAdjacency {
    /// Symmetric normalization `w(j -> i) = a_ji / sqrt(d_i d_j)` with `d`
    /// the (weighted) in-degree. Every node must carry a self-loop.
    pub fn symmetric(g: &Graph) -> Result<Self> {
        let n = g.num_nodes();
        if let Some(i) = (0..n).find(|&i| !g.has_edge(i, i)) {
            return Err(Error::MissingSelfLoop(i));
        }
        let offsets = g.row_offsets();
        let deg: Vec<f64> = (0..n)
            .map(|i| (offsets[i]..offsets[i + 1]).map(|p| raw_weight(g, p)).sum())
            .collect();
        let mut weights = Vec::with_capacity(g.num_entries());
        for i in 0..n {
            for p in offsets[i]..offsets[i + 1] {
                let j = g.col_indices()[p];
                weights.push(raw_weight(g, p) / (deg[i] * deg[j]).sqrt());
            }
        }
        Ok(NormalizedAdjacency {
            csr: g.clone(),
            weights,
        })
    }

    /// Row-mean weights `w(j -> i) = a_ji / sum_j a_ji`; nodes without
    /// in-neighbors aggregate to zero.
    pub fn mean(g: &Graph) -> Self {
        let offsets = g.row_offsets();
        let mut weights = Vec::with_capacity(g.num_entries());
        for i in 0..g.num_nodes() {
            let total: f64 = (offsets[i]..offsets[i + 1]).map(|p| raw_weight(g, p)).sum();
            for p in offsets[i]..offsets[i + 1] {
                weights.push(raw_weight(g, p) / total);
            }
        }
        NormalizedAdjacency {
            csr: g.clone(),
            weights,
        }
    }

    /// Unit weights (or the graph's own weights): plain sum aggregation.
    pub fn sum(g: &Graph) -> Self {
        let weights = (0..g.num_entries()).map(|p| raw_weight(g, p)).collect();
        NormalizedAdjacency {
            csr: g.clone(),
            weights,
        }
    }

    pub fn graph(&self) -> &Graph {
        &self.csr
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn num_nodes(&self) -> usize {
        self.csr.num_nodes()
    }

    /// Weight of the stored edge `j -> i`, if present.
    pub fn weight(&self, j: usize, i: usize) -> Option<f64> {
        let start = self.csr.row_offsets()[i];
        self.csr
            .neighbors(i)
            .binary_search(&j)
            .ok()
            .map(|k| self.weights[start + k])
    }

    /// `out[i] = sum_{j in N(i)} w(j -> i) x[j]`, accumulated in CSR order.
    pub fn spmm(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        let n = self.num_nodes();
        if x.rows() != n {
            return Err(Error::dims("spmm", format!("{n} rows"), x.rows()));
        }
        let cols = x.cols();
        let mut out = DenseMatrix::zeros(n, cols);
        if cols == 0 {
            return Ok(out);
        }
        let offsets = self.csr.row_offsets();
        let idx = self.csr.col_indices();
        let kernel = |(i, row): (usize, &mut [f64])| {
            for p in offsets[i]..offsets[i + 1] {
                let w = self.weights[p];
                for (o, &v) in row.iter_mut().zip(x.row(idx[p])) {
                    *o += w * v;
                }
            }
        };
        if n >= PAR_ROWS {
            out.data_mut().par_chunks_mut(cols).enumerate().for_each(kernel);
        } else {
            out.data_mut().chunks_mut(cols).enumerate().for_each(kernel);
        }
        Ok(out)
    }

    /// `out[j] = sum_{i : j in N(i)} w(j -> i) x[i]`, the adjoint of
    /// [`spmm`](Self::spmm). Scatters sequentially in CSR order.
    pub fn spmm_transpose(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        let n = self.num_nodes();
        if x.rows() != n {
            return Err(Error::dims("spmm_transpose", format!("{n} rows"), x.rows()));
        }
        let mut out = DenseMatrix::zeros(n, x.cols());
        let offsets = self.csr.row_offsets();
        let idx = self.csr.col_indices();
        for i in 0..n {
            let src = x.row(i);
            for p in offsets[i]..offsets[i + 1] {
                let w = self.weights[p];
                for (o, &v) in out.row_mut(idx[p]).iter_mut().zip(src) {
                    *o += w * v;
                }
            }
        }
        Ok(out)
    }
}

/// Free-function form of [`NormalizedAdjacency::symmetric`].
pub fn sym_normalize(g: &Graph) -> Result<NormalizedAdjacency> {
    NormalizedAdjacency::symmetric(g)
}

/// Free-function form of [`NormalizedAdjacency::spmm`].
pub fn spmm(a: &NormalizedAdjacency, x: &DenseMatrix) -> Result<DenseMatrix> {
    a.spmm(x)
}
