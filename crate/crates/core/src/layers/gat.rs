use std::sync::Arc;

use super::{check_in_dim, check_rows, relu_in_place, CacheKind, ForwardCache, LayerParams};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::kernel::{leaky_relu, DenseMatrix};

#[derive(Debug, Clone)]
pub(crate) struct GatCache {
    graph: Arc<Graph>,
    x: DenseMatrix,
    /// Per-head projections `z = X W_h`.
    z: Vec<DenseMatrix>,
    /// Per-head attention logits before the LeakyReLU, one per stored edge.
    logits: Vec<Vec<f64>>,
    /// Per-head attention coefficients, one per stored edge.
    alpha: Vec<Vec<f64>>,
    a_src: Vec<Vec<f64>>,
    a_dst: Vec<Vec<f64>>,
    slope: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Multi-head graph attention. `g` must contain a self-loop on every node.
pub fn gat_forward(g: &Graph, x: &DenseMatrix, p: &LayerParams) -> Result<(DenseMatrix, ForwardCache)> {
    if let Some(i) = (0..g.num_nodes()).find(|&i| !g.has_edge(i, i)) {
        return Err(Error::MissingSelfLoop(i));
    }
    forward(&Arc::new(g.clone()), x, p)
}

pub(super) fn forward(g: &Arc<Graph>, x: &DenseMatrix, p: &LayerParams) -> Result<(DenseMatrix, ForwardCache)> {
    let LayerParams::Gat { w, a_src, a_dst, slope } = p else {
        return Err(Error::InvalidArgument(format!("gat_forward got {} parameters", p.architecture())));
    };
    let n = g.num_nodes();
    check_rows("gat_forward", n, x)?;
    check_in_dim("gat_forward", p, x)?;
    let offsets = g.row_offsets();
    let cols = g.col_indices();
    let out_dim = p.out_dim();
    let mut h = DenseMatrix::zeros(n, out_dim);
    let mut zs = Vec::with_capacity(w.len());
    let mut all_logits = Vec::with_capacity(w.len());
    let mut all_alpha = Vec::with_capacity(w.len());
    let mut col0 = 0;
    for (head, wh) in w.iter().enumerate() {
        let d = wh.cols();
        let z = x.matmul(wh)?;
        let s_src: Vec<f64> = (0..n).map(|j| dot(&a_src[head], z.row(j))).collect();
        let s_dst: Vec<f64> = (0..n).map(|i| dot(&a_dst[head], z.row(i))).collect();
        let mut logits = vec![0.0; cols.len()];
        let mut alpha = vec![0.0; cols.len()];
        for i in 0..n {
            let range = offsets[i]..offsets[i + 1];
            if range.is_empty() {
                continue;
            }
            let mut max = f64::NEG_INFINITY;
            for q in range.clone() {
                logits[q] = s_src[cols[q]] + s_dst[i];
                alpha[q] = leaky_relu(logits[q], *slope);
                max = max.max(alpha[q]);
            }
            let mut total = 0.0;
            for q in range.clone() {
                alpha[q] = (alpha[q] - max).exp();
                total += alpha[q];
            }
            let out = &mut h.row_mut(i)[col0..col0 + d];
            for q in range {
                alpha[q] /= total;
                for (o, &v) in out.iter_mut().zip(z.row(cols[q])) {
                    *o += alpha[q] * v;
                }
            }
        }
        zs.push(z);
        all_logits.push(logits);
        all_alpha.push(alpha);
        col0 += d;
    }
    let pre = relu_in_place(&mut h);
    let cache = GatCache {
        graph: Arc::clone(g),
        x: x.clone(),
        z: zs,
        logits: all_logits,
        alpha: all_alpha,
        a_src: a_src.clone(),
        a_dst: a_dst.clone(),
        slope: *slope,
    };
    Ok((
        h,
        ForwardCache {
            kind: CacheKind::Gat(cache),
            pre,
        },
    ))
}

impl GatCache {
    pub(super) fn byte_size(&self) -> usize {
        let f = std::mem::size_of::<f64>();
        self.x.byte_size()
            + self.z.iter().map(DenseMatrix::byte_size).sum::<usize>()
            + (self.logits.iter().map(Vec::len).sum::<usize>() + self.alpha.iter().map(Vec::len).sum::<usize>()) * f
    }

    /// Gradients given `dpre`, the upstream gradient already masked by ReLU.
    pub(super) fn backward(&self, dpre: &DenseMatrix) -> Result<LayerParams> {
        let n = self.graph.num_nodes();
        let offsets = self.graph.row_offsets();
        let cols = self.graph.col_indices();
        let mut dw = Vec::with_capacity(self.z.len());
        let mut da_src = Vec::with_capacity(self.z.len());
        let mut da_dst = Vec::with_capacity(self.z.len());
        let mut col0 = 0;
        for (head, z) in self.z.iter().enumerate() {
            let d = z.cols();
            let alpha = &self.alpha[head];
            let logits = &self.logits[head];
            let mut dz = DenseMatrix::zeros(n, d);
            let mut ds_src = vec![0.0; n];
            let mut ds_dst = vec![0.0; n];
            let mut dalpha = vec![0.0; cols.len()];
            for i in 0..n {
                let d_out = &dpre.row(i)[col0..col0 + d];
                let range = offsets[i]..offsets[i + 1];
                let mut weighted = 0.0;
                for q in range.clone() {
                    let j = cols[q];
                    dalpha[q] = dot(d_out, z.row(j));
                    weighted += alpha[q] * dalpha[q];
                    for (g, &v) in dz.row_mut(j).iter_mut().zip(d_out) {
                        *g += alpha[q] * v;
                    }
                }
                for q in range {
                    let de = alpha[q] * (dalpha[q] - weighted);
                    let du = if logits[q] > 0.0 { de } else { self.slope * de };
                    ds_src[cols[q]] += du;
                    ds_dst[i] += du;
                }
            }
            let mut ga_src = vec![0.0; d];
            let mut ga_dst = vec![0.0; d];
            for v in 0..n {
                let zv = z.row(v);
                for k in 0..d {
                    ga_src[k] += ds_src[v] * zv[k];
                    ga_dst[k] += ds_dst[v] * zv[k];
                }
                let row = dz.row_mut(v);
                for k in 0..d {
                    row[k] += ds_src[v] * self.a_src[head][k] + ds_dst[v] * self.a_dst[head][k];
                }
            }
            dw.push(self.x.matmul_tn(&dz)?);
            da_src.push(ga_src);
            da_dst.push(ga_dst);
            col0 += d;
        }
        Ok(LayerParams::Gat {
            w: dw,
            a_src: da_src,
            a_dst: da_dst,
            slope: self.slope,
        })
    }

    #[cfg(test)]
    pub(crate) fn attention(&self, head: usize) -> &[f64] {
        &self.alpha[head]
    }
}
