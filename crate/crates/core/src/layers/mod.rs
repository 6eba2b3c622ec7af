//! GCN, GraphSAGE and GAT layers with layer-local parameter gradients.
//!
//! Every forward returns the post-ReLU output plus a [`ForwardCache`];
//! [`layer_backward`] turns an upstream gradient on that output into
//! gradients for the layer's own parameters and nothing else.

mod gat;
mod gcn;
mod sage;

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::kernel::{DenseMatrix, NormalizedAdjacency};

pub use gat::gat_forward;
pub use gcn::gcn_forward;
pub use sage::sage_forward;

/// Attention heads used by GAT layers unless configured otherwise.
pub const GAT_HEADS: usize = 4;
/// Negative slope of the attention LeakyReLU.
pub const GAT_SLOPE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    Gcn,
    Sage,
    Gat,
}

impl Architecture {
    pub fn as_str(self) -> &'static str {
        match self {
            Architecture::Gcn => "gcn",
            Architecture::Sage => "sage",
            Architecture::Gat => "gat",
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Learnable parameters of one layer. Gradients use the same type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LayerParams {
    Gcn {
        w: DenseMatrix,
        b: Vec<f64>,
    },
    Sage {
        w_self: DenseMatrix,
        w_neigh: DenseMatrix,
        b: Vec<f64>,
    },
    Gat {
        /// One `F_in x (F_out / heads)` projection per head.
        w: Vec<DenseMatrix>,
        a_src: Vec<Vec<f64>>,
        a_dst: Vec<Vec<f64>>,
        slope: f64,
    },
}

fn glorot<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DenseMatrix {
    let s = (6.0 / (rows + cols) as f64).sqrt();
    let mut m = DenseMatrix::zeros(rows, cols);
    for x in m.data_mut() {
        *x = rng.random_range(-s..=s);
    }
    m
}

impl LayerParams {
    /// Uniform `(-s, s)` initialization with `s = sqrt(6 / (fan_in + fan_out))`
    /// per matrix (attention vectors count as `d x 1`); biases start at zero.
    pub fn init<R: Rng + ?Sized>(
        arch: Architecture,
        f_in: usize,
        f_out: usize,
        heads: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if f_in == 0 || f_out == 0 {
            return Err(Error::InvalidArgument(format!("layer widths must be positive, got {f_in} -> {f_out}")));
        }
        Ok(match arch {
            Architecture::Gcn => LayerParams::Gcn {
                w: glorot(f_in, f_out, rng),
                b: vec![0.0; f_out],
            },
            Architecture::Sage => LayerParams::Sage {
                w_self: glorot(f_in, f_out, rng),
                w_neigh: glorot(f_in, f_out, rng),
                b: vec![0.0; f_out],
            },
            Architecture::Gat => {
                if heads == 0 || f_out % heads != 0 {
                    return Err(Error::InvalidArgument(format!(
                        "GAT width {f_out} is not divisible by {heads} heads"
                    )));
                }
                let d = f_out / heads;
                let mut w = Vec::with_capacity(heads);
                let mut a_src = Vec::with_capacity(heads);
                let mut a_dst = Vec::with_capacity(heads);
                for _ in 0..heads {
                    w.push(glorot(f_in, d, rng));
                    a_src.push(glorot(d, 1, rng).into_vec());
                    a_dst.push(glorot(d, 1, rng).into_vec());
                }
                LayerParams::Gat {
                    w,
                    a_src,
                    a_dst,
                    slope: GAT_SLOPE,
                }
            }
        })
    }

    pub fn architecture(&self) -> Architecture {
        match self {
            LayerParams::Gcn { .. } => Architecture::Gcn,
            LayerParams::Sage { .. } => Architecture::Sage,
            LayerParams::Gat { .. } => Architecture::Gat,
        }
    }

    pub fn in_dim(&self) -> usize {
        match self {
            LayerParams::Gcn { w, .. } => w.rows(),
            LayerParams::Sage { w_self, .. } => w_self.rows(),
            LayerParams::Gat { w, .. } => w[0].rows(),
        }
    }

    pub fn out_dim(&self) -> usize {
        match self {
            LayerParams::Gcn { w, .. } => w.cols(),
            LayerParams::Sage { w_self, .. } => w_self.cols(),
            LayerParams::Gat { w, .. } => w.iter().map(DenseMatrix::cols).sum(),
        }
    }

    /// Every parameter array in a fixed order.
    pub fn tensors(&self) -> Vec<&[f64]> {
        match self {
            LayerParams::Gcn { w, b } => vec![w.data(), b],
            LayerParams::Sage { w_self, w_neigh, b } => vec![w_self.data(), w_neigh.data(), b],
            LayerParams::Gat { w, a_src, a_dst, .. } => {
                let mut out: Vec<&[f64]> = Vec::with_capacity(3 * w.len());
                for h in 0..w.len() {
                    out.push(w[h].data());
                    out.push(&a_src[h]);
                    out.push(&a_dst[h]);
                }
                out
            }
        }
    }

    /// Mutable view matching [`tensors`](Self::tensors).
    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        match self {
            LayerParams::Gcn { w, b } => vec![w.data_mut(), b],
            LayerParams::Sage { w_self, w_neigh, b } => vec![w_self.data_mut(), w_neigh.data_mut(), b],
            LayerParams::Gat { w, a_src, a_dst, .. } => {
                let mut out: Vec<&mut [f64]> = Vec::with_capacity(3 * w.len());
                for ((wh, s), d) in w.iter_mut().zip(a_src.iter_mut()).zip(a_dst.iter_mut()) {
                    out.push(wh.data_mut());
                    out.push(s);
                    out.push(d);
                }
                out
            }
        }
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn byte_size(&self) -> usize {
        self.num_scalars() * std::mem::size_of::<f64>()
    }

    /// Same shape, all entries zero.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.fill(0.0);
        }
        z
    }

    /// All parameters concatenated in [`tensors`](Self::tensors) order.
    pub fn to_flat(&self) -> Vec<f64> {
        self.tensors().concat()
    }

    /// Overwrites the parameters from a flat vector of matching length.
    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_scalars() {
            return Err(Error::dims("LayerParams::set_flat", self.num_scalars(), flat.len()));
        }
        let mut offset = 0;
        for t in self.tensors_mut() {
            let n = t.len();
            t.copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    /// Multiplies every entry by `alpha`.
    pub fn scaled(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        for t in out.tensors_mut() {
            for x in t.iter_mut() {
                *x *= alpha;
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }

    /// SHA-256 over the architecture tag, shapes and little-endian bits.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.architecture().as_str().as_bytes());
        for t in self.tensors() {
            hasher.update((t.len() as u64).to_le_bytes());
            for x in t {
                hasher.update(x.to_le_bytes());
            }
        }
        hex::encode(hasher.finalize())
    }
}

/// Graph operator a layer propagates over, prepared once per graph.
#[derive(Debug, Clone)]
pub enum Propagation {
    /// Symmetric-normalized adjacency with self-loops.
    Gcn(Arc<NormalizedAdjacency>),
    /// Mean weights over in-neighbors (no self-loops).
    Sage(Arc<NormalizedAdjacency>),
    /// Structure with self-loops; attention weights are computed per call.
    Gat(Arc<Graph>),
}

impl Propagation {
    pub fn prepare(arch: Architecture, g: &Graph) -> Result<Self> {
        Ok(match arch {
            Architecture::Gcn => Propagation::Gcn(Arc::new(NormalizedAdjacency::symmetric(&g.add_self_loops())?)),
            Architecture::Sage => Propagation::Sage(Arc::new(NormalizedAdjacency::mean(g))),
            Architecture::Gat => Propagation::Gat(Arc::new(g.add_self_loops())),
        })
    }

    pub fn architecture(&self) -> Architecture {
        match self {
            Propagation::Gcn(_) => Architecture::Gcn,
            Propagation::Sage(_) => Architecture::Sage,
            Propagation::Gat(_) => Architecture::Gat,
        }
    }

    pub fn num_nodes(&self) -> usize {
        match self {
            Propagation::Gcn(a) | Propagation::Sage(a) => a.num_nodes(),
            Propagation::Gat(g) => g.num_nodes(),
        }
    }
}

/// Intermediates of one forward call, consumed by [`layer_backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub(crate) kind: CacheKind,
    /// Pre-activation output; the ReLU mask is `pre > 0`.
    pub(crate) pre: DenseMatrix,
}

#[derive(Debug, Clone)]
pub(crate) enum CacheKind {
    Gcn {
        /// `A_hat X`.
        ax: DenseMatrix,
    },
    Sage {
        x: DenseMatrix,
        agg: DenseMatrix,
    },
    Gat(gat::GatCache),
}

impl ForwardCache {
    pub fn architecture(&self) -> Architecture {
        match self.kind {
            CacheKind::Gcn { .. } => Architecture::Gcn,
            CacheKind::Sage { .. } => Architecture::Sage,
            CacheKind::Gat(_) => Architecture::Gat,
        }
    }

    pub fn output_shape(&self) -> (usize, usize) {
        self.pre.shape()
    }

    /// Bytes retained by the cache.
    pub fn byte_size(&self) -> usize {
        self.pre.byte_size()
            + match &self.kind {
                CacheKind::Gcn { ax } => ax.byte_size(),
                CacheKind::Sage { x, agg } => x.byte_size() + agg.byte_size(),
                CacheKind::Gat(c) => c.byte_size(),
            }
    }
}

/// Runs the layer `p` over `prop`, returning the post-ReLU output and cache.
pub fn layer_forward(prop: &Propagation, x: &DenseMatrix, p: &LayerParams) -> Result<(DenseMatrix, ForwardCache)> {
    match (prop, p) {
        (Propagation::Gcn(a), LayerParams::Gcn { .. }) => gcn::forward(a, x, p),
        (Propagation::Sage(a), LayerParams::Sage { .. }) => sage::forward(a, x, p),
        (Propagation::Gat(g), LayerParams::Gat { .. }) => gat::forward(g, x, p),
        _ => Err(Error::InvalidArgument(format!(
            "{} parameters used with a {} propagation",
            p.architecture(),
            prop.architecture()
        ))),
    }
}

/// Forward pass without retaining a cache.
pub fn layer_output(prop: &Propagation, x: &DenseMatrix, p: &LayerParams) -> Result<DenseMatrix> {
    layer_forward(prop, x, p).map(|(h, _)| h)
}

/// Exact gradient of the loss with respect to the parameters that
/// produced `cache`, given `dh = dL/dH`. No gradient reaches the input.
pub fn layer_backward(cache: &ForwardCache, dh: &DenseMatrix) -> Result<LayerParams> {
    if dh.shape() != cache.pre.shape() {
        return Err(Error::dims(
            "layer_backward",
            format!("{:?}", cache.pre.shape()),
            format!("{:?}", dh.shape()),
        ));
    }
    let mut dpre = dh.clone();
    for (g, &z) in dpre.data_mut().iter_mut().zip(cache.pre.data()) {
        if z <= 0.0 {
            *g = 0.0;
        }
    }
    match &cache.kind {
        CacheKind::Gcn { ax } => Ok(LayerParams::Gcn {
            w: ax.matmul_tn(&dpre)?,
            b: dpre.column_sums(),
        }),
        CacheKind::Sage { x, agg } => Ok(LayerParams::Sage {
            w_self: x.matmul_tn(&dpre)?,
            w_neigh: agg.matmul_tn(&dpre)?,
            b: dpre.column_sums(),
        }),
        CacheKind::Gat(c) => c.backward(&dpre),
    }
}

pub(crate) fn relu_in_place(m: &mut DenseMatrix) -> DenseMatrix {
    let pre = m.clone();
    for x in m.data_mut() {
        if *x <= 0.0 {
            *x = 0.0;
        }
    }
    pre
}

pub(crate) fn check_rows(op: &'static str, n: usize, x: &DenseMatrix) -> Result<()> {
    if x.rows() != n {
        return Err(Error::dims(op, format!("{n} rows"), x.rows()));
    }
    Ok(())
}

pub(crate) fn check_in_dim(op: &'static str, p: &LayerParams, x: &DenseMatrix) -> Result<()> {
    if x.cols() != p.in_dim() {
        return Err(Error::dims(op, format!("{} input columns", p.in_dim()), x.cols()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded_rng;

    #[test]
    fn init_shapes_and_range() {
        let mut rng = seeded_rng(1, 0);
        let p = LayerParams::init(Architecture::Gat, 6, 8, 4, &mut rng).unwrap();
        assert_eq!((p.in_dim(), p.out_dim()), (6, 8));
        assert_eq!(p.num_scalars(), 4 * (6 * 2 + 2 + 2));
        let s = (6.0f64 / 8.0).sqrt();
        assert!(p.tensors()[0].iter().all(|x| x.abs() <= s));
        assert!(LayerParams::init(Architecture::Gat, 6, 6, 4, &mut rng).is_err());
        let g = LayerParams::init(Architecture::Gcn, 3, 2, 1, &mut rng).unwrap();
        assert_eq!(g.tensors()[1], &[0.0, 0.0]);
    }

    #[test]
    fn flat_round_trip_and_fingerprint() {
        let mut rng = seeded_rng(2, 0);
        let p = LayerParams::init(Architecture::Sage, 3, 4, 1, &mut rng).unwrap();
        let mut q = p.zeros_like();
        assert_ne!(p.fingerprint(), q.fingerprint());
        q.set_flat(&p.to_flat()).unwrap();
        assert_eq!(p, q);
        assert_eq!(p.fingerprint(), q.fingerprint());
        assert_eq!(p.fingerprint().len(), 64);
    }

    #[test]
    fn mismatched_propagation() {
        let g = Graph::build(&[(0, 1)], 2, false).unwrap();
        let prop = Propagation::prepare(Architecture::Sage, &g).unwrap();
        let p = LayerParams::init(Architecture::Gcn, 1, 1, 1, &mut seeded_rng(0, 0)).unwrap();
        assert!(layer_forward(&prop, &DenseMatrix::zeros(2, 1), &p).is_err());
    }
}
