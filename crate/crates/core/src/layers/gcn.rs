use super::{check_in_dim, check_rows, relu_in_place, CacheKind, ForwardCache, LayerParams};
use crate::error::{Error, Result};
use crate::kernel::{DenseMatrix, NormalizedAdjacency};

/// `H = ReLU(A_hat X W + b)` over a symmetric-normalized adjacency.
pub fn gcn_forward(
    adj: &NormalizedAdjacency,
    x: &DenseMatrix,
    p: &LayerParams,
) -> Result<(DenseMatrix, ForwardCache)> {
    forward(adj, x, p)
}

pub(super) fn forward(
    adj: &NormalizedAdjacency,
    x: &DenseMatrix,
    p: &LayerParams,
) -> Result<(DenseMatrix, ForwardCache)> {
    let LayerParams::Gcn { w, b } = p else {
        return Err(Error::InvalidArgument(format!("gcn_forward got {} parameters", p.architecture())));
    };
    check_rows("gcn_forward", adj.num_nodes(), x)?;
    check_in_dim("gcn_forward", p, x)?;
    let ax = adj.spmm(x)?;
    let mut h = ax.matmul(w)?;
    h.add_row_vector(b)?;
    let pre = relu_in_place(&mut h);
    Ok((
        h,
        ForwardCache {
            kind: CacheKind::Gcn { ax },
            pre,
        },
    ))
}
