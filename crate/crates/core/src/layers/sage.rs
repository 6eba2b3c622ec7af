use super::{check_in_dim, check_rows, relu_in_place, CacheKind, ForwardCache, LayerParams};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::kernel::{DenseMatrix, NormalizedAdjacency};

/// `H = ReLU(X W_self + mean_{j in N(i)} x_j W_neigh + b)`; nodes without
/// in-neighbors aggregate to zero.
pub fn sage_forward(g: &Graph, x: &DenseMatrix, p: &LayerParams) -> Result<(DenseMatrix, ForwardCache)> {
    forward(&NormalizedAdjacency::mean(g), x, p)
}

pub(super) fn forward(
    mean: &NormalizedAdjacency,
    x: &DenseMatrix,
    p: &LayerParams,
) -> Result<(DenseMatrix, ForwardCache)> {
    let LayerParams::Sage { w_self, w_neigh, b } = p else {
        return Err(Error::InvalidArgument(format!("sage_forward got {} parameters", p.architecture())));
    };
    check_rows("sage_forward", mean.num_nodes(), x)?;
    check_in_dim("sage_forward", p, x)?;
    let agg = mean.spmm(x)?;
    let mut h = x.matmul(w_self)?;
    h.add_assign(&agg.matmul(w_neigh)?)?;
    h.add_row_vector(b)?;
    let pre = relu_in_place(&mut h);
    Ok((
        h,
        ForwardCache {
            kind: CacheKind::Sage { x: x.clone(), agg },
            pre,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(w_self: DenseMatrix, w_neigh: DenseMatrix) -> LayerParams {
        let b = vec![0.0; w_self.cols()];
        LayerParams::Sage { w_self, w_neigh, b }
    }

    #[test]
    fn single_neighbor() {
        let g = Graph::build(&[(1, 0)], 2, true).unwrap();
        let x = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![3.0, 0.0]]).unwrap();
        let p = params(DenseMatrix::identity(2), DenseMatrix::identity(2));
        let (h, _) = sage_forward(&g, &x, &p).unwrap();
        assert_eq!(h.row(0), &[4.0, 0.0]);
        // node 1 has no in-neighbors
        assert_eq!(h.row(1), &[3.0, 0.0]);
    }

    #[test]
    fn mean_of_neighbors() {
        let g = Graph::build(&[(1, 0), (2, 0)], 3, true).unwrap();
        let x = DenseMatrix::from_rows(&[vec![10.0], vec![2.0], vec![4.0]]).unwrap();
        let p = params(DenseMatrix::zeros(1, 1), DenseMatrix::identity(1));
        let (h, _) = sage_forward(&g, &x, &p).unwrap();
        assert_eq!(h.row(0), &[3.0]);
    }
}
