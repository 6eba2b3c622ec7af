//! Independent reference implementations for verification.
//!
//! The dense oracle and the reference losses here use their own loops over
//! `Vec<Vec<T>>` and never call into `kernel`, `layers` or `losses`. They
//! are generic over [`Real`], so the same code runs in `f64` or in
//! double-double ([`Extended`]) arithmetic. Finite differences of an
//! [`Extended`] loss resolve gradients far below the `f64` rounding floor.

use std::ops::{Add, Div, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::kernel::DenseMatrix;
use crate::layers::LayerParams;

/// Double-double (about 32 significant digits) scalar.
pub type Extended = twofloat::TwoFloat;

/// Largest graph the dense oracle accepts.
pub const ORACLE_MAX_NODES: usize = 64;

/// Scalar arithmetic needed by the oracles.
pub trait Real:
    Copy
    + PartialOrd
    + From<f64>
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn to_f64(self) -> f64;

    fn zero() -> Self {
        Self::from(0.0)
    }

    fn max(self, other: Self) -> Self {
        if self > other {
            self
        } else {
            other
        }
    }

    fn abs(self) -> Self {
        if self < Self::zero() {
            -self
        } else {
            self
        }
    }
}

impl Real for f64 {
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn to_f64(self) -> f64 {
        self
    }
}

impl Real for Extended {
    fn exp(self) -> Self {
        Extended::exp(self)
    }
    fn ln(self) -> Self {
        Extended::ln(self)
    }
    fn sqrt(self) -> Self {
        Extended::sqrt(self)
    }
    fn to_f64(self) -> f64 {
        f64::from(self)
    }
}

/// Agreement between an analytic and a reference vector.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub max_abs_err: f64,
    pub max_rel_err: f64,
    /// Index of the coordinate with the largest relative error.
    pub worst_index: usize,
    pub worst_analytic: f64,
    pub worst_reference: f64,
}

impl OracleReport {
    pub fn within(&self, rel_tol: f64) -> bool {
        self.max_rel_err <= rel_tol
    }
}

/// Compares coordinate-wise using the relative error
/// `|a - r| / max(|a|, |r|, 1e-8)`.
pub fn compare(analytic: &[f64], reference: &[f64]) -> Result<OracleReport> {
    if analytic.len() != reference.len() {
        return Err(Error::dims("testkit::compare", analytic.len(), reference.len()));
    }
    let mut report = OracleReport {
        max_abs_err: 0.0,
        max_rel_err: 0.0,
        worst_index: 0,
        worst_analytic: analytic.first().copied().unwrap_or(0.0),
        worst_reference: reference.first().copied().unwrap_or(0.0),
    };
    for (k, (&a, &r)) in analytic.iter().zip(reference).enumerate() {
        let abs = (a - r).abs();
        let rel = abs / a.abs().max(r.abs()).max(1e-8);
        report.max_abs_err = report.max_abs_err.max(abs);
        if rel > report.max_rel_err {
            report.max_rel_err = rel;
            report.worst_index = k;
            report.worst_analytic = a;
            report.worst_reference = r;
        }
    }
    Ok(report)
}

/// Central differences `(L(p + h e_k) - L(p - h e_k)) / 2h` for every k.
/// The difference and division happen in the loss's own precision; the
/// divisor is the step actually representable in `f64`.
pub fn finite_diff_grad<T, F>(mut loss: F, params: &[f64], h: f64) -> Result<Vec<f64>>
where
    T: Real,
    F: FnMut(&[f64]) -> Result<T>,
{
    if !(1e-7..=1e-3).contains(&h) {
        return Err(Error::InvalidArgument(format!("finite-difference step {h} outside [1e-7, 1e-3]")));
    }
    let mut probe = params.to_vec();
    let mut grad = Vec::with_capacity(params.len());
    for k in 0..params.len() {
        let (hi, lo) = (params[k] + h, params[k] - h);
        probe[k] = hi;
        let up = loss(&probe)?;
        probe[k] = lo;
        let down = loss(&probe)?;
        probe[k] = params[k];
        if !up.to_f64().is_finite() || !down.to_f64().is_finite() {
            return Err(Error::NonFinite("finite-difference loss"));
        }
        grad.push(((up - down) / (T::from(hi) - T::from(lo))).to_f64());
    }
    Ok(grad)
}

/// `a[i][j]` = weight of the message `j -> i` (1 for unweighted graphs).
pub fn dense_adjacency(g: &Graph) -> Vec<Vec<f64>> {
    let n = g.num_nodes();
    let mut a = vec![vec![0.0; n]; n];
    for i in 0..n {
        let start = g.row_offsets()[i];
        for (k, &j) in g.neighbors(i).iter().enumerate() {
            a[i][j] = g.edge_weights().map_or(1.0, |w| w[start + k]);
        }
    }
    a
}

type Rows<T> = Vec<Vec<T>>;

fn lift<T: Real>(m: &DenseMatrix) -> Rows<T> {
    (0..m.rows()).map(|i| m.row(i).iter().map(|&v| T::from(v)).collect()).collect()
}

fn lift_vec<T: Real>(v: &[f64]) -> Vec<T> {
    v.iter().map(|&x| T::from(x)).collect()
}

fn product<T: Real>(a: &Rows<T>, b: &Rows<T>, out_cols: usize) -> Rows<T> {
    a.iter()
        .map(|ai| {
            (0..out_cols)
                .map(|c| {
                    let mut s = T::zero();
                    for (p, &v) in ai.iter().enumerate() {
                        s = s + v * b[p][c];
                    }
                    s
                })
                .collect()
        })
        .collect()
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let mut s = T::zero();
    for (&x, &y) in a.iter().zip(b) {
        s = s + x * y;
    }
    s
}

fn with_unit_diagonal(a: &[Vec<f64>]) -> Rows<f64> {
    let mut out = a.to_vec();
    for (i, row) in out.iter_mut().enumerate() {
        if row[i] == 0.0 {
            row[i] = 1.0;
        }
    }
    out
}

/// Reference layer output in precision `T` from a dense adjacency
/// (`adj[i][j]` = weight of `j -> i`). GCN and GAT add missing self-loops.
pub fn dense_forward_in<T: Real>(p: &LayerParams, adj: &[Vec<f64>], x: &DenseMatrix) -> Result<Rows<T>> {
    let n = adj.len();
    if n > ORACLE_MAX_NODES {
        return Err(Error::InvalidArgument(format!("dense oracle limited to {ORACLE_MAX_NODES} nodes, got {n}")));
    }
    if x.rows() != n || adj.iter().any(|r| r.len() != n) {
        return Err(Error::dims("dense_forward_oracle", n, x.rows()));
    }
    if x.cols() != p.in_dim() {
        return Err(Error::dims("dense_forward_oracle", p.in_dim(), x.cols()));
    }
    let xr: Rows<T> = lift(x);
    let f_in = x.cols();
    let out: Rows<T> = match p {
        LayerParams::Gcn { w, b } => {
            let a = with_unit_diagonal(adj);
            let deg: Vec<T> = a.iter().map(|r| T::from(r.iter().sum::<f64>())).collect();
            let norm: Rows<T> = (0..n)
                .map(|i| (0..n).map(|j| T::from(a[i][j]) / (deg[i] * deg[j]).sqrt()).collect())
                .collect();
            let xw = product(&xr, &lift(w), w.cols());
            let mut h = product(&norm, &xw, w.cols());
            let b: Vec<T> = lift_vec(b);
            for row in &mut h {
                for (v, &bias) in row.iter_mut().zip(&b) {
                    *v = *v + bias;
                }
            }
            h
        }
        LayerParams::Sage { w_self, w_neigh, b } => {
            let mut agg = vec![vec![T::zero(); f_in]; n];
            for i in 0..n {
                let total: f64 = adj[i].iter().sum();
                if total == 0.0 {
                    continue;
                }
                for j in 0..n {
                    let wt = T::from(adj[i][j]) / T::from(total);
                    for c in 0..f_in {
                        agg[i][c] = agg[i][c] + wt * xr[j][c];
                    }
                }
            }
            let own = product(&xr, &lift(w_self), w_self.cols());
            let nb = product(&agg, &lift(w_neigh), w_neigh.cols());
            let b: Vec<T> = lift_vec(b);
            (0..n)
                .map(|i| (0..b.len()).map(|c| own[i][c] + nb[i][c] + b[c]).collect())
                .collect()
        }
        LayerParams::Gat { w, a_src, a_dst, slope } => {
            let a = with_unit_diagonal(adj);
            let slope = T::from(*slope);
            let mut h: Rows<T> = vec![Vec::new(); n];
            for (head, wh) in w.iter().enumerate() {
                let z = product(&xr, &lift(wh), wh.cols());
                let (va, vd): (Vec<T>, Vec<T>) = (lift_vec(&a_src[head]), lift_vec(&a_dst[head]));
                for i in 0..n {
                    let nbrs: Vec<usize> = (0..n).filter(|&j| a[i][j] != 0.0).collect();
                    let scores: Vec<T> = nbrs
                        .iter()
                        .map(|&j| {
                            let e = dot(&va, &z[j]) + dot(&vd, &z[i]);
                            if e < T::zero() {
                                e * slope
                            } else {
                                e
                            }
                        })
                        .collect();
                    let top = scores.iter().copied().fold(scores[0], T::max);
                    let mut total = T::zero();
                    for &s in &scores {
                        total = total + (s - top).exp();
                    }
                    let mut acc = vec![T::zero(); wh.cols()];
                    for (&j, &s) in nbrs.iter().zip(&scores) {
                        let att = (s - top).exp() / total;
                        for (o, &zj) in acc.iter_mut().zip(&z[j]) {
                            *o = *o + att * zj;
                        }
                    }
                    h[i].extend(acc);
                }
            }
            h
        }
    };
    Ok(out
        .into_iter()
        .map(|row| row.into_iter().map(|v| v.max(T::zero())).collect())
        .collect())
}

/// `f64` reference layer output as a matrix.
pub fn dense_forward_oracle(p: &LayerParams, adj: &[Vec<f64>], x: &DenseMatrix) -> Result<DenseMatrix> {
    let rows: Rows<f64> = dense_forward_in(p, adj, x)?;
    DenseMatrix::from_vec(adj.len(), p.out_dim(), rows.into_iter().flatten().collect())
}

/// Reference objectives, written independently of `crate::losses`.
pub mod reference {
    use super::{dot, Real};

    fn softplus<T: Real>(x: T) -> T {
        x.max(T::zero()) + (T::from(1.0) + (-x.abs()).exp()).ln()
    }

    fn mean<T: Real>(terms: impl Iterator<Item = T>) -> T {
        let mut total = T::zero();
        let mut n = 0.0;
        for t in terms {
            total = total + t;
            n += 1.0;
        }
        total / T::from(n)
    }

    pub fn goodness<T: Real>(h: &[Vec<T>], rows: &[usize]) -> Vec<T> {
        rows.iter().map(|&i| dot(&h[i], &h[i])).collect()
    }

    pub fn ff<T: Real>(pos: &[T], neg: &[T], theta: f64) -> T {
        let th = T::from(theta);
        mean(pos.iter().map(|&g| softplus(th - g))) + mean(neg.iter().map(|&g| softplus(g - th)))
    }

    pub fn symba<T: Real>(pos: &[T], neg: &[T], alpha: f64) -> T {
        let a = T::from(alpha);
        mean(pos.iter().zip(neg).map(|(&p, &q)| softplus(-(a * (p - q)))))
    }

    pub fn contrastive<T: Real>(h: &[Vec<T>], rows: &[usize], labels: &[usize], virtual_ids: &[usize], tau: f64) -> T {
        let t = T::from(tau);
        mean(rows.iter().zip(labels).map(|(&i, &y)| {
            let logits: Vec<T> = virtual_ids.iter().map(|&v| dot(&h[i], &h[v]) / t).collect();
            let top = logits.iter().copied().fold(logits[0], T::max);
            let mut total = T::zero();
            for &l in &logits {
                total = total + (l - top).exp();
            }
            top + total.ln() - logits[y]
        }))
    }

    pub fn scores<T: Real>(h: &[Vec<T>], edges: &[(usize, usize)]) -> Vec<T> {
        edges.iter().map(|&(i, j)| dot(&h[i], &h[j])).collect()
    }

    pub fn link_ce<T: Real>(h: &[Vec<T>], pos: &[(usize, usize)], neg: &[(usize, usize)]) -> T {
        let terms = scores(h, pos)
            .into_iter()
            .map(|s| softplus(-s))
            .chain(scores(h, neg).into_iter().map(softplus));
        mean(terms)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_is_exact() {
        let g = finite_diff_grad(|p| Ok(p[0] * p[0]), &[3.0], 1e-5).unwrap();
        assert!((g[0] - 6.0).abs() < 1e-9);
    }

    #[test]
    fn extended_differences_resolve_tiny_slopes() {
        // L = 1 + 1e-13 p: f64 rounding of L would swamp the slope
        let g = finite_diff_grad(|p| Ok(Extended::from(1.0) + Extended::from(1e-13) * Extended::from(p[0])), &[0.3], 1e-5)
            .unwrap();
        assert!((g[0] - 1e-13).abs() < 1e-22);
    }

    #[test]
    fn step_bounds() {
        assert!(finite_diff_grad(|p| Ok(p[0]), &[0.0], 1e-2).is_err());
        assert!(finite_diff_grad(|_| Ok(f64::NAN), &[0.0], 1e-5).is_err());
    }

    #[test]
    fn relative_error_floor() {
        let r = compare(&[0.0, 1.0], &[1e-10, 1.0]).unwrap();
        assert!((r.max_rel_err - 1e-2).abs() < 1e-12);
        assert_eq!(r.worst_index, 0);
    }

    #[test]
    fn size_cap() {
        let p = LayerParams::Gcn { w: DenseMatrix::zeros(1, 1), b: vec![0.0] };
        let adj = vec![vec![0.0; 65]; 65];
        assert!(dense_forward_oracle(&p, &adj, &DenseMatrix::zeros(65, 1)).is_err());
    }

    #[test]
    fn reference_losses_at_uninformative_points() {
        let ln2 = std::f64::consts::LN_2;
        assert!((reference::ff(&[2.0], &[2.0], 2.0) - 2.0 * ln2).abs() < 1e-15);
        assert!((reference::symba(&[1.0], &[1.0], 4.0) - ln2).abs() < 1e-15);
        let h = vec![vec![0.0, 0.0]; 3];
        assert!((reference::link_ce(&h, &[(0, 1)], &[(1, 2)]) - ln2).abs() < 1e-15);
        assert!((reference::contrastive(&h, &[0], &[1], &[1, 2], 1.0) - ln2).abs() < 1e-15);
    }
}
