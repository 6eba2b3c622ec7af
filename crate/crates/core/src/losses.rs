//! Layer-local objectives with exact gradients with respect to the layer
//! output.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{sigmoid, softmax_in_place, softplus, DenseMatrix};

/// Loss value with its gradient on the layer output. Rows that do not
/// take part in the loss carry zero gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct LossResult {
    pub value: f64,
    pub dh: DenseMatrix,
}

/// Loss over two score lists with per-entry derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreLoss {
    pub value: f64,
    pub d_pos: Vec<f64>,
    pub d_neg: Vec<f64>,
}

/// Objective applied to per-sample scores (node goodness or edge scores).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ScoreObjective {
    /// Binary cross-entropy on `sigmoid(score - theta)`.
    Ff { theta: f64 },
    /// Softplus of the scaled gap between paired positive and negative scores.
    Symba { alpha: f64 },
}

impl ScoreObjective {
    pub fn evaluate(self, pos: &[f64], neg: &[f64]) -> Result<ScoreLoss> {
        match self {
            ScoreObjective::Ff { theta } => ff_loss(pos, neg, theta),
            ScoreObjective::Symba { alpha } => symba_loss(pos, neg, alpha),
        }
    }
}

/// Squared L2 norm of each listed row.
pub fn goodness(h: &DenseMatrix, rows: &[usize]) -> Vec<f64> {
    rows.iter().map(|&i| h.row(i).iter().map(|v| v * v).sum()).collect()
}

/// Adds `2 h_i * d_good_i` into `dh` for each listed row.
pub fn goodness_backward(h: &DenseMatrix, rows: &[usize], d_good: &[f64], dh: &mut DenseMatrix) {
    for (&i, &g) in rows.iter().zip(d_good) {
        let src = h.row(i);
        for (d, &v) in dh.row_mut(i).iter_mut().zip(src) {
            *d += 2.0 * v * g;
        }
    }
}

/// `mean_pos softplus(theta - G) + mean_neg softplus(G - theta)`.
pub fn ff_loss(good_pos: &[f64], good_neg: &[f64], theta: f64) -> Result<ScoreLoss> {
    if good_pos.is_empty() || good_neg.is_empty() {
        return Err(Error::Empty("ff_loss sample list"));
    }
    let (np, nn) = (good_pos.len() as f64, good_neg.len() as f64);
    let mut value = 0.0;
    let mut d_pos = Vec::with_capacity(good_pos.len());
    for &g in good_pos {
        value += softplus(theta - g) / np;
        d_pos.push((sigmoid(g - theta) - 1.0) / np);
    }
    let mut d_neg = Vec::with_capacity(good_neg.len());
    for &g in good_neg {
        value += softplus(g - theta) / nn;
        d_neg.push(sigmoid(g - theta) / nn);
    }
    Ok(ScoreLoss { value, d_pos, d_neg })
}

/// `mean softplus(-alpha (G_pos - G_neg))` over aligned pairs.
pub fn symba_loss(good_pos: &[f64], good_neg: &[f64], alpha: f64) -> Result<ScoreLoss> {
    if good_pos.len() != good_neg.len() {
        return Err(Error::dims("symba_loss", good_pos.len(), good_neg.len()));
    }
    if good_pos.is_empty() {
        return Err(Error::Empty("symba_loss sample list"));
    }
    let n = good_pos.len() as f64;
    let mut value = 0.0;
    let mut d_pos = Vec::with_capacity(good_pos.len());
    let mut d_neg = Vec::with_capacity(good_neg.len());
    for (&p, &q) in good_pos.iter().zip(good_neg) {
        let z = -alpha * (p - q);
        value += softplus(z) / n;
        let d = alpha * sigmoid(z) / n;
        d_pos.push(-d);
        d_neg.push(d);
    }
    Ok(ScoreLoss { value, d_pos, d_neg })
}

/// Row-wise class distribution `softmax_k(<h_i, c_k> / tau)` where `c_k`
/// is row `virtual_ids[k]` of `h`.
pub fn class_probabilities(h: &DenseMatrix, rows: &[usize], virtual_ids: &[usize], tau: f64) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(rows.len(), virtual_ids.len());
    for (r, &i) in rows.iter().enumerate() {
        let hi = h.row(i);
        let logits = out.row_mut(r);
        for (l, &v) in logits.iter_mut().zip(virtual_ids) {
            *l = dot(hi, h.row(v)) / tau;
        }
        softmax_in_place(logits);
    }
    out
}

/// Cross-entropy of each labeled node against the class representatives
/// (virtual rows) under a dot-product critic with temperature `tau`.
/// Gradients flow into both the node rows and the representative rows.
pub fn sf_contrastive_loss(
    h: &DenseMatrix,
    labeled: &[usize],
    labels: &[usize],
    virtual_ids: &[usize],
    tau: f64,
) -> Result<LossResult> {
    let k = virtual_ids.len();
    if k < 2 {
        return Err(Error::TooFewClasses(k));
    }
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument(format!("temperature must be > 0, got {tau}")));
    }
    if labeled.is_empty() {
        return Err(Error::Empty("labeled node set"));
    }
    if labels.len() != labeled.len() {
        return Err(Error::dims("sf_contrastive_loss labels", labeled.len(), labels.len()));
    }
    for &i in labeled.iter().chain(virtual_ids) {
        if i >= h.rows() {
            return Err(Error::NodeOutOfRange { id: i, num_nodes: h.rows() });
        }
    }
    if let Some(&y) = labels.iter().find(|&&y| y >= k) {
        return Err(Error::InvalidArgument(format!("label {y} out of range for {k} classes")));
    }
    let probs = class_probabilities(h, labeled, virtual_ids, tau);
    let n = labeled.len() as f64;
    let mut value = 0.0;
    let mut dh = DenseMatrix::zeros(h.rows(), h.cols());
    for (r, (&i, &y)) in labeled.iter().zip(labels).enumerate() {
        let p = probs.row(r);
        value -= p[y].max(f64::MIN_POSITIVE).ln() / n;
        for (c, &v) in virtual_ids.iter().enumerate() {
            let dl = (p[c] - if c == y { 1.0 } else { 0.0 }) / (n * tau);
            if dl == 0.0 {
                continue;
            }
            axpy(&mut dh, i, dl, h.row(v));
            axpy(&mut dh, v, dl, h.row(i));
        }
    }
    Ok(LossResult { value, dh })
}

/// Dot-product score `<h_i, h_j>` for every pair.
pub fn link_scores(h: &DenseMatrix, edges: &[(usize, usize)]) -> Result<Vec<f64>> {
    edges
        .iter()
        .map(|&(i, j)| {
            for id in [i, j] {
                if id >= h.rows() {
                    return Err(Error::NodeOutOfRange { id, num_nodes: h.rows() });
                }
            }
            Ok(dot(h.row(i), h.row(j)))
        })
        .collect()
}

/// Objective of a link-prediction layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum LinkObjective {
    /// Binary cross-entropy of `sigmoid(s)` against 1 (pos) / 0 (neg),
    /// averaged over all edges.
    Ce,
    /// Edge score used as goodness in the FF loss.
    Ff { theta: f64 },
    /// Paired gap loss on `(pos[i], neg[i])`.
    Symba { alpha: f64 },
}

pub fn link_local_loss(
    h: &DenseMatrix,
    pos: &[(usize, usize)],
    neg: &[(usize, usize)],
    objective: LinkObjective,
) -> Result<LossResult> {
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::Empty("link edge list"));
    }
    let s_pos = link_scores(h, pos)?;
    let s_neg = link_scores(h, neg)?;
    let loss = match objective {
        LinkObjective::Ce => {
            let n = (pos.len() + neg.len()) as f64;
            let mut value = 0.0;
            let d_pos = s_pos
                .iter()
                .map(|&s| {
                    value += softplus(-s) / n;
                    (sigmoid(s) - 1.0) / n
                })
                .collect();
            let d_neg = s_neg
                .iter()
                .map(|&s| {
                    value += softplus(s) / n;
                    sigmoid(s) / n
                })
                .collect();
            ScoreLoss { value, d_pos, d_neg }
        }
        LinkObjective::Ff { theta } => ff_loss(&s_pos, &s_neg, theta)?,
        LinkObjective::Symba { alpha } => symba_loss(&s_pos, &s_neg, alpha)?,
    };
    let mut dh = DenseMatrix::zeros(h.rows(), h.cols());
    for (edges, ds) in [(pos, &loss.d_pos), (neg, &loss.d_neg)] {
        for (&(i, j), &d) in edges.iter().zip(ds.iter()) {
            axpy(&mut dh, i, d, h.row(j));
            axpy(&mut dh, j, d, h.row(i));
        }
    }
    Ok(LossResult { value: loss.value, dh })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(m: &mut DenseMatrix, row: usize, a: f64, x: &[f64]) {
    for (d, &v) in m.row_mut(row).iter_mut().zip(x) {
        *d += a * v;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    #[test]
    fn goodness_values() {
        let h = DenseMatrix::from_rows(&[vec![1.0, 2.0, 2.0], vec![0.0, 0.0, 0.0]]).unwrap();
        assert_eq!(goodness(&h, &[0, 1]), vec![9.0, 0.0]);
    }

    #[test]
    fn ff_reference_points() {
        let l = ff_loss(&[2.0], &[2.0], 2.0).unwrap();
        assert!((l.value - 2.0 * LN_2).abs() < 1e-15);
        let l = ff_loss(&[1e6], &[0.0], 2.0).unwrap();
        assert!((l.value - softplus(-2.0)).abs() < 1e-12);
        assert!((softplus(-2.0) - 0.126_928_011_042_972_5).abs() < 1e-15);
        assert!(ff_loss(&[], &[1.0], 2.0).is_err());
    }

    #[test]
    fn symba_reference_points() {
        assert!((symba_loss(&[3.0], &[3.0], 4.0).unwrap().value - LN_2).abs() < 1e-15);
        assert!(symba_loss(&[1e3], &[0.0], 4.0).unwrap().value < 1e-300);
        assert!(symba_loss(&[1.0], &[1.0, 2.0], 4.0).is_err());
    }

    #[test]
    fn contrastive_uniform() {
        let h = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 1.0]]).unwrap();
        // node 0 is orthogonal to both representatives
        let l = sf_contrastive_loss(&h, &[0], &[1], &[1, 2], 1.0).unwrap();
        assert!((l.value - LN_2).abs() < 1e-15);
        assert!(sf_contrastive_loss(&h, &[], &[], &[1, 2], 1.0).is_err());
        assert!(sf_contrastive_loss(&h, &[0], &[0], &[1], 1.0).is_err());
    }

    #[test]
    fn link_reference_points() {
        let h = DenseMatrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let s = link_scores(&h, &[(0, 1), (0, 2)]).unwrap();
        assert_eq!(s, vec![1.0, 0.0]);
        assert!((sigmoid(s[0]) - 0.731_058_578_630_004_9).abs() < 1e-15);

        let z = DenseMatrix::zeros(3, 2);
        let ce = link_local_loss(&z, &[(0, 1)], &[(0, 2)], LinkObjective::Ce).unwrap();
        assert!((ce.value - LN_2).abs() < 1e-15);

        let t = DenseMatrix::from_rows(&vec![vec![2.0f64.sqrt(), 0.0]; 3]).unwrap();
        let ff = link_local_loss(&t, &[(0, 1)], &[(1, 2)], LinkObjective::Ff { theta: 2.0 }).unwrap();
        assert!((ff.value - 2.0 * LN_2).abs() < 1e-12);
        assert!(link_local_loss(&t, &[], &[(1, 2)], LinkObjective::Ce).is_err());
    }

    #[test]
    fn untouched_rows_have_zero_gradient() {
        let h = DenseMatrix::from_rows(&[vec![1.0, 0.5], vec![0.3, 1.0], vec![0.2, 0.1], vec![9.0, 9.0]]).unwrap();
        let l = link_local_loss(&h, &[(0, 1)], &[(1, 2)], LinkObjective::Ce).unwrap();
        assert_eq!(l.dh.row(3), &[0.0, 0.0]);
    }
}
