use crate::error::{Error, Result};

/// Fraction of `mask` nodes whose prediction equals the true label.
/// Unlabeled nodes count as incorrect.
pub fn accuracy(pred: &[usize], truth: &[Option<usize>], mask: &[usize]) -> Result<f64> {
    if mask.is_empty() {
        return Err(Error::Empty("accuracy mask"));
    }
    let mut correct = 0usize;
    for &i in mask {
        let (p, t) = match (pred.get(i), truth.get(i)) {
            (Some(&p), Some(&t)) => (p, t),
            _ => {
                return Err(Error::NodeOutOfRange {
                    id: i,
                    num_nodes: pred.len().min(truth.len()),
                })
            }
        };
        if t == Some(p) {
            correct += 1;
        }
    }
    Ok(correct as f64 / mask.len() as f64)
}

/// Area under the ROC curve by the Mann-Whitney rank statistic, with tied
/// scores sharing their average rank.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::dims("roc_auc", scores.len(), labels.len()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite("roc_auc scores"));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::InvalidArgument("roc_auc needs both positive and negative samples".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum_pos = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // ranks start..end (0-based) share (start + 1 + end) / 2
        let avg_rank = (start + 1 + end) as f64 / 2.0;
        for &k in &order[start..end] {
            if labels[k] {
                rank_sum_pos += avg_rank;
            }
        }
        start = end;
    }
    let (p, q) = (n_pos as f64, n_neg as f64);
    Ok((rank_sum_pos - p * (p + 1.0) / 2.0) / (p * q))
}

/// Index of the largest entry; ties go to the smallest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = k;
        }
    }
    best
}
