use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::DenseMatrix;

/// Per-node membership in the train/validation/test protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
    Unassigned,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
            Split::Unassigned => "none",
        }
    }
}

/// Train/validation/test proportions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 0.64,
            val: 0.16,
            test: 0.20,
        }
    }
}

impl SplitRatios {
    pub fn new(train: f64, val: f64, test: f64) -> Result<Self> {
        let r = SplitRatios { train, val, test };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|&p| !(p > 0.0) || !p.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "split ratios must be positive, got {parts:?}"
            )));
        }
        if (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "split ratios must sum to 1, got {parts:?}"
            )));
        }
        Ok(())
    }

    /// Floor the validation and test shares; training absorbs the remainder.
    pub fn counts(&self, n: usize) -> (usize, usize, usize) {
        // the epsilon guards products like 0.29 * 100 = 28.999999999999996
        let share = |r: f64| ((n as f64) * r + 1e-9).floor() as usize;
        let val = share(self.val).min(n);
        let test = share(self.test).min(n - val);
        (n - val - test, val, test)
    }
}

/// Randomly assigns `n` nodes to train/val/test.
pub fn split_nodes<R: Rng + ?Sized>(n: usize, ratios: SplitRatios, rng: &mut R) -> Result<Vec<Split>> {
    if n == 0 {
        return Err(Error::Empty("node split over zero nodes"));
    }
    ratios.validate()?;
    let (train, val, _) = ratios.counts(n);
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let mut out = vec![Split::Test; n];
    for (rank, &node) in perm.iter().enumerate() {
        out[node] = if rank < train {
            Split::Train
        } else if rank < train + val {
            Split::Val
        } else {
            Split::Test
        };
    }
    Ok(out)
}

/// Node features, optional labels, class count and split assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeTable {
    features: DenseMatrix,
    labels: Vec<Option<usize>>,
    num_classes: usize,
    split: Vec<Split>,
}

impl NodeTable {
    pub fn new(features: DenseMatrix, labels: Vec<Option<usize>>, num_classes: usize) -> Result<Self> {
        let n = features.rows();
        if labels.len() != n {
            return Err(Error::dims("NodeTable::new labels", n, labels.len()));
        }
        if let Some(&bad) = labels.iter().flatten().find(|&&l| l >= num_classes) {
            return Err(Error::InvalidArgument(format!(
                "label {bad} is not below the class count {num_classes}"
            )));
        }
        Ok(NodeTable {
            features,
            labels,
            num_classes,
            split: vec![Split::Unassigned; n],
        })
    }

    pub fn with_split(mut self, split: Vec<Split>) -> Result<Self> {
        if split.len() != self.num_nodes() {
            return Err(Error::dims("NodeTable::with_split", self.num_nodes(), split.len()));
        }
        self.split = split;
        Ok(self)
    }

    pub fn num_nodes(&self) -> usize {
        self.features.rows()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.cols()
    }

    pub fn features(&self) -> &DenseMatrix {
        &self.features
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> Option<usize> {
        self.labels[i]
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn split(&self) -> &[Split] {
        &self.split
    }

    pub fn has_split(&self) -> bool {
        self.split.iter().any(|&s| s != Split::Unassigned)
    }

    pub fn nodes_in(&self, which: Split) -> Vec<usize> {
        (0..self.num_nodes()).filter(|&i| self.split[i] == which).collect()
    }

    /// Nodes tagged `train` that carry a label.
    pub fn train_labeled(&self) -> Vec<usize> {
        (0..self.num_nodes())
            .filter(|&i| self.split[i] == Split::Train && self.labels[i].is_some())
            .collect()
    }

    pub fn has_labels(&self) -> bool {
        self.labels.iter().any(Option::is_some)
    }

    /// Copy where only training labels remain visible; what a trainer may see.
    pub fn training_view(&self) -> NodeTable {
        let labels = self
            .labels
            .iter()
            .zip(&self.split)
            .map(|(&l, &s)| if s == Split::Train { l } else { None })
            .collect();
        NodeTable {
            features: self.features.clone(),
            labels,
            num_classes: self.num_classes,
            split: self.split.clone(),
        }
    }
}

/// How class information is written into the appended label columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelMode {
    /// Correct one-hot for labeled nodes, uniform for unlabeled ones.
    Positive,
    /// The `j`-th incorrect class (ascending order) for labeled nodes.
    Negative(usize),
    /// One-hot `l` on every node.
    Query(usize),
    /// `1/K` everywhere.
    Uniform,
}

/// The `j`-th element of the ascending list of classes other than `label`.
pub(crate) fn incorrect_class(label: usize, j: usize) -> usize {
    if j < label {
        j
    } else {
        j + 1
    }
}

/// Returns the `N x (F+K)` matrix `[x_i || e_i]` for the given label mode.
pub fn append_label_features(nt: &NodeTable, mode: LabelMode) -> Result<DenseMatrix> {
    let k = nt.num_classes();
    if k < 2 {
        return Err(Error::TooFewClasses(k));
    }
    match mode {
        LabelMode::Query(l) if l >= k => {
            return Err(Error::InvalidArgument(format!("query label {l} >= K = {k}")))
        }
        LabelMode::Negative(j) if j >= k - 1 => {
            return Err(Error::InvalidArgument(format!(
                "negative variant {j} >= K-1 = {}",
                k - 1
            )))
        }
        _ => {}
    }
    let f = nt.feature_dim();
    let mut out = DenseMatrix::zeros(nt.num_nodes(), f + k);
    let uniform = 1.0 / k as f64;
    for i in 0..nt.num_nodes() {
        let row = out.row_mut(i);
        row[..f].copy_from_slice(nt.features().row(i));
        let hot = match (mode, nt.label(i)) {
            (LabelMode::Positive, Some(y)) => Some(y),
            (LabelMode::Negative(j), Some(y)) => Some(incorrect_class(y, j)),
            (LabelMode::Query(l), _) => Some(l),
            _ => None,
        };
        match hot {
            Some(c) => row[f + c] = 1.0,
            None => row[f..].fill(uniform),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn table(label: Option<usize>) -> NodeTable {
        NodeTable::new(DenseMatrix::from_rows(&[vec![0.5]]).unwrap(), vec![label], 3).unwrap()
    }

    fn counts(s: &[Split]) -> (usize, usize, usize) {
        let c = |t| s.iter().filter(|&&x| x == t).count();
        (c(Split::Train), c(Split::Val), c(Split::Test))
    }

    #[test]
    fn split_counts_hundred() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = split_nodes(100, SplitRatios::default(), &mut rng).unwrap();
        assert_eq!(counts(&s), (64, 16, 20));
    }

    #[test]
    fn split_counts_rounding_to_train() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = split_nodes(5, SplitRatios::default(), &mut rng).unwrap();
        assert_eq!(counts(&s), (4, 0, 1));
    }

    #[test]
    fn split_is_deterministic() {
        let a = split_nodes(50, SplitRatios::default(), &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = split_nodes(50, SplitRatios::default(), &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn split_rejects_bad_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(split_nodes(0, SplitRatios::default(), &mut rng).is_err());
        assert!(SplitRatios::new(0.5, 0.5, 0.1).is_err());
        assert!(SplitRatios::new(1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn label_append_modes() {
        let pos = append_label_features(&table(Some(1)), LabelMode::Positive).unwrap();
        assert_eq!(pos.row(0), &[0.5, 0.0, 1.0, 0.0]);
        let unl = append_label_features(&table(None), LabelMode::Positive).unwrap();
        assert_eq!(unl.row(0), &[0.5, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]);
        let neg = append_label_features(&table(Some(1)), LabelMode::Negative(0)).unwrap();
        assert_eq!(neg.row(0), &[0.5, 1.0, 0.0, 0.0]);
        let neg1 = append_label_features(&table(Some(1)), LabelMode::Negative(1)).unwrap();
        assert_eq!(neg1.row(0), &[0.5, 0.0, 0.0, 1.0]);
        let q = append_label_features(&table(None), LabelMode::Query(2)).unwrap();
        assert_eq!(q.row(0), &[0.5, 0.0, 0.0, 1.0]);
        let u = append_label_features(&table(Some(0)), LabelMode::Uniform).unwrap();
        assert_eq!(u.row(0), &[0.5, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]);
    }

    #[test]
    fn label_append_errors() {
        assert!(append_label_features(&table(Some(1)), LabelMode::Query(3)).is_err());
        assert!(append_label_features(&table(Some(1)), LabelMode::Negative(2)).is_err());
        let one_class =
            NodeTable::new(DenseMatrix::from_rows(&[vec![0.5]]).unwrap(), vec![Some(0)], 1).unwrap();
        assert!(matches!(
            append_label_features(&one_class, LabelMode::Positive),
            Err(Error::TooFewClasses(1))
        ));
    }

    #[test]
    fn training_view_hides_other_labels() {
        let nt = NodeTable::new(DenseMatrix::zeros(3, 1), vec![Some(0), Some(1), Some(1)], 2)
            .unwrap()
            .with_split(vec![Split::Train, Split::Val, Split::Test])
            .unwrap();
        assert_eq!(nt.training_view().labels(), &[Some(0), None, None]);
        assert_eq!(nt.train_labeled(), vec![0]);
    }

    #[test]
    fn incorrect_class_enumeration() {
        let all: Vec<usize> = (0..3).map(|j| incorrect_class(2, j)).collect();
        assert_eq!(all, vec![0, 1, 3]);
        let all: Vec<usize> = (0..3).map(|j| incorrect_class(0, j)).collect();
        assert_eq!(all, vec![1, 2, 3]);
    }
}
