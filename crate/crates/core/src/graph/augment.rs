use serde::{Deserialize, Serialize};

use super::nodes::{incorrect_class, NodeTable};
use super::Graph;
use crate::error::{Error, Result};
use crate::kernel::DenseMatrix;

/// Which class each training node is linked to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Polarity {
    /// Link to the virtual node of the node's own class.
    Positive,
    /// Link to the `j`-th incorrect class in ascending order.
    Negative(usize),
}

/// Direction of real/virtual links.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VirtualEdges {
    /// Messages flow both ways between a real node and its virtual node.
    #[default]
    Bidirectional,
    /// Only real -> virtual; the virtual node never sends back.
    Unidirectional,
}

/// Input features given to the virtual vertices by the trainers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VirtualFeatures {
    /// Mean features of the labeled training nodes of the vertex's class,
    /// identical in every augmented graph.
    #[default]
    ClassMean,
    Zero,
}

/// `K x F` features of the virtual vertices under `mode`. Classes without
/// labeled training nodes get zero rows.
pub fn virtual_node_features(nt: &NodeTable, mode: VirtualFeatures) -> DenseMatrix {
    let (k, f) = (nt.num_classes(), nt.feature_dim());
    let mut out = DenseMatrix::zeros(k, f);
    if mode == VirtualFeatures::Zero {
        return out;
    }
    let mut counts = vec![0usize; k];
    for i in nt.train_labeled() {
        let c = nt.label(i).expect("train_labeled yields labeled nodes");
        counts[c] += 1;
        for (o, &x) in out.row_mut(c).iter_mut().zip(nt.features().row(i)) {
            *o += x;
        }
    }
    for (c, &n) in counts.iter().enumerate() {
        if n > 0 {
            out.row_mut(c).iter_mut().for_each(|v| *v /= n as f64);
        }
    }
    out
}

/// A graph extended with one virtual vertex per class.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedGraph {
    pub graph: Graph,
    /// Vertex id of the virtual node standing for each class.
    pub virtual_of_class: Vec<usize>,
    pub polarity: Polarity,
    /// `(N+K) x F`; virtual rows are zero.
    pub features: DenseMatrix,
    pub num_real: usize,
    pub direction: VirtualEdges,
}

/// Appends `K` virtual vertices (ids `N..N+K`) and links every labeled
/// training node to the virtual vertex selected by `polarity`.
pub fn augment_virtual_nodes(
    g: &Graph,
    nt: &NodeTable,
    polarity: Polarity,
    direction: VirtualEdges,
) -> Result<AugmentedGraph> {
    let k = nt.num_classes();
    if k < 2 {
        return Err(Error::TooFewClasses(k));
    }
    if g.is_directed() {
        return Err(Error::InvalidArgument("virtual-node augmentation needs an undirected graph".into()));
    }
    let n = g.num_nodes();
    if nt.num_nodes() != n {
        return Err(Error::dims("augment_virtual_nodes", n, nt.num_nodes()));
    }
    if let Polarity::Negative(j) = polarity {
        if j >= k - 1 {
            return Err(Error::InvalidArgument(format!("negative variant {j} >= K-1 = {}", k - 1)));
        }
    }
    let train = nt.train_labeled();
    if train.is_empty() {
        return Err(Error::NoLabeledTrainingNodes);
    }

    let mut lists: Vec<Vec<usize>> = (0..n).map(|i| g.neighbors(i).to_vec()).collect();
    lists.resize(n + k, Vec::new());
    for &i in &train {
        let y = nt.label(i).expect("train_labeled yields labeled nodes");
        let class = match polarity {
            Polarity::Positive => y,
            Polarity::Negative(j) => incorrect_class(y, j),
        };
        let v = n + class;
        lists[v].push(i);
        if direction == VirtualEdges::Bidirectional {
            lists[i].push(v);
        }
    }
    for list in &mut lists {
        list.sort_unstable();
    }
    let directed = direction == VirtualEdges::Unidirectional;
    let graph = Graph::from_lists(lists, directed);

    let mut features = DenseMatrix::zeros(n + k, nt.feature_dim());
    for i in 0..n {
        features.row_mut(i).copy_from_slice(nt.features().row(i));
    }
    Ok(AugmentedGraph {
        graph,
        virtual_of_class: (n..n + k).collect(),
        polarity,
        features,
        num_real: n,
        direction,
    })
}

impl AugmentedGraph {
    /// `features` with the virtual rows replaced according to `mode`.
    pub fn input_features(&self, nt: &NodeTable, mode: VirtualFeatures) -> DenseMatrix {
        let mut x = self.features.clone();
        let virt = virtual_node_features(nt, mode);
        for (c, &v) in self.virtual_of_class.iter().enumerate() {
            x.row_mut(v).copy_from_slice(virt.row(c));
        }
        x
    }

    pub fn num_classes(&self) -> usize {
        self.virtual_of_class.len()
    }

    /// All `K-1` negative variants, in enumeration order.
    pub fn negatives(g: &Graph, nt: &NodeTable, direction: VirtualEdges) -> Result<Vec<AugmentedGraph>> {
        (0..nt.num_classes().saturating_sub(1))
            .map(|j| augment_virtual_nodes(g, nt, Polarity::Negative(j), direction))
            .collect()
    }

    /// The augmented graph with `targets` additionally receiving messages
    /// from the virtual node of `class`. The virtual node does not receive
    /// from the targets, so its in-neighborhood matches training time.
    pub fn with_query_links(&self, targets: &[usize], class: usize) -> Result<Graph> {
        let v = *self
            .virtual_of_class
            .get(class)
            .ok_or_else(|| Error::InvalidArgument(format!("query class {class} out of range")))?;
        let n = self.graph.num_nodes();
        let mut lists: Vec<Vec<usize>> = (0..n).map(|i| self.graph.neighbors(i).to_vec()).collect();
        for &t in targets {
            if t >= self.num_real {
                return Err(Error::NodeOutOfRange { id: t, num_nodes: self.num_real });
            }
            if let Err(pos) = lists[t].binary_search(&v) {
                lists[t].insert(pos, v);
            }
        }
        Ok(Graph::from_lists(lists, true))
    }
}
