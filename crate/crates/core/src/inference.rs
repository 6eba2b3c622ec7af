//! Multi-layer prediction rules, plus the input streams shared with the
//! trainers so that validation during training and later prediction see the
//! same graphs and features.

use crate::error::{Error, Result};
use crate::eval::argmax;
use crate::graph::{
    append_label_features, augment_virtual_nodes, AugmentedGraph, Graph, LabelMode, NodeTable, Polarity,
};
use crate::kernel::{row_l2_normalize, sigmoid, DenseMatrix};
use crate::layers::{layer_forward, layer_output, Architecture, ForwardCache, LayerParams, Propagation};
use crate::losses::{class_probabilities, goodness, link_scores};
use crate::train::{Method, Task, TrainConfig, TrainedModel};

/// Per-class scores of a set of nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct NodePrediction {
    pub nodes: Vec<usize>,
    /// `nodes.len() x K`: accumulated goodness (FF) or averaged probabilities (SF).
    pub scores: DenseMatrix,
    pub labels: Vec<usize>,
}

/// Link probabilities averaged over layers.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkPrediction {
    pub edges: Vec<(usize, usize)>,
    pub probabilities: Vec<f64>,
}

/// A propagation operator with the features entering the current layer.
#[derive(Debug, Clone)]
pub(crate) struct Stream {
    pub prop: Propagation,
    pub h: DenseMatrix,
}

impl Stream {
    pub fn new(arch: Architecture, g: &Graph, h: DenseMatrix) -> Result<Self> {
        Ok(Stream {
            prop: Propagation::prepare(arch, g)?,
            h,
        })
    }
}

/// Positive, negative and query inputs of the goodness-based methods.
pub(crate) struct FfInputs {
    pub arch: Architecture,
    pub pos: Stream,
    pub negs: Vec<Stream>,
    augmented: Option<AugmentedGraph>,
}

impl FfInputs {
    /// `nt` must already hide non-training labels.
    pub fn build(cfg: &TrainConfig, g: &Graph, nt: &NodeTable) -> Result<Self> {
        let (method, arch, direction) = (cfg.method, cfg.model, cfg.virtual_edges);
        let k = nt.num_classes();
        if k < 2 {
            return Err(Error::TooFewClasses(k));
        }
        match method {
            Method::FfVn | Method::FfSymba => {
                let mut pos = augment_virtual_nodes(g, nt, Polarity::Positive, direction)?;
                pos.features = pos.input_features(nt, cfg.virtual_features);
                let negs = AugmentedGraph::negatives(g, nt, direction)?
                    .into_iter()
                    .map(|a| Stream::new(arch, &a.graph, pos.features.clone()))
                    .collect::<Result<_>>()?;
                Ok(FfInputs {
                    arch,
                    pos: Stream::new(arch, &pos.graph, pos.features.clone())?,
                    negs,
                    augmented: Some(pos),
                })
            }
            Method::FfLa => {
                if nt.train_labeled().is_empty() {
                    return Err(Error::NoLabeledTrainingNodes);
                }
                let prop = Propagation::prepare(arch, g)?;
                let negs = (0..k - 1)
                    .map(|j| {
                        Ok(Stream {
                            prop: prop.clone(),
                            h: append_label_features(nt, LabelMode::Negative(j))?,
                        })
                    })
                    .collect::<Result<_>>()?;
                Ok(FfInputs {
                    arch,
                    pos: Stream {
                        prop,
                        h: append_label_features(nt, LabelMode::Positive)?,
                    },
                    negs,
                    augmented: None,
                })
            }
            other => Err(Error::MethodMismatch {
                method: other.to_string(),
                context: "goodness-based node classification".into(),
            }),
        }
    }

    pub fn num_classes(&self) -> usize {
        self.negs.len() + 1
    }

    /// One input per candidate class `l`: the targets are linked to the
    /// virtual node of `l`, or carry one-hot `l` in their label columns.
    pub fn queries(&self, targets: &[usize]) -> Result<Vec<Stream>> {
        let k = self.num_classes();
        (0..k)
            .map(|l| match &self.augmented {
                Some(aug) => Stream::new(self.arch, &aug.with_query_links(targets, l)?, aug.features.clone()),
                None => {
                    let mut h = self.pos.h.clone();
                    let f = h.cols() - k;
                    for &t in targets {
                        if t >= h.rows() {
                            return Err(Error::NodeOutOfRange { id: t, num_nodes: h.rows() });
                        }
                        let row = &mut h.row_mut(t)[f..];
                        row.fill(0.0);
                        row[l] = 1.0;
                    }
                    Ok(Stream {
                        prop: self.pos.prop.clone(),
                        h,
                    })
                }
            })
            .collect()
    }
}

/// The positively augmented graph used by all single-forward methods.
pub(crate) struct SfInputs {
    pub stream: Stream,
    pub virtual_ids: Vec<usize>,
    /// `(N+K) x K`: one-hot labels of training nodes, uniform elsewhere.
    pub context: DenseMatrix,
}

impl SfInputs {
    pub fn build(cfg: &TrainConfig, g: &Graph, nt: &NodeTable) -> Result<Self> {
        let aug = augment_virtual_nodes(g, nt, Polarity::Positive, cfg.virtual_edges)?;
        let k = nt.num_classes();
        let mut context = DenseMatrix::filled(aug.graph.num_nodes(), k, 1.0 / k as f64);
        for i in nt.train_labeled() {
            let row = context.row_mut(i);
            row.fill(0.0);
            row[nt.label(i).expect("labeled")] = 1.0;
        }
        Ok(SfInputs {
            stream: Stream::new(cfg.model, &aug.graph, aug.input_features(nt, cfg.virtual_features))?,
            virtual_ids: aug.virtual_of_class.clone(),
            context,
        })
    }
}

/// Activities of one pass through a top-down stack.
pub(crate) struct TopDownPass {
    pub outputs: Vec<DenseMatrix>,
    pub caches: Vec<ForwardCache>,
    /// What the contrastive critic sees at each layer.
    pub embeddings: Vec<DenseMatrix>,
    pub input_bytes: usize,
}

/// Runs every layer once. Layer `l` merges its bottom-up input with the
/// previous-step outputs in `store`; nothing flows back through the merge.
pub(crate) fn topdown_forward(
    method: Method,
    inputs: &SfInputs,
    layers: &[LayerParams],
    store: &[DenseMatrix],
) -> Result<TopDownPass> {
    let depth = layers.len();
    if store.len() != depth {
        return Err(Error::dims("top-down store", depth, store.len()));
    }
    let mut pass = TopDownPass {
        outputs: Vec::with_capacity(depth),
        caches: Vec::with_capacity(depth),
        embeddings: Vec::with_capacity(depth),
        input_bytes: 0,
    };
    for (l, p) in layers.iter().enumerate() {
        let below = if l == 0 { &inputs.stream.h } else { &pass.outputs[l - 1] };
        let (out, cache) = match method {
            Method::SfTopInput => {
                let top = if l + 1 < depth { &store[l + 1] } else { &inputs.context };
                let x = DenseMatrix::hconcat(&[below, top])?;
                pass.input_bytes += x.byte_size();
                layer_forward(&inputs.stream.prop, &x, p)?
            }
            Method::SfTopLoss => layer_forward(&inputs.stream.prop, below, p)?,
            other => {
                return Err(Error::MethodMismatch {
                    method: other.to_string(),
                    context: "top-down forward".into(),
                })
            }
        };
        let embedding = if method == Method::SfTopLoss && l + 1 < depth {
            let mut upper = store[l + 1].clone();
            for s in &store[l + 2..] {
                upper.add_assign(s)?;
            }
            upper.scale(1.0 / (depth - l - 1) as f64);
            DenseMatrix::hconcat(&[&out, &upper])?
        } else {
            out.clone()
        };
        pass.outputs.push(out);
        pass.caches.push(cache);
        pass.embeddings.push(embedding);
    }
    Ok(pass)
}

fn node_prediction(nodes: &[usize], scores: DenseMatrix) -> NodePrediction {
    let labels = (0..scores.rows()).map(|r| argmax(scores.row(r))).collect();
    NodePrediction {
        nodes: nodes.to_vec(),
        scores,
        labels,
    }
}

fn check_targets(targets: &[usize], n: usize) -> Result<()> {
    if let Some(&id) = targets.iter().find(|&&t| t >= n) {
        return Err(Error::NodeOutOfRange { id, num_nodes: n });
    }
    Ok(())
}

/// For every candidate class, runs all layers on the query input and sums
/// the goodness of the target rows; predicts the class with the largest total.
pub fn predict_ff(model: &TrainedModel, g: &Graph, nt: &NodeTable, targets: &[usize]) -> Result<NodePrediction> {
    let method = model.method();
    if !method.is_ff() {
        return Err(Error::MethodMismatch {
            method: method.to_string(),
            context: "goodness accumulation".into(),
        });
    }
    check_targets(targets, nt.num_nodes())?;
    let inputs = FfInputs::build(&model.config, g, &nt.training_view())?;
    let queries = inputs.queries(targets)?;
    let mut scores = DenseMatrix::zeros(targets.len(), queries.len());
    for (l, q) in queries.iter().enumerate() {
        let mut h = q.h.clone();
        for (depth, p) in model.layers.iter().enumerate() {
            let out = layer_output(&q.prop, &h, p)?;
            for (r, gv) in goodness(&out, targets).into_iter().enumerate() {
                scores.set(r, l, scores.get(r, l) + gv);
            }
            if depth + 1 < model.layers.len() {
                h = row_l2_normalize(&out);
            }
        }
    }
    Ok(node_prediction(targets, scores))
}

/// Runs the stack once over the positively augmented graph and averages the
/// per-layer class distributions of the targets.
pub fn predict_sf(model: &TrainedModel, g: &Graph, nt: &NodeTable, targets: &[usize]) -> Result<NodePrediction> {
    let method = model.method();
    if !method.is_sf() {
        return Err(Error::MethodMismatch {
            method: method.to_string(),
            context: "probability averaging".into(),
        });
    }
    check_targets(targets, nt.num_nodes())?;
    let cfg = &model.config;
    let inputs = SfInputs::build(cfg, g, &nt.training_view())?;
    let embeddings = if method.is_top_down() {
        let store = model
            .top_down_store
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("top-down model without a previous-step store".into()))?;
        topdown_forward(method, &inputs, &model.layers, store)?.embeddings
    } else {
        let mut h = inputs.stream.h.clone();
        let mut out = Vec::with_capacity(model.layers.len());
        for p in &model.layers {
            let e = layer_output(&inputs.stream.prop, &h, p)?;
            h = if cfg.sf_normalize { row_l2_normalize(&e) } else { e.clone() };
            out.push(e);
        }
        out
    };
    let mut scores = DenseMatrix::zeros(targets.len(), inputs.virtual_ids.len());
    for e in &embeddings {
        scores.add_assign(&class_probabilities(e, targets, &inputs.virtual_ids, cfg.tau))?;
    }
    scores.scale(1.0 / embeddings.len() as f64);
    Ok(node_prediction(targets, scores))
}

/// Mean over layers of `sigmoid(<h_i, h_j>)` on the message-passing graph.
pub fn predict_links(
    model: &TrainedModel,
    g_message: &Graph,
    x: &DenseMatrix,
    edges: &[(usize, usize)],
) -> Result<LinkPrediction> {
    if model.config.task != Task::LinkPred {
        return Err(Error::MethodMismatch {
            method: model.method().to_string(),
            context: "link prediction".into(),
        });
    }
    if x.rows() != g_message.num_nodes() {
        return Err(Error::dims("predict_links features", g_message.num_nodes(), x.rows()));
    }
    let prop = Propagation::prepare(model.architecture(), g_message)?;
    let mut h = x.clone();
    let mut probabilities = vec![0.0; edges.len()];
    for p in &model.layers {
        h = layer_output(&prop, &h, p)?;
        for (acc, s) in probabilities.iter_mut().zip(link_scores(&h, edges)?) {
            *acc += sigmoid(s);
        }
    }
    let depth = model.layers.len() as f64;
    probabilities.iter_mut().for_each(|p| *p /= depth);
    Ok(LinkPrediction {
        edges: edges.to_vec(),
        probabilities,
    })
}

/// Dispatches to the prediction rule of the model's method.
pub fn predict_nodes(model: &TrainedModel, g: &Graph, nt: &NodeTable, targets: &[usize]) -> Result<NodePrediction> {
    if model.method().is_ff() {
        predict_ff(model, g, nt, targets)
    } else {
        predict_sf(model, g, nt, targets)
    }
}

/// Goodness of every labeled training node summed over layers, on the
/// positive input and averaged over the negative inputs.
pub fn ff_training_goodness(model: &TrainedModel, g: &Graph, nt: &NodeTable) -> Result<(Vec<f64>, Vec<f64>)> {
    let method = model.method();
    if !method.is_ff() {
        return Err(Error::MethodMismatch {
            method: method.to_string(),
            context: "goodness accumulation".into(),
        });
    }
    let visible = nt.training_view();
    let rows = visible.train_labeled();
    let inputs = FfInputs::build(&model.config, g, &visible)?;
    let mut pos = vec![0.0; rows.len()];
    let mut neg = vec![0.0; rows.len()];
    let n_neg = inputs.negs.len() as f64;
    let run = |s: &Stream, acc: &mut [f64], w: f64| -> Result<()> {
        let mut h = s.h.clone();
        for (depth, p) in model.layers.iter().enumerate() {
            let out = layer_output(&s.prop, &h, p)?;
            for (a, gv) in acc.iter_mut().zip(goodness(&out, &rows)) {
                *a += w * gv;
            }
            if depth + 1 < model.layers.len() {
                h = row_l2_normalize(&out);
            }
        }
        Ok(())
    };
    run(&inputs.pos, &mut pos, 1.0)?;
    for s in &inputs.negs {
        run(s, &mut neg, 1.0 / n_neg)?;
    }
    Ok((pos, neg))
}
