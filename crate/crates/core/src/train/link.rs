use std::time::Instant;

use super::{
    build_report, check_method, fit_layer, init_layer, mem_key, track, MemoryCategory, MemoryLedger, NoopObserver,
    ReportParts, StepOutput, TrainConfig, TrainObserver, TrainedModel,
};
use crate::error::{Error, Result};
use crate::eval::{roc_auc, TrainReport};
use crate::graph::{EdgeSplit, Graph, NodeTable};
use crate::inference::{predict_links, Stream};
use crate::kernel::sigmoid;
use crate::layers::{layer_backward, layer_forward, layer_output, LayerParams};
use crate::losses::{link_local_loss, link_scores, LinkObjective};
use crate::train::Method;

pub fn train_linkpred(
    cfg: &TrainConfig,
    g: &Graph,
    split: &EdgeSplit,
    nt: &NodeTable,
) -> Result<(TrainedModel, TrainReport)> {
    train_linkpred_observed(cfg, g, split, nt, &mut NoopObserver)
}

/// Positive then negative pairs with their binary labels.
pub(crate) fn labeled_pairs(pos: &[(usize, usize)], neg: &[(usize, usize)]) -> (Vec<(usize, usize)>, Vec<bool>) {
    let edges = pos.iter().chain(neg).copied().collect();
    let labels = std::iter::repeat_n(true, pos.len()).chain(std::iter::repeat_n(false, neg.len())).collect();
    (edges, labels)
}

/// Layer-wise training on the message-passing graph of `split`; each layer
/// scores train edges against train non-edges, and validation AUC of the
/// layer-averaged link probability drives early stopping.
pub fn train_linkpred_observed(
    cfg: &TrainConfig,
    g: &Graph,
    split: &EdgeSplit,
    nt: &NodeTable,
    observer: &mut dyn TrainObserver,
) -> Result<(TrainedModel, TrainReport)> {
    let started = Instant::now();
    check_method(cfg, cfg.method.task() == super::Task::LinkPred, "link prediction")?;
    let n = g.num_nodes();
    if nt.num_nodes() != n || split.message_graph.num_nodes() != n {
        return Err(Error::dims("train_linkpred nodes", n, nt.num_nodes()));
    }
    for (name, list) in [
        ("training positive edges", &split.pos_train),
        ("training negative edges", &split.neg_train),
        ("validation positive edges", &split.pos_val),
        ("validation negative edges", &split.neg_val),
    ] {
        if list.is_empty() {
            return Err(Error::InvalidArgument(format!("no {name}")));
        }
    }
    let objective = match cfg.method {
        Method::LpFf => LinkObjective::Ff { theta: cfg.theta },
        Method::LpSymba => LinkObjective::Symba { alpha: cfg.alpha },
        _ => LinkObjective::Ce,
    };
    let (val_edges, val_labels) = labeled_pairs(&split.pos_val, &split.neg_val);
    let mut stream = Stream::new(cfg.model, &split.message_graph, nt.features().clone())?;
    let mut prob_sum = vec![0.0; val_edges.len()];
    let mut ledger = MemoryLedger::new();
    let mut layers: Vec<LayerParams> = Vec::with_capacity(cfg.layers);
    let mut curves = Vec::with_capacity(cfg.layers);

    for layer in 0..cfg.layers {
        track(&mut ledger, mem_key(layer, "inputs"), MemoryCategory::Activations, Some(layer), stream.h.byte_size());
        let init = init_layer(cfg, layer, stream.h.cols(), cfg.hidden)?;
        let done = layer as f64;
        let (best, curve) = fit_layer(cfg, layer, init, &layers, &mut ledger, observer, |p| {
            let (h, cache) = layer_forward(&stream.prop, &stream.h, p)?;
            let loss = link_local_loss(&h, &split.pos_train, &split.neg_train, objective)?;
            let grads = layer_backward(&cache, &loss.dh)?;
            let avg: Vec<f64> = link_scores(&h, &val_edges)?
                .into_iter()
                .zip(&prob_sum)
                .map(|(s, acc)| (acc + sigmoid(s)) / (done + 1.0))
                .collect();
            Ok(StepOutput {
                loss: loss.value,
                grads,
                val_metric: roc_auc(&avg, &val_labels)?,
                activation_bytes: h.byte_size() + cache.byte_size() + loss.dh.byte_size(),
            })
        })?;
        if layer + 1 < cfg.layers {
            let h = layer_output(&stream.prop, &stream.h, &best)?;
            for (acc, s) in prob_sum.iter_mut().zip(link_scores(&h, &val_edges)?) {
                *acc += sigmoid(s);
            }
            stream.h = h;
        }
        ledger.release(&mem_key(layer, "inputs"))?;
        layers.push(best);
        curves.push(curve);
    }

    let model = TrainedModel {
        config: cfg.clone(),
        input_dim: nt.feature_dim(),
        num_classes: 0,
        layers,
        top_down_store: None,
    };
    let val_metric = link_auc(&model, split, nt, &split.pos_val, &split.neg_val)?;
    let test_metric = if split.pos_test.is_empty() || split.neg_test.is_empty() {
        f64::NAN
    } else {
        link_auc(&model, split, nt, &split.pos_test, &split.neg_test)?
    };
    let report = build_report(
        cfg,
        &model,
        ReportParts {
            curves,
            metric: "roc_auc",
            val_metric,
            test_metric,
            memory: ledger,
        },
        started,
    );
    Ok((model, report))
}

/// ROC-AUC of the model's averaged link probabilities on `pos` against `neg`.
pub fn link_auc(
    model: &TrainedModel,
    split: &EdgeSplit,
    nt: &NodeTable,
    pos: &[(usize, usize)],
    neg: &[(usize, usize)],
) -> Result<f64> {
    let (edges, labels) = labeled_pairs(pos, neg);
    let p = predict_links(model, &split.message_graph, nt.features(), &edges)?;
    roc_auc(&p.probabilities, &labels)
}
