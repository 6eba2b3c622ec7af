use std::time::Instant;

use super::{
    add_grads, build_report, check_method, fit_layer, init_layer, mem_key, track, MemoryCategory, MemoryLedger,
    NodeSplit, NoopObserver, ReportParts, StepOutput, TrainConfig, TrainObserver, TrainedModel,
};
use crate::error::Result;
use crate::eval::{accuracy, argmax, TrainReport};
use crate::graph::{Graph, NodeTable};
use crate::inference::{predict_ff, FfInputs, Stream};
use crate::kernel::{row_l2_normalize, DenseMatrix};
use crate::layers::{layer_backward, layer_forward, layer_output, LayerParams};
use crate::losses::{goodness, goodness_backward, ScoreObjective};
use crate::train::Method;

pub fn train_ff_nodeclass(cfg: &TrainConfig, g: &Graph, nt: &NodeTable) -> Result<(TrainedModel, TrainReport)> {
    train_ff_nodeclass_observed(cfg, g, nt, &mut NoopObserver)
}

/// Goodness-contrast training: every layer separates the goodness of the
/// positive input from that of the `K-1` negative inputs, then hands
/// row-normalized outputs of every stream to the next layer.
pub fn train_ff_nodeclass_observed(
    cfg: &TrainConfig,
    g: &Graph,
    nt: &NodeTable,
    observer: &mut dyn TrainObserver,
) -> Result<(TrainedModel, TrainReport)> {
    let started = Instant::now();
    check_method(cfg, cfg.method.is_ff(), "goodness-based node classification")?;
    let split = NodeSplit::of(nt)?;
    let visible = nt.training_view();
    let inputs = FfInputs::build(cfg, g, &visible)?;
    let k = inputs.num_classes();
    let objective = match cfg.method {
        Method::FfSymba => ScoreObjective::Symba { alpha: cfg.alpha },
        _ => ScoreObjective::Ff { theta: cfg.theta },
    };
    let val_truth = nt.labels();

    let mut pos = inputs.pos.clone();
    let mut negs = inputs.negs.clone();
    let mut queries = inputs.queries(&split.val)?;
    let mut acc = DenseMatrix::zeros(split.val.len(), k);
    let mut ledger = MemoryLedger::new();
    let mut layers: Vec<LayerParams> = Vec::with_capacity(cfg.layers);
    let mut curves = Vec::with_capacity(cfg.layers);

    for layer in 0..cfg.layers {
        let stream_bytes: usize = streams(&pos, &negs, &queries).map(|s| s.h.byte_size()).sum();
        track(&mut ledger, mem_key(layer, "inputs"), MemoryCategory::Activations, Some(layer), stream_bytes);
        let init = init_layer(cfg, layer, pos.h.cols(), cfg.hidden)?;
        let (best, curve) = fit_layer(cfg, layer, init, &layers, &mut ledger, observer, |p| {
            let (hp, cp) = layer_forward(&pos.prop, &pos.h, p)?;
            let gp = goodness(&hp, &split.train);
            let mut bytes = 2 * hp.byte_size() + cp.byte_size();
            let mut neg_out = Vec::with_capacity(negs.len());
            let mut g_neg = Vec::with_capacity(split.train.len() * negs.len());
            for s in &negs {
                let (h, c) = layer_forward(&s.prop, &s.h, p)?;
                bytes += 2 * h.byte_size() + c.byte_size();
                g_neg.extend(goodness(&h, &split.train));
                neg_out.push((h, c));
            }
            // pair every positive with each negative variant for the paired loss
            let g_pos = match objective {
                ScoreObjective::Symba { .. } => gp.repeat(negs.len()),
                ScoreObjective::Ff { .. } => gp,
            };
            let loss = objective.evaluate(&g_pos, &g_neg)?;
            let mut d_pos = vec![0.0; split.train.len()];
            for (k, d) in loss.d_pos.iter().enumerate() {
                d_pos[k % split.train.len()] += d;
            }
            let mut dh = DenseMatrix::zeros(hp.rows(), hp.cols());
            goodness_backward(&hp, &split.train, &d_pos, &mut dh);
            let mut grads = layer_backward(&cp, &dh)?;
            for (j, (h, c)) in neg_out.iter().enumerate() {
                let d = &loss.d_neg[j * split.train.len()..(j + 1) * split.train.len()];
                let mut dh = DenseMatrix::zeros(h.rows(), h.cols());
                goodness_backward(h, &split.train, d, &mut dh);
                add_grads(&mut grads, &layer_backward(c, &dh)?)?;
            }

            let mut scores = acc.clone();
            for (l, q) in queries.iter().enumerate() {
                let out = layer_output(&q.prop, &q.h, p)?;
                bytes += out.byte_size();
                for (r, gv) in goodness(&out, &split.val).into_iter().enumerate() {
                    scores.set(r, l, scores.get(r, l) + gv);
                }
            }
            let pred = predicted(&scores, &split.val, nt.num_nodes());
            let val_metric = accuracy(&pred, val_truth, &split.val)?;
            Ok(StepOutput {
                loss: loss.value,
                grads,
                val_metric,
                activation_bytes: bytes,
            })
        })?;

        if layer + 1 < cfg.layers {
            pos.h = row_l2_normalize(&layer_output(&pos.prop, &pos.h, &best)?);
            for s in &mut negs {
                s.h = row_l2_normalize(&layer_output(&s.prop, &s.h, &best)?);
            }
            for (l, q) in queries.iter_mut().enumerate() {
                let out = layer_output(&q.prop, &q.h, &best)?;
                for (r, gv) in goodness(&out, &split.val).into_iter().enumerate() {
                    acc.set(r, l, acc.get(r, l) + gv);
                }
                q.h = row_l2_normalize(&out);
            }
        }
        ledger.release(&mem_key(layer, "inputs"))?;
        layers.push(best);
        curves.push(curve);
    }

    let model = TrainedModel {
        config: cfg.clone(),
        input_dim: nt.feature_dim(),
        num_classes: k,
        layers,
        top_down_store: None,
    };
    let val_metric = score(&model, g, nt, &split.val)?;
    let test_metric = if split.test.is_empty() { f64::NAN } else { score(&model, g, nt, &split.test)? };
    let report = build_report(
        cfg,
        &model,
        ReportParts {
            curves,
            metric: "accuracy",
            val_metric,
            test_metric,
            memory: ledger,
        },
        started,
    );
    Ok((model, report))
}

fn streams<'a>(pos: &'a Stream, negs: &'a [Stream], queries: &'a [Stream]) -> impl Iterator<Item = &'a Stream> {
    std::iter::once(pos).chain(negs).chain(queries)
}

/// Dense prediction vector with argmax labels at `rows` (others zero).
pub(crate) fn predicted(scores: &DenseMatrix, rows: &[usize], n: usize) -> Vec<usize> {
    let mut pred = vec![0; n];
    for (r, &i) in rows.iter().enumerate() {
        pred[i] = argmax(scores.row(r));
    }
    pred
}

fn score(model: &TrainedModel, g: &Graph, nt: &NodeTable, targets: &[usize]) -> Result<f64> {
    let p = predict_ff(model, g, nt, targets)?;
    accuracy(&predicted(&p.scores, targets, nt.num_nodes()), nt.labels(), targets)
}
