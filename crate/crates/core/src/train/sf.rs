use std::time::Instant;

use super::ff::predicted;
use super::{
    build_report, check_method, fit_layer, init_layer, mem_key, track, MemoryCategory, MemoryLedger, NodeSplit,
    NoopObserver, ReportParts, StepOutput, TrainConfig, TrainObserver, TrainedModel,
};
use crate::error::Result;
use crate::eval::{accuracy, TrainReport};
use crate::graph::{Graph, NodeTable};
use crate::inference::{predict_sf, SfInputs};
use crate::kernel::{row_l2_normalize, DenseMatrix};
use crate::layers::{layer_backward, layer_forward, layer_output, LayerParams};
use crate::losses::{class_probabilities, sf_contrastive_loss};
use crate::train::Method;

pub fn train_sf_nodeclass(cfg: &TrainConfig, g: &Graph, nt: &NodeTable) -> Result<(TrainedModel, TrainReport)> {
    train_sf_nodeclass_observed(cfg, g, nt, &mut NoopObserver)
}

/// One forward stream over the positively augmented graph per epoch; each
/// layer contrasts training nodes against the class virtual nodes.
pub fn train_sf_nodeclass_observed(
    cfg: &TrainConfig,
    g: &Graph,
    nt: &NodeTable,
    observer: &mut dyn TrainObserver,
) -> Result<(TrainedModel, TrainReport)> {
    let started = Instant::now();
    check_method(cfg, cfg.method == Method::Sf, "single-forward node classification")?;
    let split = NodeSplit::of(nt)?;
    let inputs = SfInputs::build(cfg, g, &nt.training_view())?;
    let k = inputs.virtual_ids.len();
    let virt = &inputs.virtual_ids;
    let mut stream = inputs.stream.clone();
    let mut prob_sum = DenseMatrix::zeros(split.val.len(), k);
    let mut ledger = MemoryLedger::new();
    let mut layers: Vec<LayerParams> = Vec::with_capacity(cfg.layers);
    let mut curves = Vec::with_capacity(cfg.layers);

    for layer in 0..cfg.layers {
        track(&mut ledger, mem_key(layer, "inputs"), MemoryCategory::Activations, Some(layer), stream.h.byte_size());
        let init = init_layer(cfg, layer, stream.h.cols(), cfg.hidden)?;
        let done = layer as f64;
        let (best, curve) = fit_layer(cfg, layer, init, &layers, &mut ledger, observer, |p| {
            let (h, cache) = layer_forward(&stream.prop, &stream.h, p)?;
            let loss = sf_contrastive_loss(&h, &split.train, &split.train_labels, virt, cfg.tau)?;
            let grads = layer_backward(&cache, &loss.dh)?;
            let mut avg = class_probabilities(&h, &split.val, virt, cfg.tau);
            avg.add_assign(&prob_sum)?;
            avg.scale(1.0 / (done + 1.0));
            let pred = predicted(&avg, &split.val, nt.num_nodes());
            Ok(StepOutput {
                loss: loss.value,
                grads,
                val_metric: accuracy(&pred, nt.labels(), &split.val)?,
                activation_bytes: h.byte_size() + cache.byte_size() + loss.dh.byte_size(),
            })
        })?;
        if layer + 1 < cfg.layers {
            let h = layer_output(&stream.prop, &stream.h, &best)?;
            prob_sum.add_assign(&class_probabilities(&h, &split.val, virt, cfg.tau))?;
            stream.h = if cfg.sf_normalize { row_l2_normalize(&h) } else { h };
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

pub(crate) fn score(model: &TrainedModel, g: &Graph, nt: &NodeTable, targets: &[usize]) -> Result<f64> {
    let p = predict_sf(model, g, nt, targets)?;
    accuracy(&predicted(&p.scores, targets, nt.num_nodes()), nt.labels(), targets)
}
