use std::time::Instant;

use super::ff::predicted;
use super::sf::score;
use super::{
    build_report, check_method, init_layer, layer_widths, mem_key, track, EpochRecord, LayerCurve, MemoryCategory,
    MemoryLedger, NodeSplit, NoopObserver, ReportParts, TrainConfig, TrainObserver, TrainedModel, UpdateMode,
};
use crate::error::{Error, Result};
use crate::eval::{accuracy, TrainReport};
use crate::graph::{Graph, NodeTable};
use crate::inference::{topdown_forward, SfInputs, TopDownPass};
use crate::kernel::DenseMatrix;
use crate::layers::{layer_backward, LayerParams};
use crate::losses::{class_probabilities, sf_contrastive_loss};
use crate::optim::{adam_step, AdamState};

pub fn train_topdown_nodeclass(cfg: &TrainConfig, g: &Graph, nt: &NodeTable) -> Result<(TrainedModel, TrainReport)> {
    train_topdown_nodeclass_observed(cfg, g, nt, &mut NoopObserver)
}

struct Run<'a> {
    cfg: &'a TrainConfig,
    inputs: SfInputs,
    split: NodeSplit,
    hidden: usize,
}

impl Run<'_> {
    fn forward(&self, layers: &[LayerParams], store: &[DenseMatrix]) -> Result<TopDownPass> {
        topdown_forward(self.cfg.method, &self.inputs, layers, store)
    }

    /// Local loss and gradient of layer `l`. Only the layer's own output
    /// columns of the critic embedding receive gradient.
    fn local(&self, pass: &TopDownPass, l: usize) -> Result<(f64, LayerParams)> {
        let s = &self.split;
        let loss = sf_contrastive_loss(&pass.embeddings[l], &s.train, &s.train_labels, &self.inputs.virtual_ids, self.cfg.tau)?;
        let dh = loss.dh.column_slice(0, self.hidden);
        Ok((loss.value, layer_backward(&pass.caches[l], &dh)?))
    }

    fn val_accuracy(&self, pass: &TopDownPass, n: usize, labels: &[Option<usize>]) -> Result<f64> {
        let s = &self.split;
        let mut avg = DenseMatrix::zeros(s.val.len(), self.inputs.virtual_ids.len());
        for e in &pass.embeddings {
            avg.add_assign(&class_probabilities(e, &s.val, &self.inputs.virtual_ids, self.cfg.tau))?;
        }
        avg.scale(1.0 / pass.embeddings.len() as f64);
        accuracy(&predicted(&avg, &s.val, n), labels, &s.val)
    }
}

/// Trains all layers together over time steps. At step `t` every layer
/// merges its bottom-up input with upper-layer outputs from step `t-1`;
/// each layer is updated from its own loss only.
pub fn train_topdown_nodeclass_observed(
    cfg: &TrainConfig,
    g: &Graph,
    nt: &NodeTable,
    observer: &mut dyn TrainObserver,
) -> Result<(TrainedModel, TrainReport)> {
    let started = Instant::now();
    check_method(cfg, cfg.method.is_top_down(), "top-down node classification")?;
    let run = Run {
        cfg,
        inputs: SfInputs::build(cfg, g, &nt.training_view())?,
        split: NodeSplit::of(nt)?,
        hidden: cfg.hidden,
    };
    let k = run.inputs.virtual_ids.len();
    let rows = run.inputs.stream.h.rows();
    let depth = cfg.layers;

    let mut layers = Vec::with_capacity(depth);
    for (l, (d_in, d_out)) in layer_widths(cfg, nt.feature_dim(), k).into_iter().enumerate() {
        layers.push(init_layer(cfg, l, d_in, d_out)?);
    }
    let mut states: Vec<AdamState> = layers.iter().map(AdamState::for_params).collect();
    let mut store = vec![DenseMatrix::zeros(rows, cfg.hidden); depth];

    let mut ledger = MemoryLedger::new();
    for (l, p) in layers.iter().enumerate() {
        track(&mut ledger, mem_key(l, "params"), MemoryCategory::Parameters, Some(l), p.byte_size());
        track(&mut ledger, mem_key(l, "best"), MemoryCategory::Parameters, Some(l), p.byte_size());
        track(&mut ledger, mem_key(l, "moments"), MemoryCategory::Moments, Some(l), states[l].byte_size());
    }
    let store_bytes = 2 * depth * store[0].byte_size();
    track(&mut ledger, "store".into(), MemoryCategory::Activations, None, store_bytes);

    let mut curves: Vec<LayerCurve> = (0..depth)
        .map(|layer| LayerCurve {
            layer,
            best_epoch: 0,
            best_val_metric: f64::NEG_INFINITY,
            stopped_epoch: 0,
            epochs: Vec::new(),
        })
        .collect();
    let mut best = (f64::NEG_INFINITY, 0usize, layers.clone(), store.clone());
    let mut losses = vec![0.0; depth];

    for epoch in 0..cfg.max_epochs {
        let pass = run.forward(&layers, &store)?;
        let val = run.val_accuracy(&pass, nt.num_nodes(), nt.labels())?;
        let act: usize = pass.input_bytes
            + pass.outputs.iter().map(DenseMatrix::byte_size).sum::<usize>()
            + pass.caches.iter().map(|c| c.byte_size()).sum::<usize>()
            + pass.embeddings.iter().map(DenseMatrix::byte_size).sum::<usize>();
        track(&mut ledger, "activations".into(), MemoryCategory::Activations, None, act);
        if val > best.0 {
            best = (val, epoch, layers.clone(), store.clone());
        }
        let stop = epoch - best.1 >= cfg.patience;

        if !stop {
            let mut step = |l: usize, pass: &TopDownPass, layers: &mut Vec<LayerParams>, ledger: &mut MemoryLedger| -> Result<()> {
                let (loss, grads) = run.local(pass, l)?;
                if !loss.is_finite() {
                    return Err(Error::NonFinite("training loss"));
                }
                losses[l] = loss;
                track(ledger, mem_key(l, "grads"), MemoryCategory::Gradients, Some(l), grads.byte_size());
                adam_step(&mut layers[l], &grads, &mut states[l], cfg.lr, cfg.weight_decay)?;
                observer.on_update(l, epoch, &layers[..l], &layers[l]);
                Ok(())
            };
            match cfg.update_mode {
                UpdateMode::Sync => {
                    for l in 0..depth {
                        step(l, &pass, &mut layers, &mut ledger)?;
                    }
                    ledger.sample(depth - 1, epoch);
                    store = pass.outputs;
                }
                UpdateMode::Async => {
                    // 1-based even layers are 0-based odd indices
                    for l in (1..depth).step_by(2) {
                        step(l, &pass, &mut layers, &mut ledger)?;
                    }
                    let fresh = run.forward(&layers, &store)?;
                    for l in (1..depth).step_by(2) {
                        store[l] = fresh.outputs[l].clone();
                    }
                    let pass2 = run.forward(&layers, &store)?;
                    for l in (0..depth).step_by(2) {
                        step(l, &pass2, &mut layers, &mut ledger)?;
                    }
                    ledger.sample(depth - 1, epoch);
                    for l in (0..depth).step_by(2) {
                        store[l] = pass2.outputs[l].clone();
                    }
                }
            }
        } else {
            for (l, loss) in losses.iter_mut().enumerate() {
                *loss = run.local(&pass, l)?.0;
            }
            ledger.sample(depth - 1, epoch);
        }
        for l in 0..depth {
            ledger.release_if_live(&mem_key(l, "grads"));
            curves[l].epochs.push(EpochRecord {
                epoch,
                loss: losses[l],
                val_metric: val,
            });
            curves[l].stopped_epoch = epoch;
        }
        ledger.release("activations")?;
        if stop {
            break;
        }
    }
    for c in &mut curves {
        c.best_epoch = best.1;
        c.best_val_metric = best.0;
    }

    let model = TrainedModel {
        config: cfg.clone(),
        input_dim: nt.feature_dim(),
        num_classes: k,
        layers: best.2,
        top_down_store: Some(best.3),
    };
    let val_metric = score(&model, g, nt, &run.split.val)?;
    let test_metric = if run.split.test.is_empty() {
        f64::NAN
    } else {
        score(&model, g, nt, &run.split.test)?
    };
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
