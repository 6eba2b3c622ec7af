//! Greedy layer-wise trainers with validation-based early stopping.

mod config;
mod ff;
mod link;
mod memory;
mod sf;
mod topdown;

use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use config::{Method, Task, TrainConfig, UpdateMode};
pub use ff::{train_ff_nodeclass, train_ff_nodeclass_observed};
pub use link::{link_auc, train_linkpred, train_linkpred_observed};
pub use memory::{account_memory, Allocation, MemoryCategory, MemoryLedger, MemorySample};
pub use sf::{train_sf_nodeclass, train_sf_nodeclass_observed};
pub use topdown::{train_topdown_nodeclass, train_topdown_nodeclass_observed};

use crate::error::{Error, Result};
use crate::eval::{TrainReport, SCHEMA_VERSION};
use crate::graph::{EdgeSplit, Graph, NodeTable, Split};
use crate::layers::{Architecture, LayerParams};
use crate::optim::{adam_step, AdamState};

/// Metrics of one epoch, measured before that epoch's update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub val_metric: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerCurve {
    pub layer: usize,
    pub best_epoch: usize,
    pub best_val_metric: f64,
    /// Last evaluated epoch.
    pub stopped_epoch: usize,
    pub epochs: Vec<EpochRecord>,
}

/// Layer stack selected by training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub config: TrainConfig,
    pub input_dim: usize,
    /// Zero for link prediction.
    pub num_classes: usize,
    pub layers: Vec<LayerParams>,
    /// Previous-step outputs of every layer, for top-down methods.
    pub top_down_store: Option<Vec<crate::kernel::DenseMatrix>>,
}

impl TrainedModel {
    pub fn method(&self) -> Method {
        self.config.method
    }

    pub fn architecture(&self) -> Architecture {
        self.config.model
    }

    /// SHA-256 over the per-layer fingerprints.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for p in &self.layers {
            h.update(p.fingerprint().as_bytes());
        }
        hex::encode(h.finalize())
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        let widths = layer_widths(&self.config, self.input_dim, self.num_classes);
        if self.layers.len() != widths.len() {
            return Err(Error::dims("model layer count", widths.len(), self.layers.len()));
        }
        for (p, &(d_in, d_out)) in self.layers.iter().zip(&widths) {
            if p.architecture() != self.config.model || p.in_dim() != d_in || p.out_dim() != d_out {
                return Err(Error::dims(
                    "model layer shape",
                    format!("{} {d_in}->{d_out}", self.config.model),
                    format!("{} {}->{}", p.architecture(), p.in_dim(), p.out_dim()),
                ));
            }
        }
        if self.method().is_top_down() != self.top_down_store.is_some() {
            return Err(Error::InvalidArgument("previous-step store present iff the method is top-down".into()));
        }
        Ok(())
    }
}

/// `(in, out)` width of every layer.
pub fn layer_widths(cfg: &TrainConfig, input_dim: usize, num_classes: usize) -> Vec<(usize, usize)> {
    let l = cfg.layers;
    let h = cfg.hidden;
    (0..l)
        .map(|i| {
            let below = if i == 0 { input_dim } else { h };
            let d_in = match cfg.method {
                Method::FfLa if i == 0 => input_dim + num_classes,
                Method::SfTopInput => below + if i + 1 < l { h } else { num_classes },
                _ => below,
            };
            (d_in, h)
        })
        .collect()
}

/// Hook called after every parameter update.
pub trait TrainObserver {
    /// `frozen` holds the layers below `layer`, `current` the one just updated.
    fn on_update(&mut self, layer: usize, epoch: usize, frozen: &[LayerParams], current: &LayerParams) {
        let _ = (layer, epoch, frozen, current);
    }
}

pub struct NoopObserver;

impl TrainObserver for NoopObserver {}

/// Result of evaluating one layer at its current parameters.
pub(crate) struct StepOutput {
    pub loss: f64,
    pub grads: LayerParams,
    pub val_metric: f64,
    pub activation_bytes: usize,
}

/// Keys under which a layer's tensors are tracked.
pub(crate) fn mem_key(layer: usize, what: &str) -> String {
    format!("layer{layer}/{what}")
}

pub(crate) fn track(ledger: &mut MemoryLedger, key: String, category: MemoryCategory, layer: Option<usize>, bytes: usize) {
    ledger.allocate(key, Allocation { category, layer, bytes });
}

/// Optimizes one layer until validation stops improving for `patience`
/// epochs; returns the parameters of the best validation epoch.
pub(crate) fn fit_layer(
    cfg: &TrainConfig,
    layer: usize,
    init: LayerParams,
    frozen: &[LayerParams],
    ledger: &mut MemoryLedger,
    observer: &mut dyn TrainObserver,
    mut step: impl FnMut(&LayerParams) -> Result<StepOutput>,
) -> Result<(LayerParams, LayerCurve)> {
    let mut params = init;
    let mut state = AdamState::for_params(&params);
    let bytes = params.byte_size();
    track(ledger, mem_key(layer, "params"), MemoryCategory::Parameters, Some(layer), bytes);
    track(ledger, mem_key(layer, "best"), MemoryCategory::Parameters, Some(layer), bytes);
    track(ledger, mem_key(layer, "moments"), MemoryCategory::Moments, Some(layer), state.byte_size());

    let mut best = params.clone();
    let mut curve = LayerCurve {
        layer,
        best_epoch: 0,
        best_val_metric: f64::NEG_INFINITY,
        stopped_epoch: 0,
        epochs: Vec::new(),
    };
    for epoch in 0..cfg.max_epochs {
        let out = step(&params)?;
        if !out.loss.is_finite() {
            return Err(Error::NonFinite("training loss"));
        }
        track(ledger, mem_key(layer, "activations"), MemoryCategory::Activations, Some(layer), out.activation_bytes);
        track(ledger, mem_key(layer, "grads"), MemoryCategory::Gradients, Some(layer), out.grads.byte_size());
        ledger.sample(layer, epoch);
        curve.epochs.push(EpochRecord {
            epoch,
            loss: out.loss,
            val_metric: out.val_metric,
        });
        curve.stopped_epoch = epoch;
        if out.val_metric > curve.best_val_metric {
            curve.best_val_metric = out.val_metric;
            curve.best_epoch = epoch;
            best = params.clone();
        }
        let stop = epoch - curve.best_epoch >= cfg.patience;
        if !stop {
            adam_step(&mut params, &out.grads, &mut state, cfg.lr, cfg.weight_decay)?;
            observer.on_update(layer, epoch, frozen, &params);
        }
        ledger.release(&mem_key(layer, "grads"))?;
        ledger.release(&mem_key(layer, "activations"))?;
        if stop {
            break;
        }
    }
    ledger.release(&mem_key(layer, "best"))?;
    ledger.release(&mem_key(layer, "moments"))?;
    Ok((best, curve))
}

/// Sum of two gradients of the same layer.
pub(crate) fn add_grads(acc: &mut LayerParams, g: &LayerParams) -> Result<()> {
    if acc.num_scalars() != g.num_scalars() || acc.architecture() != g.architecture() {
        return Err(Error::dims("gradient sum", acc.num_scalars(), g.num_scalars()));
    }
    for (a, b) in acc.tensors_mut().into_iter().zip(g.tensors()) {
        for (x, y) in a.iter_mut().zip(b) {
            *x += y;
        }
    }
    Ok(())
}

/// Training rows with labels, and labeled validation rows.
pub(crate) struct NodeSplit {
    pub train: Vec<usize>,
    pub train_labels: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl NodeSplit {
    pub fn of(nt: &NodeTable) -> Result<Self> {
        if !nt.has_split() {
            return Err(Error::InvalidArgument("node table has no train/val/test split".into()));
        }
        let train = nt.train_labeled();
        if train.is_empty() {
            return Err(Error::NoLabeledTrainingNodes);
        }
        let labeled = |s| -> Vec<usize> { nt.nodes_in(s).into_iter().filter(|&i| nt.label(i).is_some()).collect() };
        let val = labeled(Split::Val);
        if val.is_empty() {
            return Err(Error::Empty("labeled validation nodes"));
        }
        Ok(NodeSplit {
            train_labels: train.iter().map(|&i| nt.label(i).expect("labeled")).collect(),
            train,
            val,
            test: labeled(Split::Test),
        })
    }
}

pub(crate) fn check_method(cfg: &TrainConfig, ok: bool, context: &str) -> Result<()> {
    cfg.validate()?;
    if !ok {
        return Err(Error::MethodMismatch {
            method: cfg.method.to_string(),
            context: context.into(),
        });
    }
    Ok(())
}

pub(crate) fn init_layer(cfg: &TrainConfig, layer: usize, d_in: usize, d_out: usize) -> Result<LayerParams> {
    let mut rng = crate::seeded_rng(cfg.seed, 100 + layer as u64);
    LayerParams::init(cfg.model, d_in, d_out, cfg.heads, &mut rng)
}

pub(crate) struct ReportParts {
    pub curves: Vec<LayerCurve>,
    pub metric: &'static str,
    pub val_metric: f64,
    pub test_metric: f64,
    pub memory: MemoryLedger,
}

pub(crate) fn build_report(cfg: &TrainConfig, model: &TrainedModel, parts: ReportParts, started: Instant) -> TrainReport {
    TrainReport {
        schema_version: SCHEMA_VERSION.to_string(),
        config: cfg.clone(),
        curves: parts.curves,
        metric: parts.metric.to_string(),
        val_metric: parts.val_metric,
        test_metric: parts.test_metric,
        memory: parts.memory,
        model_fingerprint: model.fingerprint(),
        seed: cfg.seed,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    }
}

/// Node-classification entry point for every node method.
pub fn train_node_classification(
    cfg: &TrainConfig,
    g: &Graph,
    nt: &NodeTable,
    observer: &mut dyn TrainObserver,
) -> Result<(TrainedModel, TrainReport)> {
    let m = cfg.method;
    if m.is_ff() {
        train_ff_nodeclass_observed(cfg, g, nt, observer)
    } else if m.is_top_down() {
        train_topdown_nodeclass_observed(cfg, g, nt, observer)
    } else if m.is_sf() {
        train_sf_nodeclass_observed(cfg, g, nt, observer)
    } else {
        Err(Error::MethodMismatch {
            method: m.to_string(),
            context: "node classification".into(),
        })
    }
}

/// Link-prediction entry point; alias of [`train_linkpred_observed`].
pub fn train_link_prediction(
    cfg: &TrainConfig,
    g: &Graph,
    split: &EdgeSplit,
    nt: &NodeTable,
    observer: &mut dyn TrainObserver,
) -> Result<(TrainedModel, TrainReport)> {
    train_linkpred_observed(cfg, g, split, nt, observer)
}
