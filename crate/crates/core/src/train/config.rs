use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{VirtualEdges, VirtualFeatures};
use crate::layers::{Architecture, GAT_HEADS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    NodeClass,
    LinkPred,
}

/// Training procedure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Goodness contrast between the true-class and wrong-class virtual-node graphs.
    FfVn,
    /// Goodness contrast between true and wrong one-hot labels appended to features.
    FfLa,
    /// Paired goodness-gap loss on the virtual-node streams.
    FfSymba,
    /// Contrast of node embeddings against class representatives, one forward per epoch.
    Sf,
    /// Contrastive training with the upper layer's previous output fed into the input.
    SfTopInput,
    /// Contrastive training with upper layers' previous outputs merged into the loss.
    SfTopLoss,
    LpCe,
    LpFf,
    LpSymba,
}

impl Method {
    pub const ALL: [Method; 9] = [
        Method::FfVn,
        Method::FfLa,
        Method::FfSymba,
        Method::Sf,
        Method::SfTopInput,
        Method::SfTopLoss,
        Method::LpCe,
        Method::LpFf,
        Method::LpSymba,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::FfVn => "ff_vn",
            Method::FfLa => "ff_la",
            Method::FfSymba => "ff_symba",
            Method::Sf => "sf",
            Method::SfTopInput => "sf_top_input",
            Method::SfTopLoss => "sf_top_loss",
            Method::LpCe => "lp_ce",
            Method::LpFf => "lp_ff",
            Method::LpSymba => "lp_symba",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        Method::ALL.into_iter().find(|m| m.as_str() == s)
    }

    pub fn task(self) -> Task {
        match self {
            Method::LpCe | Method::LpFf | Method::LpSymba => Task::LinkPred,
            _ => Task::NodeClass,
        }
    }

    pub fn is_ff(self) -> bool {
        matches!(self, Method::FfVn | Method::FfLa | Method::FfSymba)
    }

    pub fn is_sf(self) -> bool {
        matches!(self, Method::Sf | Method::SfTopInput | Method::SfTopLoss)
    }

    pub fn is_top_down(self) -> bool {
        matches!(self, Method::SfTopInput | Method::SfTopLoss)
    }

    /// Whether the method relies on class virtual nodes.
    pub fn uses_virtual_nodes(self) -> bool {
        matches!(self, Method::FfVn | Method::FfSymba) || self.is_sf()
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How top-down layers are scheduled within an epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UpdateMode {
    /// Every layer consumes the previous epoch's upper-layer outputs.
    #[default]
    Sync,
    /// Even-numbered layers first, then odd-numbered layers with fresh activities.
    Async,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub task: Task,
    pub method: Method,
    pub model: Architecture,
    pub layers: usize,
    pub hidden: usize,
    pub heads: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub theta: f64,
    pub tau: f64,
    pub alpha: f64,
    pub seed: u64,
    pub update_mode: UpdateMode,
    pub virtual_edges: VirtualEdges,
    pub virtual_features: VirtualFeatures,
    /// L2-normalize embeddings between single-forward layers.
    pub sf_normalize: bool,
}

impl TrainConfig {
    /// Defaults for `method`; the task follows from the method.
    pub fn new(method: Method, model: Architecture, layers: usize) -> Self {
        TrainConfig {
            task: method.task(),
            method,
            model,
            layers,
            hidden: 128,
            heads: GAT_HEADS,
            max_epochs: 1000,
            patience: 100,
            lr: 0.001,
            weight_decay: 0.0005,
            theta: 2.0,
            tau: 1.0,
            alpha: 4.0,
            seed: 0,
            update_mode: UpdateMode::Sync,
            virtual_edges: VirtualEdges::Bidirectional,
            virtual_features: VirtualFeatures::ClassMean,
            sf_normalize: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.layers == 0 {
            return bad("at least one layer is required".into());
        }
        if self.hidden == 0 {
            return bad("hidden width must be positive".into());
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be positive".into());
        }
        if self.patience > self.max_epochs {
            return bad(format!("patience {} exceeds max_epochs {}", self.patience, self.max_epochs));
        }
        if self.model == Architecture::Gat && (self.heads == 0 || self.hidden % self.heads != 0) {
            return bad(format!("hidden width {} is not divisible by {} heads", self.hidden, self.heads));
        }
        for (name, v) in [("lr", self.lr), ("tau", self.tau)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        for (name, v) in [("weight_decay", self.weight_decay), ("theta", self.theta), ("alpha", self.alpha)] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be non-negative, got {v}"));
            }
        }
        if self.method.task() != self.task {
            return Err(Error::MethodMismatch {
                method: self.method.to_string(),
                context: format!("{:?}", self.task),
            });
        }
        Ok(())
    }
}
