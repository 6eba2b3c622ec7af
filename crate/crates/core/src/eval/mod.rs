//! Metrics, the TSV dataset directory format, reports and model files.

mod dataset;
mod metrics;
mod report;

use std::fs;
use std::path::Path;

pub use dataset::{load_dataset, save_dataset, EDGES_FILE, FEATURES_FILE, LABELS_FILE, SPLITS_FILE};
pub use metrics::{accuracy, argmax, roc_auc};
pub use report::{read_report, to_canonical_json, write_report, EvalReport, TrainReport, SCHEMA_VERSION};

use crate::error::{Error, Result};
use crate::train::TrainedModel;

pub fn save_model(model: &TrainedModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string(model)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<TrainedModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let model: TrainedModel = serde_json::from_str(&text)?;
    model.validate()?;
    Ok(model)
}
