//! Jointly trained stacks with top-down signals fed into the layer input or
//! the layer loss, under both update schedules.

use fwdgraph::cli::ensure_node_split;
use fwdgraph::graph::{generate_sbm, SbmConfig};
use fwdgraph::layers::Architecture;
use fwdgraph::seeded_rng;
use fwdgraph::train::{train_node_classification, Method, NoopObserver, TrainConfig, UpdateMode};

fn main() -> fwdgraph::Result<()> {
    let (g, nt) = generate_sbm(&SbmConfig::default(), &mut seeded_rng(0, 0))?;
    let nt = ensure_node_split(nt, 0)?;
    for method in [Method::SfTopInput, Method::SfTopLoss] {
        for mode in [UpdateMode::Sync, UpdateMode::Async] {
            let mut cfg = TrainConfig::new(method, Architecture::Gcn, 3);
            cfg.max_epochs = 300;
            cfg.update_mode = mode;
            let (_, report) = train_node_classification(&cfg, &g, &nt, &mut NoopObserver)?;
            let curve = &report.curves[0];
            println!(
                "{:>12} {mode:?}: test {:.3}, best epoch {}, stopped {}, final layer losses {:?}",
                method.as_str(),
                report.test_metric,
                curve.best_epoch,
                curve.stopped_epoch,
                report.curves.iter().map(|c| c.epochs.last().map_or(f64::NAN, |e| e.loss)).collect::<Vec<_>>()
            );
        }
    }
    Ok(())
}
