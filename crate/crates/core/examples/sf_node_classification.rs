//! Single-forward training on the SBM instance with each layer type.

use fwdgraph::cli::ensure_node_split;
use fwdgraph::graph::{generate_sbm, SbmConfig};
use fwdgraph::layers::Architecture;
use fwdgraph::seeded_rng;
use fwdgraph::train::{train_node_classification, Method, NoopObserver, TrainConfig};

fn main() -> fwdgraph::Result<()> {
    let (g, nt) = generate_sbm(&SbmConfig::default(), &mut seeded_rng(0, 0))?;
    let nt = ensure_node_split(nt, 0)?;
    for arch in [Architecture::Gcn, Architecture::Sage, Architecture::Gat] {
        for layers in [1, 2] {
            let mut cfg = TrainConfig::new(Method::Sf, arch, layers);
            cfg.max_epochs = 300;
            let (model, report) = train_node_classification(&cfg, &g, &nt, &mut NoopObserver)?;
            let stops: Vec<_> = report.curves.iter().map(|c| (c.best_epoch, c.stopped_epoch)).collect();
            println!(
                "{:>4} L={layers}: val {:.3} test {:.3}  (best, stopped) per layer {stops:?}  model {}",
                arch.as_str(),
                report.val_metric,
                report.test_metric,
                &model.fingerprint()[..12]
            );
        }
    }
    Ok(())
}
