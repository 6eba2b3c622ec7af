//! Forward-forward variants: virtual-node negatives, label appending and
//! the pairwise objective, predicted by goodness accumulation.

use fwdgraph::cli::ensure_node_split;
use fwdgraph::graph::{generate_sbm, SbmConfig};
use fwdgraph::inference::ff_training_goodness;
use fwdgraph::layers::Architecture;
use fwdgraph::seeded_rng;
use fwdgraph::train::{train_node_classification, Method, NoopObserver, TrainConfig};

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn main() -> fwdgraph::Result<()> {
    let (g, nt) = generate_sbm(&SbmConfig::default(), &mut seeded_rng(0, 0))?;
    let nt = ensure_node_split(nt, 0)?;
    for method in [Method::FfVn, Method::FfLa, Method::FfSymba] {
        for layers in [1, 2] {
            let mut cfg = TrainConfig::new(method, Architecture::Gcn, layers);
            cfg.max_epochs = 300;
            let (model, report) = train_node_classification(&cfg, &g, &nt, &mut NoopObserver)?;
            let (pos, neg) = ff_training_goodness(&model, &g, &nt)?;
            let separated = pos.iter().zip(&neg).filter(|(p, n)| p > n).count();
            println!(
                "{:>8} L={layers}: test {:.3}  goodness pos {:.2} vs neg {:.2}, separated on {separated}/{} train nodes",
                method.as_str(),
                report.test_metric,
                mean(&pos),
                mean(&neg),
                pos.len()
            );
        }
    }
    Ok(())
}
