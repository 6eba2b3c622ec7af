//! Accounted training memory of greedy single-forward stacks of growing depth.

use fwdgraph::cli::ensure_node_split;
use fwdgraph::graph::{generate_sbm, SbmConfig};
use fwdgraph::layers::{Architecture, LayerParams};
use fwdgraph::seeded_rng;
use fwdgraph::train::{train_node_classification, Method, NoopObserver, TrainConfig};

fn main() -> fwdgraph::Result<()> {
    let (g, nt) = generate_sbm(&SbmConfig::default(), &mut seeded_rng(0, 0))?;
    let nt = ensure_node_split(nt, 0)?;
    println!("layers  peak bytes  frozen params  peak - frozen  layers with optimizer state");
    for layers in 1..=6 {
        let mut cfg = TrainConfig::new(Method::Sf, Architecture::Gcn, layers);
        cfg.max_epochs = 100;
        let (model, report) = train_node_classification(&cfg, &g, &nt, &mut NoopObserver)?;
        let frozen: usize = model.layers[..layers - 1].iter().map(LayerParams::byte_size).sum();
        let m = &report.memory;
        println!(
            "{layers:>6}  {:>10}  {frozen:>13}  {:>13}  {:>2}",
            m.peak_bytes,
            m.peak_bytes - frozen,
            m.max_layers_with_optimizer_state
        );
    }
    Ok(())
}
