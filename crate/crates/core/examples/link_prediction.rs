//! Layer-local link prediction on held-out SBM edges, compared with the
//! untrained stack and with a score that only knows block membership.

use fwdgraph::cli::{edge_split, ensure_node_split};
use fwdgraph::eval::roc_auc;
use fwdgraph::graph::{generate_sbm, SbmConfig};
use fwdgraph::layers::Architecture;
use fwdgraph::seeded_rng;
use fwdgraph::train::{link_auc, train_link_prediction, Method, NoopObserver, TrainConfig};

fn main() -> fwdgraph::Result<()> {
    let (g, nt) = generate_sbm(&SbmConfig::default(), &mut seeded_rng(0, 0))?;
    let nt = ensure_node_split(nt, 0)?;
    let split = edge_split(&g, 0)?;
    println!(
        "{} message edges, {} / {} positive val / test pairs",
        split.message_graph.canonical_edges().len(),
        split.pos_val.len(),
        split.pos_test.len()
    );

    let block: Vec<f64> = split
        .pos_test
        .iter()
        .chain(&split.neg_test)
        .map(|&(u, v)| f64::from(u8::from(nt.label(u) == nt.label(v))))
        .collect();
    let truth: Vec<bool> = (0..block.len()).map(|i| i < split.pos_test.len()).collect();
    println!("same-block score AUC {:.3}", roc_auc(&block, &truth)?);

    for method in [Method::LpCe, Method::LpFf, Method::LpSymba] {
        let cfg = TrainConfig::new(method, Architecture::Gcn, 2);
        let (_, report) = train_link_prediction(&cfg, &g, &split, &nt, &mut NoopObserver)?;
        let mut fresh = cfg.clone();
        fresh.max_epochs = 1;
        fresh.patience = 0;
        let (untrained, _) = train_link_prediction(&fresh, &g, &split, &nt, &mut NoopObserver)?;
        println!(
            "{:>8}: test AUC {:.3} (untrained {:.3}), val {:.3}",
            method.as_str(),
            report.test_metric,
            link_auc(&untrained, &split, &nt, &split.pos_test, &split.neg_test)?,
            report.val_metric
        );
    }
    Ok(())
}
