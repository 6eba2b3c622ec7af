//! Writes a two-block SBM dataset directory with a seeded 64/16/20 split.
//!
//!     cargo run --example generate_sbm -- /tmp/sbm 7

use fwdgraph::cli::ensure_node_split;
use fwdgraph::eval::save_dataset;
use fwdgraph::graph::{generate_sbm, SbmConfig, Split};
use fwdgraph::seeded_rng;

fn main() -> fwdgraph::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = args.next().unwrap_or_else(|| "sbm-data".into());
    let seed: u64 = args.next().map(|s| s.parse().expect("seed must be an integer")).unwrap_or(0);

    let (g, nt) = generate_sbm(&SbmConfig::default(), &mut seeded_rng(seed, 0))?;
    let nt = ensure_node_split(nt, seed)?;
    let same = g.canonical_edges().iter().filter(|&&(u, v)| nt.label(u) == nt.label(v)).count();
    println!(
        "{} nodes, {} undirected edges ({} within a block), {} features",
        g.num_nodes(),
        g.canonical_edges().len(),
        same,
        nt.feature_dim()
    );
    for s in [Split::Train, Split::Val, Split::Test] {
        println!("{:>5}: {} nodes", s.as_str(), nt.nodes_in(s).len());
    }
    save_dataset(std::path::Path::new(&out), &g, &nt)?;
    println!("wrote {out}");
    Ok(())
}
