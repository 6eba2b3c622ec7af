//! Compares the analytic gradient of a GCN layer under the contrastive loss
//! with central differences of an independent dense double-double oracle.

use fwdgraph::graph::Graph;
use fwdgraph::kernel::DenseMatrix;
use fwdgraph::layers::{layer_backward, layer_forward, Architecture, LayerParams, Propagation};
use fwdgraph::losses::sf_contrastive_loss;
use fwdgraph::seeded_rng;
use fwdgraph::testkit::{compare, dense_adjacency, dense_forward_in, finite_diff_grad, reference, Extended};
use rand::Rng;

fn main() -> fwdgraph::Result<()> {
    let mut rng = seeded_rng(11, 0);
    let n = 10;
    let edges: Vec<(usize, usize)> = (0..n).map(|i| (i, (i + 1) % n)).chain([(0, 5), (2, 7)]).collect();
    let g = Graph::build(&edges, n, false)?;
    let x = DenseMatrix::from_vec(n, 5, (0..n * 5).map(|_| rng.random_range(-1.0..1.0)).collect())?;
    let p = LayerParams::init(Architecture::Gcn, 5, 6, 1, &mut rng)?;
    let (rows, labels, virt) = (vec![2, 3, 4, 5, 6, 7, 8, 9], vec![0, 1, 2, 0, 1, 2, 0, 1], vec![0, 1, 2]);

    let prop = Propagation::prepare(Architecture::Gcn, &g)?;
    let (h, cache) = layer_forward(&prop, &x, &p)?;
    let loss = sf_contrastive_loss(&h, &rows, &labels, &virt, 1.0)?;
    let analytic = layer_backward(&cache, &loss.dh)?.to_flat();

    let adj = dense_adjacency(&g);
    let numeric = finite_diff_grad(
        |flat| {
            let mut q = p.clone();
            q.set_flat(flat)?;
            let h = dense_forward_in::<Extended>(&q, &adj, &x)?;
            Ok(reference::contrastive(&h, &rows, &labels, &virt, 1.0))
        },
        &p.to_flat(),
        1e-5,
    )?;
    let r = compare(&analytic, &numeric)?;
    println!("loss {:.6}, {} parameters", loss.value, analytic.len());
    println!("max abs err {:.3e}, max rel err {:.3e} at coordinate {}", r.max_abs_err, r.max_rel_err, r.worst_index);
    println!("within 1e-4: {}", r.within(1e-4));
    Ok(())
}
