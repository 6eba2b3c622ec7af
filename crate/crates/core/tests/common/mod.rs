#![allow(dead_code)]

use fwdgraph::graph::Graph;
use fwdgraph::kernel::DenseMatrix;
use fwdgraph::layers::{layer_backward, layer_forward, Architecture, LayerParams, Propagation};
use fwdgraph::losses::{goodness, goodness_backward, link_local_loss, sf_contrastive_loss, LinkObjective, ScoreObjective};
use fwdgraph::testkit::{compare, dense_adjacency, dense_forward_in, finite_diff_grad, reference, Extended, OracleReport};
use fwdgraph::{seeded_rng, Result};
use rand::seq::SliceRandom;
use rand::Rng;

pub const ARCHS: [Architecture; 3] = [Architecture::Gcn, Architecture::Sage, Architecture::Gat];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossCase {
    Ff,
    Symba,
    Contrastive,
    LinkCe,
    LinkFf,
    LinkSymba,
}

pub const LOSSES: [LossCase; 6] = [
    LossCase::Ff,
    LossCase::Symba,
    LossCase::Contrastive,
    LossCase::LinkCe,
    LossCase::LinkFf,
    LossCase::LinkSymba,
];

pub fn random_graph<R: Rng>(n: usize, edges: usize, rng: &mut R) -> Graph {
    let list: Vec<_> = (0..edges)
        .map(|_| (rng.random_range(0..n), rng.random_range(0..n)))
        .filter(|(u, v)| u != v)
        .collect();
    Graph::build(&list, n, false).unwrap()
}

pub fn random_matrix<R: Rng>(rows: usize, cols: usize, scale: f64, rng: &mut R) -> DenseMatrix {
    DenseMatrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-scale..scale)).collect()).unwrap()
}

fn random_pairs<R: Rng>(n: usize, count: usize, rng: &mut R) -> Vec<(usize, usize)> {
    (0..count).map(|_| (rng.random_range(0..n), rng.random_range(0..n))).collect()
}

/// Loss of one layer as a function of its flattened parameters, plus the
/// analytic gradient from `layer_backward`.
struct Problem {
    props: Vec<Propagation>,
    adjs: Vec<Vec<Vec<f64>>>,
    x: DenseMatrix,
    loss: LossCase,
    rows: Vec<usize>,
    labels: Vec<usize>,
    virtual_ids: Vec<usize>,
    pos: Vec<(usize, usize)>,
    neg: Vec<(usize, usize)>,
}

impl Problem {
    fn outputs(&self, p: &LayerParams) -> Result<Vec<(DenseMatrix, fwdgraph::layers::ForwardCache)>> {
        self.props.iter().map(|prop| layer_forward(prop, &self.x, p)).collect()
    }

    fn value_and_dh(&self, hs: &[DenseMatrix]) -> Result<(f64, Vec<DenseMatrix>)> {
        let link = |objective| -> Result<(f64, Vec<DenseMatrix>)> {
            let l = link_local_loss(&hs[0], &self.pos, &self.neg, objective)?;
            Ok((l.value, vec![l.dh]))
        };
        match self.loss {
            LossCase::Ff | LossCase::Symba => {
                let objective = if self.loss == LossCase::Ff {
                    ScoreObjective::Ff { theta: 2.0 }
                } else {
                    ScoreObjective::Symba { alpha: 4.0 }
                };
                let gp = goodness(&hs[0], &self.rows);
                let gn = goodness(&hs[1], &self.rows);
                let l = objective.evaluate(&gp, &gn)?;
                let mut dp = DenseMatrix::zeros(hs[0].rows(), hs[0].cols());
                let mut dn = dp.clone();
                goodness_backward(&hs[0], &self.rows, &l.d_pos, &mut dp);
                goodness_backward(&hs[1], &self.rows, &l.d_neg, &mut dn);
                Ok((l.value, vec![dp, dn]))
            }
            LossCase::Contrastive => {
                let l = sf_contrastive_loss(&hs[0], &self.rows, &self.labels, &self.virtual_ids, 1.0)?;
                Ok((l.value, vec![l.dh]))
            }
            LossCase::LinkCe => link(LinkObjective::Ce),
            LossCase::LinkFf => link(LinkObjective::Ff { theta: 2.0 }),
            LossCase::LinkSymba => link(LinkObjective::Symba { alpha: 4.0 }),
        }
    }

    /// Loss from the independent dense oracle in double-double precision.
    fn reference_loss(&self, template: &LayerParams, flat: &[f64]) -> Result<Extended> {
        let mut p = template.clone();
        p.set_flat(flat)?;
        let hs = self
            .adjs
            .iter()
            .map(|a| dense_forward_in::<Extended>(&p, a, &self.x))
            .collect::<Result<Vec<_>>>()?;
        Ok(match self.loss {
            LossCase::Ff => reference::ff(
                &reference::goodness(&hs[0], &self.rows),
                &reference::goodness(&hs[1], &self.rows),
                2.0,
            ),
            LossCase::Symba => reference::symba(
                &reference::goodness(&hs[0], &self.rows),
                &reference::goodness(&hs[1], &self.rows),
                4.0,
            ),
            LossCase::Contrastive => reference::contrastive(&hs[0], &self.rows, &self.labels, &self.virtual_ids, 1.0),
            LossCase::LinkCe => reference::link_ce(&hs[0], &self.pos, &self.neg),
            LossCase::LinkFf => reference::ff(
                &reference::scores(&hs[0], &self.pos),
                &reference::scores(&hs[0], &self.neg),
                2.0,
            ),
            LossCase::LinkSymba => reference::symba(
                &reference::scores(&hs[0], &self.pos),
                &reference::scores(&hs[0], &self.neg),
                4.0,
            ),
        })
    }

    fn analytic(&self, p: &LayerParams) -> Result<Vec<f64>> {
        let (hs, caches): (Vec<_>, Vec<_>) = self.outputs(p)?.into_iter().unzip();
        let (_, dhs) = self.value_and_dh(&hs)?;
        let mut total = vec![0.0; p.num_scalars()];
        for (cache, dh) in caches.iter().zip(&dhs) {
            for (t, g) in total.iter_mut().zip(layer_backward(cache, dh)?.to_flat()) {
                *t += g;
            }
        }
        Ok(total)
    }
}

/// Builds a random instance (<= 12 nodes, K <= 4, widths <= 8) and compares
/// the analytic layer gradient with central differences at `h`.
pub fn gradient_check(arch: Architecture, loss: LossCase, seed: u64, h: f64) -> OracleReport {
    let mut rng = seeded_rng(seed, 17);
    let k = rng.random_range(2..=4);
    let n = rng.random_range(6..=12);
    let f_in = rng.random_range(2..=8);
    let f_out = [4, 8][rng.random_range(0..2)];
    let heads = if arch == Architecture::Gat { [1, 2, 4][rng.random_range(0..3)] } else { 1 };
    let g = random_graph(n, 2 * n, &mut rng);
    let x = random_matrix(n, f_in, 1.0, &mut rng);
    let mut p = LayerParams::init(arch, f_in, f_out, heads, &mut rng).unwrap();
    // non-zero biases so bias gradients are exercised away from the init point
    if let LayerParams::Gcn { b, .. } | LayerParams::Sage { b, .. } = &mut p {
        for v in b.iter_mut() {
            *v = rng.random_range(-0.3..0.3);
        }
    }

    let mut ids: Vec<usize> = (0..n).collect();
    ids.shuffle(&mut rng);
    let mut graphs = vec![g];
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut virtual_ids = Vec::new();
    let (mut pos, mut neg) = (Vec::new(), Vec::new());
    match loss {
        LossCase::Ff | LossCase::Symba => {
            let other = random_graph(n, 2 * n, &mut rng);
            graphs.push(other);
            rows = ids[..n / 2].to_vec();
        }
        LossCase::Contrastive => {
            virtual_ids = ids[..k].to_vec();
            rows = ids[k..].to_vec();
            labels = rows.iter().map(|_| rng.random_range(0..k)).collect();
        }
        _ => {
            let m = rng.random_range(3..=8);
            pos = random_pairs(n, m, &mut rng);
            neg = random_pairs(n, m, &mut rng);
        }
    }
    let problem = Problem {
        props: graphs.iter().map(|g| Propagation::prepare(arch, g).unwrap()).collect(),
        adjs: graphs.iter().map(dense_adjacency).collect(),
        x,
        loss,
        rows,
        labels,
        virtual_ids,
        pos,
        neg,
    };
    let analytic = problem.analytic(&p).unwrap();
    let numeric = finite_diff_grad(|flat| problem.reference_loss(&p, flat), &p.to_flat(), h).unwrap();
    compare(&analytic, &numeric).unwrap()
}

/// The two-block SBM instance used by the learning checks, with the
/// 64/16/20 node split drawn from `seed`.
pub fn sbm_fixture(seed: u64) -> (Graph, fwdgraph::graph::NodeTable) {
    let (g, nt) = fwdgraph::graph::generate_sbm(&fwdgraph::graph::SbmConfig::default(), &mut seeded_rng(seed, 0)).unwrap();
    let nt = fwdgraph::cli::ensure_node_split(nt, seed).unwrap();
    (g, nt)
}

/// Records layer fingerprints seen by the trainer and flags any update that
/// alters a layer other than the one being trained.
#[derive(Default)]
pub struct IsolationObserver {
    /// Fingerprint of each layer the first time it was reported as frozen.
    pub frozen: Vec<String>,
    /// Latest fingerprint of every layer, for jointly trained stacks.
    pub latest: Vec<Option<String>>,
    pub last_layer: usize,
    pub updates: usize,
    pub violations: Vec<String>,
    pub joint: bool,
}

impl IsolationObserver {
    pub fn greedy() -> Self {
        Self::default()
    }

    pub fn joint() -> Self {
        IsolationObserver { joint: true, ..Self::default() }
    }
}

impl fwdgraph::train::TrainObserver for IsolationObserver {
    fn on_update(&mut self, layer: usize, epoch: usize, frozen: &[LayerParams], current: &LayerParams) {
        self.updates += 1;
        if self.joint {
            if self.latest.len() <= layer {
                self.latest.resize(layer + 1, None);
            }
            for (l, p) in frozen.iter().enumerate() {
                if let Some(seen) = &self.latest[l] {
                    if *seen != p.fingerprint() {
                        self.violations.push(format!("layer {l} changed while layer {layer} stepped at epoch {epoch}"));
                    }
                }
            }
            self.latest[layer] = Some(current.fingerprint());
            return;
        }
        if layer < self.last_layer {
            self.violations.push(format!("layer {layer} updated after layer {} started", self.last_layer));
        }
        self.last_layer = layer;
        for (l, p) in frozen.iter().enumerate() {
            let fp = p.fingerprint();
            if l == self.frozen.len() {
                self.frozen.push(fp);
            } else if self.frozen[l] != fp {
                self.violations.push(format!("frozen layer {l} changed while layer {layer} trained at epoch {epoch}"));
            }
        }
    }
}

pub mod props {
    //! Invariant checks shared by the proptest suite and the acceptance run.

    use fwdgraph::eval::{roc_auc, argmax};
    use fwdgraph::graph::{Graph, NodeTable, Split};
    use fwdgraph::inference::predict_ff;
    use fwdgraph::kernel::row_l2_normalize;
    use fwdgraph::layers::{layer_output, Architecture, LayerParams, Propagation};
    use fwdgraph::losses::class_probabilities;
    use fwdgraph::seeded_rng;
    use fwdgraph::train::{Method, TrainConfig, TrainedModel};
    use proptest::prelude::*;
    use proptest::test_runner::TestCaseError;
    use rand::Rng;

    use super::{random_graph, random_matrix};

    fn arch_of(i: u8) -> Architecture {
        super::ARCHS[i as usize % 3]
    }

    /// Normalized layer outputs have unit rows, or zero rows where the
    /// activation vanished.
    pub fn unit_rows(seed: u64, arch: u8, n: usize, f_in: usize, f_out: usize) -> Result<(), TestCaseError> {
        let mut rng = seeded_rng(seed, 3);
        let arch = arch_of(arch);
        let g = random_graph(n, 2 * n, &mut rng);
        let x = random_matrix(n, f_in, 2.0, &mut rng);
        let p = LayerParams::init(arch, f_in, 2 * f_out, 2, &mut rng).unwrap();
        let h = layer_output(&Propagation::prepare(arch, &g).unwrap(), &x, &p).unwrap();
        let z = row_l2_normalize(&h);
        for i in 0..n {
            let norm = z.row(i).iter().map(|v| v * v).sum::<f64>().sqrt();
            let zero = h.row(i).iter().all(|&v| v == 0.0);
            prop_assert!(if zero { norm == 0.0 } else { (norm - 1.0).abs() <= 1e-12 }, "row {i} norm {norm}");
        }
        Ok(())
    }

    /// Class distributions over virtual nodes sum to one for every row.
    pub fn softmax_rows(seed: u64, n: usize, k: usize, width: usize, scale: f64, tau: f64) -> Result<(), TestCaseError> {
        let mut rng = seeded_rng(seed, 4);
        let h = random_matrix(n + k, width, scale, &mut rng);
        let rows: Vec<usize> = (0..n).collect();
        let virt: Vec<usize> = (n..n + k).collect();
        let p = class_probabilities(&h, &rows, &virt, tau);
        for r in 0..n {
            let s: f64 = p.row(r).iter().sum();
            prop_assert!((s - 1.0).abs() <= 1e-12, "row {r} sums to {s}");
            prop_assert!(p.row(r).iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
        Ok(())
    }

    fn random_ff_model(method: Method, arch: Architecture, rng: &mut impl Rng, n: usize, k: usize) -> (Graph, NodeTable, TrainedModel) {
        let f = rng.random_range(2..=5);
        let g = random_graph(n, 2 * n, rng);
        let x = random_matrix(n, f, 1.0, rng);
        let labels: Vec<Option<usize>> = (0..n).map(|i| Some(if i < k { i } else { rng.random_range(0..k) })).collect();
        let split: Vec<Split> = (0..n)
            .map(|i| if i < n / 2 { Split::Train } else if i < 3 * n / 4 { Split::Val } else { Split::Test })
            .collect();
        let nt = NodeTable::new(x, labels, k).unwrap().with_split(split).unwrap();
        let mut cfg = TrainConfig::new(method, arch, rng.random_range(1..=2));
        cfg.hidden = 6;
        let d_in = if method == Method::FfLa { f + k } else { f };
        let layers = (0..cfg.layers)
            .map(|l| LayerParams::init(arch, if l == 0 { d_in } else { cfg.hidden }, cfg.hidden, cfg.heads, rng).unwrap())
            .collect();
        let model = TrainedModel { config: cfg, input_dim: f, num_classes: k, layers, top_down_store: None };
        (g, nt, model)
    }

    /// Goodness-accumulation predictions are the row argmax of the scores,
    /// follow the targets under reordering, and ignore a positive rescaling
    /// of every parameter of a GCN or SAGE stack.
    pub fn ff_argmax(seed: u64, method: u8, arch: u8, n: usize, k: usize, c: f64) -> Result<(), TestCaseError> {
        let mut rng = seeded_rng(seed, 5);
        let method = [Method::FfVn, Method::FfLa, Method::FfSymba][method as usize % 3];
        let arch = [Architecture::Gcn, Architecture::Sage][arch as usize % 2];
        let (g, nt, model) = random_ff_model(method, arch, &mut rng, n, k);
        let targets: Vec<usize> = (n / 2..n).collect();
        let base = predict_ff(&model, &g, &nt, &targets).unwrap();
        for (r, &l) in base.labels.iter().enumerate() {
            prop_assert_eq!(l, argmax(base.scores.row(r)));
        }

        let reversed: Vec<usize> = targets.iter().rev().copied().collect();
        let rev = predict_ff(&model, &g, &nt, &reversed).unwrap();
        let mut back = rev.labels.clone();
        back.reverse();
        prop_assert_eq!(&back, &base.labels);

        let mut scaled = model.clone();
        scaled.layers = model.layers.iter().map(|p| p.scaled(c)).collect();
        let s = predict_ff(&scaled, &g, &nt, &targets).unwrap();
        for r in 0..targets.len() {
            // goodness scales by c^2 in every layer; skip near-ties
            let row = base.scores.row(r);
            let mut sorted = row.to_vec();
            sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
            if sorted.len() > 1 && sorted[0] - sorted[1] <= 1e-9 * sorted[0].abs().max(1.0) {
                continue;
            }
            prop_assert_eq!(s.labels[r], base.labels[r], "row {} scores {:?} vs {:?}", r, row, s.scores.row(r));
        }
        Ok(())
    }

    /// ROC-AUC depends only on the ranking of scores, and swapping the two
    /// classes reflects it around one half.
    pub fn auc_monotone(scores: Vec<f64>, labels: Vec<bool>, a: f64, b: f64) -> Result<(), TestCaseError> {
        let n = scores.len().min(labels.len());
        let (scores, labels) = (&scores[..n], &labels[..n]);
        prop_assume!(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l));
        let base = roc_auc(scores, labels).unwrap();
        let affine: Vec<f64> = scores.iter().map(|s| a * s + b).collect();
        let cubic: Vec<f64> = scores.iter().map(|s| s * s * s + s).collect();
        let logistic: Vec<f64> = scores.iter().map(|s| 1.0 / (1.0 + (-s).exp())).collect();
        for t in [affine, cubic, logistic] {
            // the transform must keep distinct scores distinct to preserve the ranking
            let distinct = |v: &[f64]| {
                let mut s = v.to_vec();
                s.sort_by(|x, y| x.partial_cmp(y).unwrap());
                s.dedup();
                s.len()
            };
            prop_assume!(distinct(&t) == distinct(scores));
            let r = roc_auc(&t, labels).unwrap();
            prop_assert!((r - base).abs() <= 1e-12, "{} vs {}", r, base);
        }
        let flipped: Vec<bool> = labels.iter().map(|l| !l).collect();
        let c = roc_auc(scores, &flipped).unwrap();
        prop_assert!((base + c - 1.0).abs() <= 1e-12);
        Ok(())
    }

    /// 1000 cases, no regression files.
    pub fn config() -> ProptestConfig {
        ProptestConfig { cases: 1000, failure_persistence: None, ..ProptestConfig::default() }
    }

    pub fn unit_rows_strategy() -> impl Strategy<Value = (u64, u8, usize, usize, usize)> {
        (any::<u64>(), 0u8..3, 2usize..16, 1usize..8, 1usize..8)
    }

    pub fn softmax_strategy() -> impl Strategy<Value = (u64, usize, usize, usize, f64, f64)> {
        (any::<u64>(), 1usize..20, 2usize..6, 1usize..10, 0.01f64..30.0, 0.05f64..5.0)
    }

    pub fn ff_argmax_strategy() -> impl Strategy<Value = (u64, u8, u8, usize, usize, f64)> {
        (any::<u64>(), 0u8..3, 0u8..2, 6usize..14, 2usize..4, 0.1f64..10.0)
    }

    pub fn auc_strategy() -> impl Strategy<Value = (Vec<f64>, Vec<bool>, f64, f64)> {
        (
            prop::collection::vec(-5.0f64..5.0, 2..40),
            prop::collection::vec(any::<bool>(), 2..40),
            0.01f64..100.0,
            -10.0f64..10.0,
        )
    }
}
