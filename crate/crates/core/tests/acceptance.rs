//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fails.

mod common;

use std::path::Path;
use std::time::Instant;

use common::*;
use fwdgraph::cli;
use fwdgraph::eval::roc_auc;
use fwdgraph::graph::{EdgeSplit, Graph, NodeTable};
use fwdgraph::inference::ff_training_goodness;
use fwdgraph::layers::{layer_output, Architecture, LayerParams, Propagation};
use fwdgraph::seeded_rng;
use fwdgraph::testkit::{dense_adjacency, dense_forward_oracle};
use fwdgraph::train::{
    link_auc, train_link_prediction, train_node_classification, Method, NoopObserver, Task, TrainConfig,
};
use proptest::test_runner::TestRunner;
use rand::Rng;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn gradients() -> Verdict {
    let started = Instant::now();
    let mut worst = (0.0f64, String::new());
    for arch in ARCHS {
        for loss in LOSSES {
            for seed in 0..20 {
                let r = gradient_check(arch, loss, seed, 1e-5);
                if r.max_rel_err > worst.0 {
                    worst = (r.max_rel_err, format!("{arch:?}/{loss:?}/seed {seed}"));
                }
            }
        }
    }
    let secs = started.elapsed().as_secs_f64();
    verdict(
        worst.0 <= 1e-4 && secs < 60.0,
        format!("360 instances, worst rel err {:.2e} at {}, {secs:.1}s", worst.0, worst.1),
    )
}

fn sparse_dense() -> Verdict {
    let mut rng = seeded_rng(2, 0);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let n = rng.random_range(2..=30);
        let g = random_graph(n, rng.random_range(0..=3 * n), &mut rng);
        let f_in = rng.random_range(1..=8);
        let x = random_matrix(n, f_in, 1.0, &mut rng);
        let adj = dense_adjacency(&g);
        for arch in ARCHS {
            let heads = if arch == Architecture::Gat { [1, 2, 4][rng.random_range(0..3)] } else { 1 };
            let p = LayerParams::init(arch, f_in, 4 * heads, heads, &mut rng).unwrap();
            let sparse = layer_output(&Propagation::prepare(arch, &g).unwrap(), &x, &p).unwrap();
            let dense = dense_forward_oracle(&p, &adj, &x).unwrap();
            worst = worst.max(sparse.max_abs_diff(&dense));
        }
    }
    verdict(worst <= 1e-12, format!("150 forwards, max abs err {worst:.2e}"))
}

fn node_learning() -> Verdict {
    let started = Instant::now();
    let (g, nt) = sbm_fixture(0);
    let mut sf = TrainConfig::new(Method::Sf, Architecture::Gcn, 1);
    sf.max_epochs = 300;
    let (_, sf_report) = train_node_classification(&sf, &g, &nt, &mut NoopObserver).unwrap();

    let mut ff = TrainConfig::new(Method::FfVn, Architecture::Gcn, 1);
    ff.max_epochs = 300;
    let (model, ff_report) = train_node_classification(&ff, &g, &nt, &mut NoopObserver).unwrap();
    let (pos, neg) = ff_training_goodness(&model, &g, &nt).unwrap();
    let frac = pos.iter().zip(&neg).filter(|(p, n)| p > n).count() as f64 / pos.len() as f64;
    let secs = started.elapsed().as_secs_f64();
    verdict(
        sf_report.test_metric >= 0.90 && frac >= 0.90 && ff_report.test_metric >= 0.75 && secs < 120.0,
        format!(
            "SF test acc {:.3}; FF-VN pos>neg on {:.1}% of train nodes, test acc {:.3}; {secs:.1}s",
            sf_report.test_metric,
            100.0 * frac,
            ff_report.test_metric
        ),
    )
}

/// AUC of the score "1 if both endpoints share a block".
fn block_oracle_auc(nt: &NodeTable, split: &EdgeSplit) -> f64 {
    let same = |&(u, v): &(usize, usize)| if nt.label(u) == nt.label(v) { 1.0 } else { 0.0 };
    let scores: Vec<f64> = split.pos_test.iter().chain(&split.neg_test).map(same).collect();
    let labels: Vec<bool> = (0..scores.len()).map(|i| i < split.pos_test.len()).collect();
    roc_auc(&scores, &labels).unwrap()
}

fn link_learning() -> Verdict {
    let started = Instant::now();
    let (g, nt) = sbm_fixture(0);
    let split = cli::edge_split(&g, 0).unwrap();
    let cfg = TrainConfig::new(Method::LpCe, Architecture::Gcn, 2);
    let (_, report) = train_link_prediction(&cfg, &g, &split, &nt, &mut NoopObserver).unwrap();

    let mut untrained = cfg.clone();
    untrained.max_epochs = 1;
    untrained.patience = 0;
    let (m0, _) = train_link_prediction(&untrained, &g, &split, &nt, &mut NoopObserver).unwrap();
    let auc0 = link_auc(&m0, &split, &nt, &split.pos_test, &split.neg_test).unwrap();
    let secs = started.elapsed().as_secs_f64();
    verdict(
        report.test_metric >= 0.80 && (auc0 - 0.5).abs() <= 0.05 && secs < 120.0,
        format!(
            "trained test AUC {:.3} (need >= 0.80), untrained {:.3} (need 0.5 +/- 0.05), same-block oracle AUC {:.3}; {secs:.1}s",
            report.test_metric,
            auc0,
            block_oracle_auc(&nt, &split)
        ),
    )
}

fn memory() -> Verdict {
    let (g, nt) = sbm_fixture(0);
    let mut adjusted = Vec::new();
    let mut one_layer_state = true;
    for layers in 1..=4 {
        let mut cfg = TrainConfig::new(Method::Sf, Architecture::Gcn, layers);
        cfg.max_epochs = 100;
        let (model, report) = train_node_classification(&cfg, &g, &nt, &mut NoopObserver).unwrap();
        let retained: usize = model.layers[..layers - 1].iter().map(LayerParams::byte_size).sum();
        adjusted.push(report.memory.peak_bytes - retained);
        one_layer_state &= report.memory.max_layers_with_optimizer_state == 1;
    }
    let lo = *adjusted.iter().min().unwrap() as f64;
    let hi = *adjusted.iter().max().unwrap() as f64;
    let spread = hi / lo - 1.0;
    let deep = &adjusted[1..];
    let deep_spread = *deep.iter().max().unwrap() as f64 / *deep.iter().min().unwrap() as f64 - 1.0;
    verdict(
        spread <= 0.10 && one_layer_state,
        format!(
            "peak minus retained frozen params, L=1..4: {adjusted:?} bytes; spread {:.1}% (L=2..4: {:.1}%); one layer of optimizer state live: {one_layer_state}",
            100.0 * spread,
            100.0 * deep_spread
        ),
    )
}

fn run_observed(method: Method, g: &Graph, nt: &NodeTable, split: &EdgeSplit) -> (IsolationObserver, Vec<(usize, usize)>, usize) {
    let mut cfg = TrainConfig::new(method, Architecture::Gcn, 3);
    cfg.hidden = 32;
    cfg.max_epochs = 40;
    cfg.patience = 5;
    let mut obs = if method.is_top_down() { IsolationObserver::joint() } else { IsolationObserver::greedy() };
    let report = match cfg.task {
        Task::NodeClass => train_node_classification(&cfg, g, nt, &mut obs).unwrap().1,
        Task::LinkPred => train_link_prediction(&cfg, g, split, nt, &mut obs).unwrap().1,
    };
    let curves = report.curves.iter().map(|c| (c.best_epoch, c.stopped_epoch)).collect();
    (obs, curves, cfg.patience)
}

fn cli_report(dir: &Path, args: &[&str], out: &str) -> String {
    let out = dir.join(out);
    let mut argv = vec!["fwdgraph", "train"];
    argv.extend_from_slice(args);
    let data = dir.join("data");
    argv.extend_from_slice(&["--data", data.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(cli::run(&argv), 0, "cli {argv:?}");
    let text = std::fs::read_to_string(out).unwrap();
    text.lines().filter(|l| !l.contains("\"wall_clock_seconds\"")).collect::<Vec<_>>().join("\n")
}

fn protocol() -> Verdict {
    let (g, nt) = sbm_fixture(0);
    let split = cli::edge_split(&g, 0).unwrap();
    let mut problems = Vec::new();
    let mut early = 0;
    for method in Method::ALL {
        let (obs, curves, patience) = run_observed(method, &g, &nt, &split);
        if obs.updates == 0 {
            problems.push(format!("{method}: no updates observed"));
        }
        if !obs.joint && obs.frozen.len() != 2 {
            problems.push(format!("{method}: {} layers seen frozen", obs.frozen.len()));
        }
        problems.extend(obs.violations.iter().map(|v| format!("{method}: {v}")));
        for (best, stopped) in curves {
            if stopped > best + patience + 1 {
                problems.push(format!("{method}: stopped at {stopped}, best {best}"));
            }
            early += usize::from(stopped + 1 < 40);
        }
    }
    if early == 0 {
        problems.push("no run stopped early".into());
    }

    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    assert_eq!(cli::run(["fwdgraph", "generate-sbm", "--seed", "0", "--out", data.to_str().unwrap()]), 0);
    for args in [
        ["--task", "node", "--method", "sf", "--model", "gcn", "--layers", "2", "--epochs", "60", "--patience", "10"],
        ["--task", "link", "--method", "lp_ce", "--model", "gat", "--layers", "2", "--epochs", "60", "--patience", "10"],
    ] {
        if cli_report(dir.path(), &args, "a.json") != cli_report(dir.path(), &args, "b.json") {
            problems.push(format!("reports differ for {args:?}"));
        }
    }
    verdict(
        problems.is_empty(),
        if problems.is_empty() {
            format!("isolation holds for all {} methods, {early} early stops within patience, CLI reports identical", Method::ALL.len())
        } else {
            problems.join("; ")
        },
    )
}

fn invariants() -> Verdict {
    use common::props::*;
    let runner = || TestRunner::new(config());
    let results: [(&str, Result<(), String>); 4] = [
        ("unit rows", runner().run(&unit_rows_strategy(), |(s, a, n, i, o)| unit_rows(s, a, n, i, o)).map_err(|e| e.to_string())),
        ("softmax sums", runner().run(&softmax_strategy(), |(s, n, k, w, c, t)| softmax_rows(s, n, k, w, c, t)).map_err(|e| e.to_string())),
        ("ff argmax", runner().run(&ff_argmax_strategy(), |(s, m, a, n, k, c)| ff_argmax(s, m, a, n, k, c)).map_err(|e| e.to_string())),
        ("auc monotone", runner().run(&auc_strategy(), |(s, l, a, b)| auc_monotone(s, l, a, b)).map_err(|e| e.to_string())),
    ];
    let failed: Vec<String> = results
        .iter()
        .filter_map(|(name, r)| r.as_ref().err().map(|e| format!("{name}: {e}")))
        .collect();
    verdict(
        failed.is_empty(),
        if failed.is_empty() { "4 properties x 1000 cases".to_string() } else { failed.join("; ") },
    )
}

fn published() -> Option<Verdict> {
    let dir = std::env::var("FWD_CITESEER_DIR").ok()?;
    let (g, nt) = fwdgraph::eval::load_dataset(Path::new(&dir)).unwrap();
    let (mut acc, mut auc) = (0.0, 0.0);
    for seed in 0..5 {
        let nt_s = cli::ensure_node_split(nt.clone(), seed).unwrap();
        let mut sf = TrainConfig::new(Method::Sf, Architecture::Gcn, 2);
        sf.seed = seed;
        acc += train_node_classification(&sf, &g, &nt_s, &mut NoopObserver).unwrap().1.test_metric / 5.0;
        let mut lp = TrainConfig::new(Method::LpCe, Architecture::Gcn, 2);
        lp.seed = seed;
        let split = cli::edge_split(&g, seed).unwrap();
        auc += train_link_prediction(&lp, &g, &split, &nt, &mut NoopObserver).unwrap().1.test_metric / 5.0;
    }
    let (acc, auc) = (100.0 * acc, 100.0 * auc);
    Some(verdict(
        (acc - 94.18).abs() <= 3.0 && (auc - 93.61).abs() <= 3.0,
        format!("{} nodes: SF-GCN acc {acc:.2} (target 94.18), lp_ce AUC {auc:.2} (target 93.61)", g.num_nodes()),
    ))
}

fn main() {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria: [(&str, fn() -> Verdict); 7] = [
        ("1 gradient correctness", gradients),
        ("2 sparse/dense equivalence", sparse_dense),
        ("3 node-task learning", node_learning),
        ("4 link-task learning", link_learning),
        ("5 memory constancy", memory),
        ("6 protocol fidelity", protocol),
        ("7 invariant suites", invariants),
    ];
    let mut failures = 0;
    for (name, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let v = check();
        failures += usize::from(!v.pass);
        println!("{} criterion {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
    }
    if filter.is_empty() || filter.iter().any(|f| "8 published".contains(f.as_str())) {
        match published() {
            Some(v) => {
                failures += usize::from(!v.pass);
                println!("{} criterion 8 published numbers: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
            }
            None => println!("SKIP criterion 8 published numbers: set FWD_CITESEER_DIR to a CiteSeer dataset directory"),
        }
    }
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
}
