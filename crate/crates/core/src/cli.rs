//! Command-line front end: `train`, `generate-sbm` and `evaluate`.

use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::eval::{
    accuracy, load_dataset, load_model, save_dataset, save_model, write_report, EvalReport, SCHEMA_VERSION,
};
use crate::graph::{
    generate_sbm, split_edges_with_negatives, split_nodes, EdgeSplit, Graph, NodeTable, SbmConfig, Split, SplitRatios,
    VirtualEdges, VirtualFeatures,
};
use crate::inference::predict_nodes;
use crate::layers::Architecture;
use crate::seeded_rng;
use crate::train::{
    link_auc, train_link_prediction, train_node_classification, Method, NoopObserver, Task, TrainConfig,
    TrainedModel, UpdateMode,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

/// RNG stream of the node split assigned to datasets without one.
pub const NODE_SPLIT_STREAM: u64 = 1;
/// RNG stream of the link-prediction edge split.
pub const EDGE_SPLIT_STREAM: u64 = 2;

#[derive(Parser, Debug)]
#[command(name = "fwdgraph", version, about = "Layer-local training of graph neural networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a model and write a JSON report.
    Train(TrainArgs),
    /// Write a stochastic-block-model dataset directory.
    GenerateSbm(SbmArgs),
    /// Score a saved model on a dataset.
    Evaluate(EvalArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TaskArg {
    Node,
    Link,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long, value_enum)]
    task: TaskArg,
    #[arg(long, value_parser = parse_method)]
    method: Method,
    #[arg(long, value_parser = parse_arch)]
    model: Architecture,
    #[arg(long)]
    layers: usize,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 128)]
    hidden: usize,
    #[arg(long, default_value_t = crate::layers::GAT_HEADS)]
    heads: usize,
    #[arg(long, default_value_t = 1000)]
    epochs: usize,
    #[arg(long, default_value_t = 100)]
    patience: usize,
    #[arg(long, default_value_t = 0.001)]
    lr: f64,
    #[arg(long, default_value_t = 0.0005)]
    weight_decay: f64,
    #[arg(long, default_value_t = 2.0)]
    theta: f64,
    #[arg(long, default_value_t = 1.0)]
    tau: f64,
    #[arg(long, default_value_t = 4.0)]
    alpha: f64,
    #[arg(long, value_enum, default_value = "sync")]
    update_mode: UpdateModeArg,
    #[arg(long, value_enum, default_value = "bidirectional")]
    virtual_edges: VirtualEdgesArg,
    #[arg(long, value_enum, default_value = "class-mean")]
    virtual_features: VirtualFeaturesArg,
    /// L2-normalize embeddings between single-forward layers.
    #[arg(long)]
    sf_normalize: bool,
    /// Also save the trained model here.
    #[arg(long)]
    model_out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum UpdateModeArg {
    Sync,
    Async,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum VirtualEdgesArg {
    Bidirectional,
    Unidirectional,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum VirtualFeaturesArg {
    ClassMean,
    Zero,
}

#[derive(Args, Debug)]
struct SbmArgs {
    #[arg(long, value_delimiter = ',', default_value = "100,100")]
    blocks: Vec<usize>,
    #[arg(long, default_value_t = 0.1)]
    p_in: f64,
    #[arg(long, default_value_t = 0.01)]
    p_out: f64,
    #[arg(long, default_value_t = 16)]
    dim: usize,
    #[arg(long, default_value_t = 2.0)]
    sep: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    Method::parse(s).ok_or_else(|| {
        let names: Vec<&str> = Method::ALL.iter().map(|m| m.as_str()).collect();
        format!("unknown method `{s}` (expected one of {})", names.join(", "))
    })
}

fn parse_arch(s: &str) -> std::result::Result<Architecture, String> {
    match s {
        "gcn" => Ok(Architecture::Gcn),
        "sage" => Ok(Architecture::Sage),
        "gat" => Ok(Architecture::Gat),
        _ => Err(format!("unknown model `{s}` (expected gcn, sage or gat)")),
    }
}

impl TrainArgs {
    fn config(&self) -> TrainConfig {
        let mut c = TrainConfig::new(self.method, self.model, self.layers);
        c.task = match self.task {
            TaskArg::Node => Task::NodeClass,
            TaskArg::Link => Task::LinkPred,
        };
        c.hidden = self.hidden;
        c.heads = self.heads;
        c.max_epochs = self.epochs;
        c.patience = self.patience;
        c.lr = self.lr;
        c.weight_decay = self.weight_decay;
        c.theta = self.theta;
        c.tau = self.tau;
        c.alpha = self.alpha;
        c.seed = self.seed;
        c.update_mode = match self.update_mode {
            UpdateModeArg::Sync => UpdateMode::Sync,
            UpdateModeArg::Async => UpdateMode::Async,
        };
        c.virtual_edges = match self.virtual_edges {
            VirtualEdgesArg::Bidirectional => VirtualEdges::Bidirectional,
            VirtualEdgesArg::Unidirectional => VirtualEdges::Unidirectional,
        };
        c.virtual_features = match self.virtual_features {
            VirtualFeaturesArg::ClassMean => VirtualFeatures::ClassMean,
            VirtualFeaturesArg::Zero => VirtualFeatures::Zero,
        };
        c.sf_normalize = self.sf_normalize;
        c
    }
}

/// Gives `nt` the default 64/16/20 split drawn from `seed` unless it has one.
pub fn ensure_node_split(nt: NodeTable, seed: u64) -> Result<NodeTable> {
    if nt.has_split() {
        return Ok(nt);
    }
    let split = split_nodes(nt.num_nodes(), SplitRatios::default(), &mut seeded_rng(seed, NODE_SPLIT_STREAM))?;
    nt.with_split(split)
}

/// The 64/16/20 edge split drawn from `seed`.
pub fn edge_split(g: &Graph, seed: u64) -> Result<EdgeSplit> {
    split_edges_with_negatives(g, SplitRatios::default(), &mut seeded_rng(seed, EDGE_SPLIT_STREAM))
}

fn train(args: TrainArgs) -> std::result::Result<(), (i32, Error)> {
    let cfg = args.config();
    cfg.validate().map_err(|e| (EXIT_USAGE, e))?;
    let data = |e| (EXIT_DATA, e);
    let (g, nt) = load_dataset(&args.data).map_err(data)?;
    let (model, report) = match cfg.task {
        Task::NodeClass => {
            let nt = ensure_node_split(nt, cfg.seed).map_err(data)?;
            train_node_classification(&cfg, &g, &nt, &mut NoopObserver).map_err(data)?
        }
        Task::LinkPred => {
            let split = edge_split(&g, cfg.seed).map_err(data)?;
            train_link_prediction(&cfg, &g, &split, &nt, &mut NoopObserver).map_err(data)?
        }
    };
    write_report(&report, &args.out).map_err(data)?;
    if let Some(path) = &args.model_out {
        save_model(&model, path).map_err(data)?;
    }
    Ok(())
}

fn generate(args: SbmArgs) -> std::result::Result<(), (i32, Error)> {
    let cfg = SbmConfig {
        block_sizes: args.blocks,
        p_in: args.p_in,
        p_out: args.p_out,
        feature_dim: args.dim,
        class_separation: args.sep,
    };
    let (g, nt) = generate_sbm(&cfg, &mut seeded_rng(args.seed, 0)).map_err(|e| (EXIT_USAGE, e))?;
    let nt = ensure_node_split(nt, args.seed).map_err(|e| (EXIT_USAGE, e))?;
    save_dataset(&args.out, &g, &nt).map_err(|e| (EXIT_DATA, e))
}

fn node_accuracy(model: &TrainedModel, g: &Graph, nt: &NodeTable, which: Split) -> Result<f64> {
    let targets: Vec<usize> = nt.nodes_in(which).into_iter().filter(|&i| nt.label(i).is_some()).collect();
    if targets.is_empty() {
        return Ok(f64::NAN);
    }
    let p = predict_nodes(model, g, nt, &targets)?;
    let mut pred = vec![0; nt.num_nodes()];
    for (&i, &l) in targets.iter().zip(&p.labels) {
        pred[i] = l;
    }
    accuracy(&pred, nt.labels(), &targets)
}

fn evaluate(args: EvalArgs) -> std::result::Result<(), (i32, Error)> {
    let started = Instant::now();
    let data = |e| (EXIT_DATA, e);
    let model = load_model(&args.model).map_err(data)?;
    let (g, nt) = load_dataset(&args.data).map_err(data)?;
    let cfg = &model.config;
    if nt.feature_dim() != model.input_dim {
        return Err(data(Error::dims("evaluate features", model.input_dim, nt.feature_dim())));
    }
    let (metric, val, test) = match cfg.task {
        Task::NodeClass => {
            let nt = ensure_node_split(nt, cfg.seed).map_err(data)?;
            let val = node_accuracy(&model, &g, &nt, Split::Val).map_err(data)?;
            let test = node_accuracy(&model, &g, &nt, Split::Test).map_err(data)?;
            ("accuracy", val, test)
        }
        Task::LinkPred => {
            let split = edge_split(&g, cfg.seed).map_err(data)?;
            let val = link_auc(&model, &split, &nt, &split.pos_val, &split.neg_val).map_err(data)?;
            let test = link_auc(&model, &split, &nt, &split.pos_test, &split.neg_test).map_err(data)?;
            ("roc_auc", val, test)
        }
    };
    let report = EvalReport {
        schema_version: SCHEMA_VERSION.to_string(),
        config: cfg.clone(),
        metric: metric.to_string(),
        val_metric: val,
        test_metric: test,
        model_fingerprint: model.fingerprint(),
        seed: cfg.seed,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    write_report(&report, &args.out).map_err(data)
}

/// Runs one command; `argv[0]` is the program name. Returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Train(a) => train(a),
        Command::GenerateSbm(a) => generate(a),
        Command::Evaluate(a) => evaluate(a),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err((code, e)) => {
            eprintln!("error: {e}");
            code
        }
    }
}
