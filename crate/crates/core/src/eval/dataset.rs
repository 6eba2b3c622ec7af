use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeTable, Split};
use crate::kernel::DenseMatrix;

pub const EDGES_FILE: &str = "edges.tsv";
pub const FEATURES_FILE: &str = "features.tsv";
pub const LABELS_FILE: &str = "labels.tsv";
pub const SPLITS_FILE: &str = "splits.tsv";

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Non-empty lines with their 1-based line numbers.
fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty())
}

fn parse_id(path: &Path, line: usize, field: &str, n: usize) -> Result<usize> {
    let id: usize = field
        .trim()
        .parse()
        .map_err(|_| parse_err(path, line, format!("invalid node id `{field}`")))?;
    if id >= n {
        return Err(parse_err(path, line, format!("node id {id} out of range (nodes={n})")));
    }
    Ok(id)
}

fn parse_header(path: &Path, line: &str) -> Result<(usize, usize, usize)> {
    let body = line
        .strip_prefix('#')
        .ok_or_else(|| parse_err(path, 1, "expected header `#nodes=N\\tdim=F\\tclasses=K`"))?;
    let mut nodes = None;
    let mut dim = None;
    let mut classes = None;
    for part in body.split('\t') {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| parse_err(path, 1, format!("malformed header field `{part}`")))?;
        let value: usize = value
            .trim()
            .parse()
            .map_err(|_| parse_err(path, 1, format!("invalid header value `{value}`")))?;
        match key.trim() {
            "nodes" => nodes = Some(value),
            "dim" => dim = Some(value),
            "classes" => classes = Some(value),
            other => return Err(parse_err(path, 1, format!("unknown header key `{other}`"))),
        }
    }
    match (nodes, dim, classes) {
        (Some(n), Some(f), Some(k)) => Ok((n, f, k)),
        _ => Err(parse_err(path, 1, "header must define nodes, dim and classes")),
    }
}

/// Reads a dataset directory. The graph is undirected; labels and splits
/// are attached when their files exist.
pub fn load_dataset(dir: impl AsRef<Path>) -> Result<(Graph, NodeTable)> {
    let dir = dir.as_ref();
    let fpath = dir.join(FEATURES_FILE);
    let text = read(&fpath)?;
    let mut it = lines(&text);
    let (_, header) = it.next().ok_or_else(|| parse_err(&fpath, 1, "empty features file"))?;
    let (n, f, k) = parse_header(&fpath, header)?;
    let mut features = DenseMatrix::zeros(n, f);
    let mut seen = vec![false; n];
    for (ln, line) in it {
        let mut fields = line.split('\t');
        let id = parse_id(&fpath, ln, fields.next().unwrap_or(""), n)?;
        if seen[id] {
            return Err(parse_err(&fpath, ln, format!("duplicate feature row for node {id}")));
        }
        seen[id] = true;
        let values: Vec<&str> = fields.collect();
        if values.len() != f {
            return Err(parse_err(&fpath, ln, format!("expected {f} feature values, found {}", values.len())));
        }
        for (c, v) in values.iter().enumerate() {
            let x: f64 = v
                .trim()
                .parse()
                .map_err(|_| parse_err(&fpath, ln, format!("invalid number `{v}`")))?;
            if !x.is_finite() {
                return Err(parse_err(&fpath, ln, format!("non-finite feature `{v}`")));
            }
            features.set(id, c, x);
        }
    }
    if let Some(missing) = seen.iter().position(|&s| !s) {
        return Err(parse_err(&fpath, 0, format!("missing feature row for node {missing}")));
    }

    let epath = dir.join(EDGES_FILE);
    let mut edges = Vec::new();
    for (ln, line) in lines(&read(&epath)?) {
        let (u, v) = line
            .split_once('\t')
            .ok_or_else(|| parse_err(&epath, ln, "expected `src\\tdst`"))?;
        edges.push((parse_id(&epath, ln, u, n)?, parse_id(&epath, ln, v, n)?));
    }
    let graph = Graph::build(&edges, n, false)?;

    let mut labels = vec![None; n];
    let lpath = dir.join(LABELS_FILE);
    if lpath.exists() {
        for (ln, line) in lines(&read(&lpath)?) {
            let (id, class) = line
                .split_once('\t')
                .ok_or_else(|| parse_err(&lpath, ln, "expected `node_id\\tclass`"))?;
            let id = parse_id(&lpath, ln, id, n)?;
            let class: usize = class
                .trim()
                .parse()
                .map_err(|_| parse_err(&lpath, ln, format!("invalid class `{class}`")))?;
            if class >= k {
                return Err(parse_err(&lpath, ln, format!("class {class} >= classes={k}")));
            }
            labels[id] = Some(class);
        }
    }
    let mut table = NodeTable::new(features, labels, k)?;

    let spath = dir.join(SPLITS_FILE);
    if spath.exists() {
        let mut split = vec![Split::Unassigned; n];
        for (ln, line) in lines(&read(&spath)?) {
            let (id, which) = line
                .split_once('\t')
                .ok_or_else(|| parse_err(&spath, ln, "expected `node_id\\t{train|val|test}`"))?;
            let id = parse_id(&spath, ln, id, n)?;
            split[id] = match which.trim() {
                "train" => Split::Train,
                "val" => Split::Val,
                "test" => Split::Test,
                other => return Err(parse_err(&spath, ln, format!("unknown split `{other}`"))),
            };
        }
        table = table.with_split(split)?;
    }
    Ok((graph, table))
}

fn write_file(path: PathBuf, body: String) -> Result<()> {
    let mut file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    file.write_all(body.as_bytes()).map_err(|e| Error::io(&path, e))
}

/// Writes `g` and `nt` in the directory format read by [`load_dataset`].
/// Labels and splits are written only when present.
pub fn save_dataset(dir: impl AsRef<Path>, g: &Graph, nt: &NodeTable) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    if g.num_nodes() != nt.num_nodes() {
        return Err(Error::dims("save_dataset", g.num_nodes(), nt.num_nodes()));
    }
    let mut edges = String::new();
    for (u, v) in g.canonical_edges() {
        edges.push_str(&format!("{u}\t{v}\n"));
    }
    write_file(dir.join(EDGES_FILE), edges)?;

    let mut feats = format!("#nodes={}\tdim={}\tclasses={}\n", nt.num_nodes(), nt.feature_dim(), nt.num_classes());
    for i in 0..nt.num_nodes() {
        feats.push_str(&i.to_string());
        for v in nt.features().row(i) {
            feats.push_str(&format!("\t{v}"));
        }
        feats.push('\n');
    }
    write_file(dir.join(FEATURES_FILE), feats)?;

    if nt.has_labels() {
        let mut labels = String::new();
        for (i, l) in nt.labels().iter().enumerate() {
            if let Some(c) = l {
                labels.push_str(&format!("{i}\t{c}\n"));
            }
        }
        write_file(dir.join(LABELS_FILE), labels)?;
    }
    if nt.has_split() {
        let mut splits = String::new();
        for (i, s) in nt.split().iter().enumerate() {
            if *s != Split::Unassigned {
                splits.push_str(&format!("{i}\t{}\n", s.as_str()));
            }
        }
        write_file(dir.join(SPLITS_FILE), splits)?;
    }
    Ok(())
}
