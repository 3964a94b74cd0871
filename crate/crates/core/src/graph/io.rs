//! Bundle directory format.
//!
//! ```text
//! meta.txt       key = value: n_nodes, n_edges_directed, feature_dim, n_classes
//! edges.tsv      src<TAB>dst per undirected edge, src < dst, 0-based
//! features.tsv   feature_dim tab-separated reals per node
//! features.bin   u64 rows, u64 cols (LE) then rows*cols f32 (LE), row-major
//! labels.tsv     one class index per line
//! train.idx, val.idx, test.idx   one node index per line
//! ```
//!
//! `features.bin` takes precedence when both feature files exist.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::{adjacency_from_edges, undirected_edges, validate_bundle, GraphBundle, Splits};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FeatureFormat {
    Tsv,
    Bin,
}

struct Ctx<'a> {
    dir: &'a Path,
}

impl Ctx<'_> {
    fn err(&self, detail: impl Into<String>) -> Error {
        Error::Load { path: self.dir.to_path_buf(), detail: detail.into() }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn read(&self, name: &str) -> Result<String> {
        fs::read_to_string(self.path(name)).map_err(|e| self.err(format!("{name}: {e}")))
    }

    fn lines<'s>(&self, text: &'s str) -> impl Iterator<Item = (usize, &'s str)> {
        text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r'))).filter(|(_, l)| !l.trim().is_empty())
    }

    fn parse_indices(&self, name: &str, n: usize) -> Result<Vec<usize>> {
        let text = self.read(name)?;
        self.lines(&text)
            .map(|(ln, l)| {
                let i: usize = l.trim().parse().map_err(|_| self.err(format!("{name}:{ln}: not an index: '{l}'")))?;
                if i >= n {
                    return Err(self.err(format!("{name}:{ln}: index {i} out of range for {n} nodes")));
                }
                Ok(i)
            })
            .collect()
    }
}

fn parse_meta(ctx: &Ctx, text: &str) -> Result<BTreeMap<String, usize>> {
    let mut meta = BTreeMap::new();
    for (ln, line) in ctx.lines(text) {
        if line.trim_start().starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| ctx.err(format!("meta.txt:{ln}: expected key = value")))?;
        let v: usize = v.trim().parse().map_err(|_| ctx.err(format!("meta.txt:{ln}: '{}' is not a count", v.trim())))?;
        meta.insert(k.trim().to_string(), v);
    }
    Ok(meta)
}

pub fn load_bundle(dir: impl AsRef<Path>) -> Result<GraphBundle> {
    let ctx = Ctx { dir: dir.as_ref() };
    let meta = parse_meta(&ctx, &ctx.read("meta.txt")?)?;
    let get = |k: &str| meta.get(k).copied().ok_or_else(|| ctx.err(format!("meta.txt: missing key '{k}'")));
    let n = get("n_nodes")?;
    let n_edges_directed = get("n_edges_directed")?;
    let feature_dim = get("feature_dim")?;
    let n_classes = get("n_classes")?;

    let adjacency = {
        let text = ctx.read("edges.tsv")?;
        let mut pairs = Vec::new();
        for (ln, line) in ctx.lines(&text) {
            let mut it = line.split('\t');
            let (Some(a), Some(b), None) = (it.next(), it.next(), it.next()) else {
                return Err(ctx.err(format!("edges.tsv:{ln}: expected two tab-separated indices")));
            };
            let parse = |s: &str| -> Result<usize> {
                let i: usize = s.trim().parse().map_err(|_| ctx.err(format!("edges.tsv:{ln}: not an index: '{s}'")))?;
                if i >= n {
                    return Err(ctx.err(format!("edges.tsv:{ln}: node {i} out of range for {n} nodes")));
                }
                Ok(i)
            };
            let (a, b) = (parse(a)?, parse(b)?);
            if a == b {
                return Err(ctx.err(format!("edges.tsv:{ln}: self-loop on node {a}")));
            }
            pairs.push((a, b));
        }
        // a file listing any src > dst pair is read as a directed list and must contain both directions
        if pairs.iter().any(|&(a, b)| a > b) {
            let set: HashSet<(usize, usize)> = pairs.iter().copied().collect();
            if let Some(&(a, b)) = pairs.iter().find(|&&(a, b)| !set.contains(&(b, a))) {
                return Err(ctx.err(format!("edges.tsv: asymmetric edge list, ({a},{b}) has no reverse")));
            }
        }
        adjacency_from_edges(n, &pairs)?
    };
    let undirected = undirected_edges(&adjacency).len();
    if 2 * undirected != n_edges_directed {
        return Err(ctx.err(format!(
            "meta.txt records {n_edges_directed} directed edges but edges.tsv holds {} ({undirected} undirected)",
            2 * undirected
        )));
    }

    let features = if ctx.path("features.bin").exists() {
        read_features_bin(&ctx)?
    } else {
        read_features_tsv(&ctx, feature_dim)?
    };
    if features.shape() != (n, feature_dim) {
        return Err(ctx.err(format!("features are {:?}, meta says ({n}, {feature_dim})", features.shape())));
    }
    if let Some(p) = features.data().iter().position(|v| !v.is_finite()) {
        return Err(ctx.err(format!("non-finite feature at node {}, dim {}", p / feature_dim.max(1), p % feature_dim.max(1))));
    }

    let labels = {
        let text = ctx.read("labels.tsv")?;
        let labels: Vec<usize> = ctx
            .lines(&text)
            .map(|(ln, l)| l.trim().parse().map_err(|_| ctx.err(format!("labels.tsv:{ln}: not a class index: '{l}'"))))
            .collect::<Result<_>>()?;
        if labels.len() != n {
            return Err(ctx.err(format!("labels.tsv has {} lines for {n} nodes", labels.len())));
        }
        if let Some((i, y)) = labels.iter().enumerate().find(|(_, &y)| y >= n_classes) {
            return Err(ctx.err(format!("label {y} of node {i} outside [0, {n_classes})")));
        }
        labels
    };

    let splits = Splits {
        train: ctx.parse_indices("train.idx", n)?,
        val: ctx.parse_indices("val.idx", n)?,
        test: ctx.parse_indices("test.idx", n)?,
    };

    let g = GraphBundle { n_nodes: n, feature_dim, n_classes, adjacency, features, labels, splits };
    let violations = validate_bundle(&g);
    if !violations.is_empty() {
        return Err(ctx.err(violations.join("; ")));
    }
    Ok(g)
}

fn read_features_tsv(ctx: &Ctx, dim: usize) -> Result<Tensor> {
    let text = ctx.read("features.tsv")?;
    let mut data = Vec::new();
    let mut rows = 0;
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.is_empty() && dim > 0 {
            continue;
        }
        let before = data.len();
        if dim > 0 {
            for tok in line.split('\t') {
                let v: f64 = tok.trim().parse().map_err(|_| ctx.err(format!("features.tsv:{}: not a real: '{tok}'", ln + 1)))?;
                data.push(v);
            }
        }
        if data.len() - before != dim {
            return Err(ctx.err(format!("features.tsv:{}: {} values, expected {dim}", ln + 1, data.len() - before)));
        }
        rows += 1;
    }
    Tensor::new(rows, dim, data)
}

fn read_features_bin(ctx: &Ctx) -> Result<Tensor> {
    let bytes = fs::read(ctx.path("features.bin")).map_err(|e| ctx.err(format!("features.bin: {e}")))?;
    read_f32_matrix(&bytes).map_err(|d| ctx.err(format!("features.bin: {d}")))
}

/// Parses the `features.bin` layout.
pub fn read_f32_matrix(bytes: &[u8]) -> std::result::Result<Tensor, String> {
    if bytes.len() < 16 {
        return Err("truncated header".into());
    }
    let rows = u64::from_le_bytes(bytes[0..8].try_into().unwrap()) as usize;
    let cols = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let body = &bytes[16..];
    let expected = rows.checked_mul(cols).and_then(|x| x.checked_mul(4)).ok_or("header overflows")?;
    if body.len() != expected {
        return Err(format!("{rows}x{cols} header but {} payload bytes", body.len()));
    }
    let data = body.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect();
    Tensor::new(rows, cols, data).map_err(|e| e.to_string())
}

/// Serializes a matrix in the `features.bin` layout (values narrowed to f32).
pub fn write_f32_matrix(t: &Tensor) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + t.len() * 4);
    out.extend_from_slice(&(t.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(t.cols() as u64).to_le_bytes());
    for &v in t.data() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

fn write_lines<T: std::fmt::Display>(path: PathBuf, items: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for it in items {
        writeln!(w, "{it}")?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `g` into `dir` (created if needed). `Bin` features store f32, so
/// values that are not exactly representable in f32 do not round-trip.
pub fn save_bundle(g: &GraphBundle, dir: impl AsRef<Path>, format: FeatureFormat) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let edges = undirected_edges(&g.adjacency);
    fs::write(
        dir.join("meta.txt"),
        format!(
            "n_nodes = {}\nn_edges_directed = {}\nfeature_dim = {}\nn_classes = {}\n",
            g.n_nodes,
            2 * edges.len(),
            g.feature_dim,
            g.n_classes
        ),
    )?;
    write_lines(dir.join("edges.tsv"), edges.iter().map(|(a, b)| format!("{a}\t{b}")))?;
    match format {
        FeatureFormat::Tsv => {
            write_lines(
                dir.join("features.tsv"),
                g.features.row_iter().map(|r| r.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("\t")),
            )?;
            let _ = fs::remove_file(dir.join("features.bin"));
        }
        FeatureFormat::Bin => fs::write(dir.join("features.bin"), write_f32_matrix(&g.features))?,
    }
    write_lines(dir.join("labels.tsv"), &g.labels)?;
    write_lines(dir.join("train.idx"), &g.splits.train)?;
    write_lines(dir.join("val.idx"), &g.splits.val)?;
    write_lines(dir.join("test.idx"), &g.splits.test)?;
    Ok(())
}
