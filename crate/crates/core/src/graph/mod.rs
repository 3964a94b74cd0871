//! Transductive graph datasets and adjacency utilities.

mod io;
mod perturb;
mod sbm;

use std::collections::HashSet;
use std::sync::Arc;

use rand::seq::SliceRandom;

pub use io::{load_bundle, read_f32_matrix, save_bundle, write_f32_matrix, FeatureFormat};
pub use perturb::perturb_edges;
pub use sbm::{generate_sbm, SbmConfig};

use crate::error::Result;
use crate::seed::Rng;
use crate::tensor::{SparseMatrix, Tensor};

/// Train/validation/test node indices.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Splits {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Splits {
    /// Stratified 1:1:8 split, drawn independently within each class.
    pub fn stratified(labels: &[usize], n_classes: usize, rng: &mut Rng) -> Splits {
        let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
        for (i, &y) in labels.iter().enumerate() {
            by_class[y].push(i);
        }
        let mut s = Splits::default();
        for mut members in by_class {
            members.shuffle(rng);
            let n = members.len();
            let n_train = ((n as f64) / 10.0).round() as usize;
            let n_val = (((n as f64) / 10.0).round() as usize).min(n - n_train);
            s.train.extend_from_slice(&members[..n_train]);
            s.val.extend_from_slice(&members[n_train..n_train + n_val]);
            s.test.extend_from_slice(&members[n_train + n_val..]);
        }
        s.train.sort_unstable();
        s.val.sort_unstable();
        s.test.sort_unstable();
        s
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GraphBundle {
    pub n_nodes: usize,
    pub feature_dim: usize,
    pub n_classes: usize,
    /// Symmetric 0/1 adjacency without self-loops.
    pub adjacency: SparseMatrix,
    pub features: Tensor,
    pub labels: Vec<usize>,
    pub splits: Splits,
}

impl GraphBundle {
    /// Number of undirected edges.
    pub fn n_edges(&self) -> usize {
        undirected_edges(&self.adjacency).len()
    }

    pub fn with_adjacency(&self, adjacency: SparseMatrix) -> GraphBundle {
        GraphBundle { adjacency, ..self.clone() }
    }
}

/// Upper-triangle `(i, j)` pairs with `i < j`, in row-major order.
pub fn undirected_edges(a: &SparseMatrix) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(a.nnz() / 2);
    for i in 0..a.rows() {
        let (idx, _) = a.row(i);
        out.extend(idx.iter().filter(|&&j| j > i).map(|&j| (i, j)));
    }
    out
}

/// Symmetric 0/1 adjacency from undirected pairs. Duplicates collapse.
pub fn adjacency_from_edges(n: usize, edges: &[(usize, usize)]) -> Result<SparseMatrix> {
    let mut triplets = Vec::with_capacity(edges.len() * 2);
    let mut seen = HashSet::with_capacity(edges.len());
    for &(i, j) in edges {
        let key = (i.min(j), i.max(j));
        if seen.insert(key) {
            triplets.push((i, j, 1.0));
            triplets.push((j, i, 1.0));
        }
    }
    SparseMatrix::from_triplets(n, n, &triplets)
}

/// `D̃^{-1/2}(A+I)D̃^{-1/2}`, the GCN propagation matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedAdjacency(Arc<SparseMatrix>);

impl NormalizedAdjacency {
    pub fn matrix(&self) -> &SparseMatrix {
        &self.0
    }

    pub fn shared(&self) -> &Arc<SparseMatrix> {
        &self.0
    }
}

pub fn normalize_adjacency(a: &SparseMatrix) -> NormalizedAdjacency {
    let n = a.rows();
    let degree: Vec<f64> = (0..n)
        .map(|i| {
            let (idx, val) = a.row(i);
            1.0 + idx.iter().zip(val).filter(|(&j, _)| j != i).map(|(_, v)| v).sum::<f64>()
        })
        .collect();
    let inv_sqrt: Vec<f64> = degree.iter().map(|d| 1.0 / d.sqrt()).collect();

    let mut offsets = Vec::with_capacity(n + 1);
    let mut indices = Vec::with_capacity(a.nnz() + n);
    let mut values = Vec::with_capacity(a.nnz() + n);
    offsets.push(0);
    for i in 0..n {
        let (idx, val) = a.row(i);
        let mut row: Vec<(usize, f64)> = idx.iter().zip(val).filter(|(&j, _)| j != i).map(|(&j, &v)| (j, v)).collect();
        row.push((i, 1.0));
        row.sort_by_key(|&(j, _)| j);
        for (j, v) in row {
            indices.push(j);
            values.push(v * inv_sqrt[i] * inv_sqrt[j]);
        }
        offsets.push(indices.len());
    }
    let m = SparseMatrix::new(n, n, offsets, indices, values).expect("normalized adjacency is well formed");
    NormalizedAdjacency(Arc::new(m))
}

/// Every violated bundle invariant, one message each. Empty means valid.
pub fn validate_bundle(g: &GraphBundle) -> Vec<String> {
    let mut v = Vec::new();
    let n = g.n_nodes;
    let a = &g.adjacency;
    if a.rows() != n || a.cols() != n {
        v.push(format!("adjacency is {}x{}, expected {n}x{n}", a.rows(), a.cols()));
    } else {
        if !a.is_symmetric() {
            v.push("adjacency is not symmetric".to_string());
        }
        let loops = (0..n).filter(|&i| a.contains(i, i)).count();
        if loops > 0 {
            v.push(format!("adjacency stores {loops} self-loops"));
        }
        if a.values().iter().any(|&x| x != 1.0) {
            v.push("adjacency has entries other than 1".to_string());
        }
    }
    if g.features.shape() != (n, g.feature_dim) {
        v.push(format!("features are {:?}, expected ({n}, {})", g.features.shape(), g.feature_dim));
    }
    let bad = g.features.data().iter().filter(|x| !x.is_finite()).count();
    if bad > 0 {
        v.push(format!("{bad} non-finite feature values"));
    }
    if g.labels.len() != n {
        v.push(format!("{} labels for {n} nodes", g.labels.len()));
    }
    if let Some(&y) = g.labels.iter().find(|&&y| y >= g.n_classes) {
        v.push(format!("label {y} outside [0, {})", g.n_classes));
    }
    let parts = [("train", &g.splits.train), ("val", &g.splits.val), ("test", &g.splits.test)];
    for (name, idx) in parts {
        if let Some(&i) = idx.iter().find(|&&i| i >= n) {
            v.push(format!("{name} split index {i} out of range"));
        }
        let uniq: HashSet<_> = idx.iter().collect();
        if uniq.len() != idx.len() {
            v.push(format!("{name} split has repeated indices"));
        }
    }
    for (x, y) in [(0, 1), (0, 2), (1, 2)] {
        let a: HashSet<_> = parts[x].1.iter().collect();
        if parts[y].1.iter().any(|i| a.contains(i)) {
            v.push(format!("{} and {} splits overlap", parts[x].0, parts[y].0));
        }
    }
    v
}
