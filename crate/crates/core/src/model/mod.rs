//! Shared encoder, postprocessing heads and hypersphere projection.

mod checkpoint;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng as _;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};

use crate::autodiff::{ActivationKind, NodeId, Tape, PRELU_INIT_SLOPE};
use crate::error::{Error, Result};
use crate::graph::{normalize_adjacency, GraphBundle, NormalizedAdjacency};
use crate::seed::{derived_rng, tag};
use crate::tensor::{SparseMatrix, Tensor};

/// Row-norm floor used by [`project_sphere`].
pub const SPHERE_EPS: f64 = 1e-12;
/// Variance floor inside column standardization.
pub const BN_EPS: f64 = 1e-5;
pub const DEFAULT_DBN_ITERS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Arch {
    Gcn,
    Mlp,
}

impl Arch {
    pub fn as_str(self) -> &'static str {
        match self {
            Arch::Gcn => "gcn",
            Arch::Mlp => "mlp",
        }
    }
}

impl FromStr for Arch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gcn" => Ok(Arch::Gcn),
            "mlp" => Ok(Arch::Mlp),
            other => Err(Error::Config(format!("unknown encoder '{other}' (expected gcn|mlp)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EncoderConfig {
    pub arch: Arch,
    pub n_layers: usize,
    pub hidden_dim: usize,
    pub out_dim: usize,
    pub activation: ActivationKind,
}

impl EncoderConfig {
    /// `n_layers` GCN layers whose hidden width equals the output width.
    pub fn gcn(n_layers: usize, dim: usize) -> Self {
        EncoderConfig { arch: Arch::Gcn, n_layers, hidden_dim: dim, out_dim: dim, activation: ActivationKind::Relu }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.n_layers) {
            return Err(Error::Config(format!("layers must be 1, 2 or 3, got {}", self.n_layers)));
        }
        if self.hidden_dim == 0 || self.out_dim == 0 {
            return Err(Error::Config("encoder dimensions must be positive".into()));
        }
        Ok(())
    }

    fn layer_dims(&self, in_dim: usize) -> Vec<(usize, usize)> {
        (0..self.n_layers)
            .map(|l| {
                let fan_in = if l == 0 { in_dim } else { self.hidden_dim };
                let fan_out = if l + 1 == self.n_layers { self.out_dim } else { self.hidden_dim };
                (fan_in, fan_out)
            })
            .collect()
    }
}

/// Row-wise projection head settings.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HeadConfig {
    /// 0 means "same as the embedding width".
    pub hidden_dim: usize,
    pub activation: ActivationKind,
}

impl Default for HeadConfig {
    fn default() -> Self {
        HeadConfig { hidden_dim: 0, activation: ActivationKind::Elu }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PostprocessorKind {
    /// Identity (nCLNR).
    None,
    /// Column standardization (CLNR).
    Bn,
    /// ZCA whitening through a Newton–Schulz inverse square root (dCLNR).
    Dbn { iters: usize },
    /// Two-layer row-wise MLP (GRACE-style).
    Mlp(HeadConfig),
    /// MLP followed by column standardization (GCLNR).
    MlpBn(HeadConfig),
}

impl PostprocessorKind {
    pub fn tag(&self) -> &'static str {
        match self {
            PostprocessorKind::None => "none",
            PostprocessorKind::Bn => "bn",
            PostprocessorKind::Dbn { .. } => "dbn",
            PostprocessorKind::Mlp(_) => "mlp",
            PostprocessorKind::MlpBn(_) => "mlp_bn",
        }
    }

    /// Name of the method this postprocessor defines when trained with NT-Xent.
    pub fn method_name(&self) -> &'static str {
        match self {
            PostprocessorKind::None => "nCLNR",
            PostprocessorKind::Bn => "CLNR",
            PostprocessorKind::Dbn { .. } => "dCLNR",
            PostprocessorKind::Mlp(_) => "GRACE",
            PostprocessorKind::MlpBn(_) => "GCLNR",
        }
    }

    pub fn head(&self) -> Option<HeadConfig> {
        match self {
            PostprocessorKind::Mlp(h) | PostprocessorKind::MlpBn(h) => Some(*h),
            _ => None,
        }
    }
}

impl fmt::Display for PostprocessorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for PostprocessorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(PostprocessorKind::None),
            "bn" => Ok(PostprocessorKind::Bn),
            "dbn" => Ok(PostprocessorKind::Dbn { iters: DEFAULT_DBN_ITERS }),
            "mlp" => Ok(PostprocessorKind::Mlp(HeadConfig::default())),
            "mlp_bn" => Ok(PostprocessorKind::MlpBn(HeadConfig::default())),
            other => Err(Error::Config(format!("unknown postprocessor '{other}' (expected none|bn|dbn|mlp|mlp_bn)"))),
        }
    }
}

/// Encoder weights plus optional head weights.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub encoder: Vec<Tensor>,
    /// One 1x1 slope per encoder layer when the activation is PReLU, empty otherwise.
    pub encoder_slopes: Vec<Tensor>,
    /// `[W1, W2]` for row-wise heads, empty otherwise.
    pub head: Vec<Tensor>,
    pub head_slope: Option<Tensor>,
    pub bn_eps: f64,
}

/// Tape handles for every tensor in [`ModelParams`], same layout.
#[derive(Clone, Debug)]
pub struct ParamNodes {
    pub encoder: Vec<NodeId>,
    pub encoder_slopes: Vec<NodeId>,
    pub head: Vec<NodeId>,
    pub head_slope: Option<NodeId>,
}

impl ParamNodes {
    pub fn all(&self) -> Vec<NodeId> {
        let mut v = self.encoder.clone();
        v.extend(&self.encoder_slopes);
        v.extend(&self.head);
        v.extend(self.head_slope);
        v
    }
}

fn glorot(rows: usize, cols: usize, rng: &mut crate::seed::Rng) -> Tensor {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    Tensor::from_fn(rows, cols, |_, _| rng.random_range(-bound..=bound))
}

/// Glorot-uniform weights, deterministic in `seed`.
pub fn init_params(cfg: &EncoderConfig, kind: &PostprocessorKind, in_dim: usize, seed: u64) -> ModelParams {
    let mut rng = derived_rng(seed, tag::INIT, 0);
    let encoder: Vec<Tensor> = cfg.layer_dims(in_dim).into_iter().map(|(a, b)| glorot(a, b, &mut rng)).collect();
    let encoder_slopes = if cfg.activation == ActivationKind::Prelu {
        vec![Tensor::scalar(PRELU_INIT_SLOPE); cfg.n_layers]
    } else {
        Vec::new()
    };
    let (head, head_slope) = match kind.head() {
        Some(h) => {
            let hidden = if h.hidden_dim == 0 { cfg.out_dim } else { h.hidden_dim };
            let w = vec![glorot(cfg.out_dim, hidden, &mut rng), glorot(hidden, cfg.out_dim, &mut rng)];
            let s = (h.activation == ActivationKind::Prelu).then(|| Tensor::scalar(PRELU_INIT_SLOPE));
            (w, s)
        }
        None => (Vec::new(), None),
    };
    ModelParams { encoder, encoder_slopes, head, head_slope, bn_eps: BN_EPS }
}

impl ModelParams {
    /// Puts every tensor on the tape, as trainable parameters or as constants.
    pub fn register(&self, tape: &mut Tape, trainable: bool) -> ParamNodes {
        let mut put = |t: &Tensor| if trainable { tape.param(t.clone()) } else { tape.constant(t.clone()) };
        ParamNodes {
            encoder: self.encoder.iter().map(&mut put).collect(),
            encoder_slopes: self.encoder_slopes.iter().map(&mut put).collect(),
            head: self.head.iter().map(&mut put).collect(),
            head_slope: self.head_slope.as_ref().map(&mut put),
        }
    }

    /// Every tensor in the order used by [`ParamNodes::all`].
    pub fn tensors(&self) -> Vec<&Tensor> {
        let mut v: Vec<&Tensor> = self.encoder.iter().collect();
        v.extend(&self.encoder_slopes);
        v.extend(&self.head);
        v.extend(&self.head_slope);
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v: Vec<&mut Tensor> = self.encoder.iter_mut().collect();
        v.extend(&mut self.encoder_slopes);
        v.extend(&mut self.head);
        v.extend(&mut self.head_slope);
        v
    }

    pub fn named(&self) -> Vec<(String, &Tensor)> {
        let mut v = Vec::new();
        for (i, t) in self.encoder.iter().enumerate() {
            v.push((format!("encoder.{i}"), t));
        }
        for (i, t) in self.encoder_slopes.iter().enumerate() {
            v.push((format!("encoder_slope.{i}"), t));
        }
        for (i, t) in self.head.iter().enumerate() {
            v.push((format!("head.{i}"), t));
        }
        if let Some(t) = &self.head_slope {
            v.push(("head_slope".to_string(), t));
        }
        v
    }

    /// Scalars owned by the postprocessing head; zero for column-wise variants.
    pub fn head_param_count(&self) -> usize {
        self.head.iter().map(Tensor::len).sum::<usize>() + self.head_slope.as_ref().map_or(0, Tensor::len)
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }
}

/// Node features as fed to the first layer. Sparse inputs take the
/// sparse-times-dense path, which is mathematically the same product.
#[derive(Clone, Debug)]
pub enum FeatureInput {
    Dense(Tensor),
    Sparse(Arc<SparseMatrix>),
}

impl FeatureInput {
    /// Density below which features are stored sparsely.
    pub const SPARSE_DENSITY: f64 = 0.25;

    pub fn from_tensor(t: Tensor) -> Self {
        let nnz = t.data().iter().filter(|&&v| v != 0.0).count();
        if t.is_empty() || (nnz as f64) < Self::SPARSE_DENSITY * t.len() as f64 {
            FeatureInput::Sparse(Arc::new(SparseMatrix::from_dense(&t)))
        } else {
            FeatureInput::Dense(t)
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            FeatureInput::Dense(t) => t.cols(),
            FeatureInput::Sparse(s) => s.cols(),
        }
    }

    pub fn rows(&self) -> usize {
        match self {
            FeatureInput::Dense(t) => t.rows(),
            FeatureInput::Sparse(s) => s.rows(),
        }
    }
}

fn act(tape: &mut Tape, kind: ActivationKind, x: NodeId, slope: Option<NodeId>) -> Result<NodeId> {
    tape.activation(kind, x, slope)
}

/// Raw embeddings `Z`. For GCN every layer is `σ(Â·H·W)`; the MLP encoder drops `Â`.
pub fn encode(
    tape: &mut Tape,
    cfg: &EncoderConfig,
    params: &ParamNodes,
    adj: &NormalizedAdjacency,
    x: &FeatureInput,
) -> Result<NodeId> {
    let w0 = params.encoder[0];
    if tape.shape(w0).0 != x.cols() {
        return Err(Error::shape("encode", format!("features have {} columns, first layer expects {}", x.cols(), tape.shape(w0).0)));
    }
    if cfg.arch == Arch::Gcn && adj.matrix().cols() != x.rows() {
        return Err(Error::shape("encode", format!("adjacency is {}x{} for {} nodes", adj.matrix().rows(), adj.matrix().cols(), x.rows())));
    }
    let mut h = None;
    for (l, &w) in params.encoder.iter().enumerate() {
        let hw = match (h, x) {
            (Some(prev), _) => tape.matmul(prev, w)?,
            (None, FeatureInput::Dense(t)) => {
                let c = tape.constant(t.clone());
                tape.matmul(c, w)?
            }
            (None, FeatureInput::Sparse(s)) => tape.spmm(s, w)?,
        };
        let pre = match cfg.arch {
            Arch::Gcn => tape.spmm(adj.shared(), hw)?,
            Arch::Mlp => hw,
        };
        h = Some(act(tape, cfg.activation, pre, params.encoder_slopes.get(l).copied())?);
    }
    Ok(h.expect("at least one layer"))
}

/// `(Z - mean) / sqrt(var + eps)` with population column moments.
pub fn standardize(tape: &mut Tape, z: NodeId, eps: f64) -> Result<NodeId> {
    let rows = tape.shape(z).0;
    if rows < 2 {
        return Err(Error::degenerate("bn", format!("need at least 2 rows, got {rows}")));
    }
    let mean = tape.col_mean(z)?;
    let centered = tape.sub_row(z, mean)?;
    let sq = tape.square(centered)?;
    let var = tape.col_mean(sq)?;
    let shifted = tape.add_scalar(var, eps)?;
    let std = tape.sqrt(shifted)?;
    tape.div_row(centered, std)
}

/// ZCA whitening `(Z - mean) Σ^{-1/2}` with `Σ` the column covariance plus
/// `eps·I`. The inverse square root runs a fixed number of Newton–Schulz
/// steps on `Σ / ‖Σ‖_F`, so every step is a plain matrix product.
pub fn whiten(tape: &mut Tape, z: NodeId, eps: f64, iters: usize) -> Result<NodeId> {
    let (rows, cols) = tape.shape(z);
    if rows < 2 {
        return Err(Error::degenerate("dbn", format!("need at least 2 rows, got {rows}")));
    }
    let mean = tape.col_mean(z)?;
    let centered = tape.sub_row(z, mean)?;
    let ct = tape.transpose(centered)?;
    let gram = tape.matmul(ct, centered)?;
    let cov = tape.scale(gram, 1.0 / rows as f64)?;
    let ridge = tape.constant(Tensor::identity(cols).scale(eps));
    let cov = tape.add(cov, ridge)?;
    let sq = tape.sum_squares(cov)?;
    let norm = tape.sqrt(sq)?;
    let a = tape.div_scalar(cov, norm)?;

    let mut p = tape.constant(Tensor::identity(cols));
    for _ in 0..iters {
        let p2 = tape.matmul(p, p)?;
        let p3 = tape.matmul(p2, p)?;
        let p3a = tape.matmul(p3, a)?;
        let lhs = tape.scale(p, 1.5)?;
        let rhs = tape.scale(p3a, 0.5)?;
        p = tape.sub(lhs, rhs)?;
    }
    let root = tape.sqrt(norm)?;
    let inv_sqrt = tape.div_scalar(p, root)?;
    tape.matmul(centered, inv_sqrt)
}

fn head(tape: &mut Tape, h: &HeadConfig, params: &ParamNodes, z: NodeId) -> Result<NodeId> {
    let hidden = tape.matmul(z, params.head[0])?;
    let hidden = act(tape, h.activation, hidden, params.head_slope)?;
    tape.matmul(hidden, params.head[1])
}

/// Final node embeddings `U` from raw embeddings `Z`.
pub fn postprocess(
    tape: &mut Tape,
    kind: &PostprocessorKind,
    z: NodeId,
    params: &ParamNodes,
    bn_eps: f64,
) -> Result<NodeId> {
    match kind {
        PostprocessorKind::None => Ok(z),
        PostprocessorKind::Bn => standardize(tape, z, bn_eps),
        PostprocessorKind::Dbn { iters } => whiten(tape, z, bn_eps, *iters),
        PostprocessorKind::Mlp(h) => head(tape, h, params, z),
        PostprocessorKind::MlpBn(h) => {
            let u = head(tape, h, params, z)?;
            standardize(tape, u, bn_eps)
        }
    }
}

/// Divides each row by `max(‖row‖₂, 1e-12)`.
pub fn project_sphere(tape: &mut Tape, u: NodeId) -> Result<NodeId> {
    tape.normalize_rows(u, SPHERE_EPS)
}

/// Every stage of the inference-time pipeline on the full graph.
#[derive(Clone, Debug, PartialEq)]
pub struct FullEmbedding {
    pub raw: Tensor,
    pub postprocessed: Tensor,
    pub projected: Tensor,
}

/// Runs `input` through encoder, postprocessor and projection without
/// recording gradients. Column statistics come from all rows of `input`.
pub fn embed_view(
    params: &ModelParams,
    cfg: &EncoderConfig,
    kind: &PostprocessorKind,
    adj: &NormalizedAdjacency,
    input: &FeatureInput,
) -> Result<FullEmbedding> {
    let mut tape = Tape::new();
    let nodes = params.register(&mut tape, false);
    let z = encode(&mut tape, cfg, &nodes, adj, input)?;
    let u = postprocess(&mut tape, kind, z, &nodes, params.bn_eps)?;
    let p = project_sphere(&mut tape, u)?;
    Ok(FullEmbedding {
        raw: tape.value(z).clone(),
        postprocessed: tape.value(u).clone(),
        projected: tape.value(p).clone(),
    })
}

/// Inference embeddings for the whole, unaugmented graph.
pub fn embed_full(params: &ModelParams, cfg: &EncoderConfig, kind: &PostprocessorKind, g: &GraphBundle) -> Result<FullEmbedding> {
    let adj = normalize_adjacency(&g.adjacency);
    embed_view(params, cfg, kind, &adj, &FeatureInput::from_tensor(g.features.clone()))
}
