//! Contrastive objectives, Adam, and the pretraining loop.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::index::sample;

use crate::augment::{make_views, AugmentConfig, ViewPair};
use crate::autodiff::{NodeId, Tape};
use crate::error::{Error, Result};
use crate::graph::GraphBundle;
use crate::model::{encode, init_params, postprocess, standardize, EncoderConfig, FeatureInput, ModelParams, ParamNodes, PostprocessorKind};
use crate::seed::{derive_seed, tag};
use crate::tensor::{gemm, Tensor};

/// Row-norm floor used before cosine similarities.
const COSINE_EPS: f64 = 1e-12;

/// Numerically stable `log Σ exp`.
fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.map(|x| (x - max).exp()).sum::<f64>().ln()
}

fn gram(a: &Tensor, b: &Tensor, scale: f64) -> Tensor {
    let mut out = Tensor::zeros(a.rows(), b.rows());
    gemm(scale, a, false, b, true, 0.0, &mut out);
    out
}

/// Symmetrized NT-Xent with inter- and intra-view negatives over the rows
/// `batch` of `u` and `v`. Rows are compared by cosine similarity. Returns
/// the negated objective, so smaller is better and the minimum is 0.
pub fn nt_xent(tape: &mut Tape, u: NodeId, v: NodeId, batch: &[usize], tau: f64) -> Result<NodeId> {
    if tape.shape(u) != tape.shape(v) {
        return Err(Error::shape("nt_xent", format!("{:?} vs {:?}", tape.shape(u), tape.shape(v))));
    }
    if !(tau > 0.0) {
        return Err(Error::Config(format!("tau must be positive, got {tau}")));
    }
    if batch.is_empty() {
        return Err(Error::contract("nt_xent", "empty batch"));
    }
    let mut seen = HashSet::with_capacity(batch.len());
    if let Some(dup) = batch.iter().find(|&&i| !seen.insert(i)) {
        return Err(Error::contract("nt_xent", format!("node {dup} appears twice in the batch")));
    }
    let ug = tape.gather_rows(u, batch)?;
    let vg = tape.gather_rows(v, batch)?;
    let a_id = tape.normalize_rows(ug, COSINE_EPS)?;
    let b_id = tape.normalize_rows(vg, COSINE_EPS)?;
    let a = tape.value(a_id);
    let b = tape.value(b_id);
    let m = batch.len();

    let s_ab = gram(a, b, 1.0 / tau);
    let s_aa = gram(a, a, 1.0 / tau);
    let s_bb = gram(b, b, 1.0 / tau);

    // softmax weights of every term inside each anchor's denominator
    let mut p_ab = Tensor::zeros(m, m); // anchor u_i, column k of S_ab
    let mut p_ba = Tensor::zeros(m, m); // anchor v_i, entry S_ab[k, i] stored at [k, i]
    let mut p_aa = Tensor::zeros(m, m);
    let mut p_bb = Tensor::zeros(m, m);
    let mut total = 0.0;
    for i in 0..m {
        let inter = (0..m).map(|k| s_ab.get(i, k));
        let intra = (0..m).filter(|&k| k != i).map(|k| s_aa.get(i, k));
        let lse = log_sum_exp(inter.chain(intra));
        total += s_ab.get(i, i) - lse;
        for k in 0..m {
            p_ab.set(i, k, (s_ab.get(i, k) - lse).exp());
            if k != i {
                p_aa.set(i, k, (s_aa.get(i, k) - lse).exp());
            }
        }

        let inter = (0..m).map(|k| s_ab.get(k, i));
        let intra = (0..m).filter(|&k| k != i).map(|k| s_bb.get(i, k));
        let lse = log_sum_exp(inter.chain(intra));
        total += s_ab.get(i, i) - lse;
        for k in 0..m {
            p_ba.set(k, i, (s_ab.get(k, i) - lse).exp());
            if k != i {
                p_bb.set(i, k, (s_bb.get(i, k) - lse).exp());
            }
        }
    }
    let c = 1.0 / (2.0 * m as f64);
    let loss = -c * total;

    let mut g_ab = p_ab.zip_map(&p_ba, |x, y| c * (x + y));
    for i in 0..m {
        g_ab.set(i, i, g_ab.get(i, i) - 2.0 * c);
    }
    let sym = |p: &Tensor| p.zip_map(&p.transpose(), |x, y| c * (x + y));
    let g_aa = sym(&p_aa);
    let g_bb = sym(&p_bb);

    let mut d_a = Tensor::zeros(m, a.cols());
    gemm(1.0 / tau, &g_ab, false, b, false, 0.0, &mut d_a);
    gemm(1.0 / tau, &g_aa, false, a, false, 1.0, &mut d_a);
    let mut d_b = Tensor::zeros(m, b.cols());
    gemm(1.0 / tau, &g_ab, true, a, false, 0.0, &mut d_b);
    gemm(1.0 / tau, &g_bb, false, b, false, 1.0, &mut d_b);

    tape.fused_loss("nt_xent", loss, vec![(a_id, d_a), (b_id, d_b)])
}

/// `‖U−V‖² + λ(‖UᵀU−I‖² + ‖VᵀV−I‖²)` with Frobenius norms.
pub fn cca_ssg_loss(tape: &mut Tape, u: NodeId, v: NodeId, lambda: f64) -> Result<NodeId> {
    if tape.shape(u) != tape.shape(v) {
        return Err(Error::shape("cca_ssg_loss", format!("{:?} vs {:?}", tape.shape(u), tape.shape(v))));
    }
    let f = tape.shape(u).1;
    let diff = tape.sub(u, v)?;
    let invariance = tape.sum_squares(diff)?;
    let eye = tape.constant(Tensor::identity(f));
    let mut decor = Vec::with_capacity(2);
    for x in [u, v] {
        let xt = tape.transpose(x)?;
        let c = tape.matmul(xt, x)?;
        let off = tape.sub(c, eye)?;
        decor.push(tape.sum_squares(off)?);
    }
    let d = tape.add(decor[0], decor[1])?;
    let d = tape.scale(d, lambda)?;
    tape.add(invariance, d)
}

/// Standardizes columns and scales by `1/√N`, so `UᵀU` is the correlation matrix.
pub fn cca_preprocess(tape: &mut Tape, x: NodeId, eps: f64) -> Result<NodeId> {
    let n = tape.shape(x).0;
    let s = standardize(tape, x, eps)?;
    tape.scale(s, 1.0 / (n as f64).sqrt())
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
    pub step: u64,
}

impl AdamState {
    pub fn new(shapes: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let m: Vec<Tensor> = shapes.into_iter().map(|(r, c)| Tensor::zeros(r, c)).collect();
        AdamState { v: m.clone(), m, step: 0 }
    }
}

/// One bias-corrected Adam update with coupled L2 decay (`g += wd·θ`).
/// Nothing is modified when any gradient is non-finite.
pub fn adam_step(state: &mut AdamState, params: &mut [&mut Tensor], grads: &[Tensor], lr: f64, wd: f64) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::shape("adam_step", format!("{} params, {} grads, {} moments", params.len(), grads.len(), state.m.len())));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.shape() != g.shape() || p.shape() != state.m[i].shape() {
            return Err(Error::shape("adam_step", format!("parameter {i}: {:?} vs gradient {:?}", p.shape(), g.shape())));
        }
        if !g.is_finite() {
            return Err(Error::numeric("adam_step", format!("non-finite gradient for parameter {i}")));
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - ADAM_BETA1.powi(t);
    let c2 = 1.0 - ADAM_BETA2.powi(t);
    for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
        let m = state.m[i].data_mut();
        let v = state.v[i].data_mut();
        for (k, theta) in p.data_mut().iter_mut().enumerate() {
            let gk = g.data()[k] + wd * *theta;
            m[k] = ADAM_BETA1 * m[k] + (1.0 - ADAM_BETA1) * gk;
            v[k] = ADAM_BETA2 * v[k] + (1.0 - ADAM_BETA2) * gk * gk;
            *theta -= lr * (m[k] / c1) / ((v[k] / c2).sqrt() + ADAM_EPS);
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LossKind {
    NtXent,
    CcaSsg,
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossKind::NtXent => "nt_xent",
            LossKind::CcaSsg => "cca_ssg",
        })
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nt_xent" => Ok(LossKind::NtXent),
            "cca_ssg" => Ok(LossKind::CcaSsg),
            other => Err(Error::Config(format!("unknown loss '{other}' (expected nt_xent|cca_ssg)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub m: usize,
    pub tau: f64,
    pub lr1: f64,
    pub wd1: f64,
    pub augment: AugmentConfig,
    pub encoder: EncoderConfig,
    pub kind: PostprocessorKind,
    pub loss: LossKind,
    pub lambda: f64,
    pub seed: u64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.m == 0 {
            return Err(Error::Config("m must be at least 1".into()));
        }
        if !(self.tau > 0.0) {
            return Err(Error::Config(format!("tau must be positive, got {}", self.tau)));
        }
        if !(self.lr1 > 0.0) || !(self.wd1 >= 0.0) {
            return Err(Error::Config("lr1 must be positive and wd1 nonnegative".into()));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::Config(format!("lambda must be nonnegative, got {}", self.lambda)));
        }
        self.augment.validate()?;
        self.encoder.validate()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub seconds: f64,
}

/// `epoch,loss,seconds` with six decimals.
pub fn history_csv(history: &[EpochRecord]) -> String {
    let mut s = String::from("epoch,loss,seconds\n");
    for r in history {
        s.push_str(&format!("{},{:.6},{:.6}\n", r.epoch, r.loss, r.seconds));
    }
    s
}

#[derive(Clone, Debug)]
pub struct TrainOutput {
    pub params: ModelParams,
    pub history: Vec<EpochRecord>,
}

/// Uniform sample of `min(m, n)` distinct node indices.
pub fn sample_batch(n: usize, m: usize, seed: u64) -> Vec<usize> {
    let mut rng = crate::seed::rng_from(seed);
    sample(&mut rng, n, m.min(n)).into_vec()
}

/// Builds the training loss for one view pair on `tape`.
pub fn pair_loss(
    tape: &mut Tape,
    cfg: &TrainConfig,
    nodes: &ParamNodes,
    bn_eps: f64,
    views: &ViewPair,
    batch: &[usize],
) -> Result<NodeId> {
    let mut out = Vec::with_capacity(2);
    for view in [&views.view1, &views.view2] {
        let x = FeatureInput::from_tensor(view.features.clone());
        let z = encode(tape, &cfg.encoder, nodes, &view.adjacency, &x)?;
        out.push(postprocess(tape, &cfg.kind, z, nodes, bn_eps)?);
    }
    match cfg.loss {
        LossKind::NtXent => nt_xent(tape, out[0], out[1], batch, cfg.tau),
        LossKind::CcaSsg => {
            let u = cca_preprocess(tape, out[0], bn_eps)?;
            let v = cca_preprocess(tape, out[1], bn_eps)?;
            cca_ssg_loss(tape, u, v, cfg.lambda)
        }
    }
}

/// Loss value of `params` on a fixed view pair and batch, without updating.
pub fn evaluate_loss(params: &ModelParams, cfg: &TrainConfig, views: &ViewPair, batch: &[usize]) -> Result<f64> {
    let mut tape = Tape::new();
    let nodes = params.register(&mut tape, false);
    let loss = pair_loss(&mut tape, cfg, &nodes, params.bn_eps, views, batch)?;
    Ok(tape.value(loss).item())
}

/// Pretrains from a fresh initialization.
pub fn train(g: &GraphBundle, cfg: &TrainConfig) -> Result<TrainOutput> {
    train_with(g, cfg, |_| {})
}

/// [`train`], calling `on_epoch` after every optimizer step.
pub fn train_with(g: &GraphBundle, cfg: &TrainConfig, mut on_epoch: impl FnMut(&EpochRecord)) -> Result<TrainOutput> {
    cfg.validate()?;
    let mut params = init_params(&cfg.encoder, &cfg.kind, g.feature_dim, cfg.seed);
    let mut adam = AdamState::new(params.tensors().iter().map(|t| t.shape()));
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        let start = Instant::now();
        let mut step = || -> Result<f64> {
            let views = make_views(g, &cfg.augment, derive_seed(cfg.seed, tag::AUGMENT, epoch as u64));
            let batch = sample_batch(g.n_nodes, cfg.m, derive_seed(cfg.seed, tag::SUBSAMPLE, epoch as u64));
            let mut tape = Tape::new();
            let nodes = params.register(&mut tape, true);
            let loss = pair_loss(&mut tape, cfg, &nodes, params.bn_eps, &views, &batch)?;
            let value = tape.value(loss).item();
            let grads = tape.backward(loss)?;
            let gs: Vec<Tensor> = nodes.all().into_iter().map(|id| grads.get(id)).collect();
            drop(tape);
            adam_step(&mut adam, &mut params.tensors_mut(), &gs, cfg.lr1, cfg.wd1)?;
            Ok(value)
        };
        match step() {
            Ok(loss) => {
                let rec = EpochRecord { epoch, loss, seconds: start.elapsed().as_secs_f64() };
                on_epoch(&rec);
                history.push(rec);
            }
            Err(e) => return Err(Error::Aborted { epoch, history, source: Box::new(e) }),
        }
    }
    Ok(TrainOutput { params, history })
}
