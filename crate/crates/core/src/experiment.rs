//! End-to-end runs: pretrain, embed, evaluate.

use crate::augment::make_views;
use crate::error::Result;
use crate::eval::{alignment, calinski_harabasz, davies_bouldin, linear_probe, silhouette, uniformity, MetricsReport, ProbeConfig};
use crate::graph::{normalize_adjacency, perturb_edges, GraphBundle};
use crate::model::{embed_full, embed_view, FeatureInput, FullEmbedding, ModelParams};
use crate::objective::{train, TrainConfig, TrainOutput};
use crate::seed::{derive_seed, tag};
use crate::tensor::Tensor;

pub const ALIGN_ALPHA: f64 = 2.0;
pub const UNIFORM_T: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalOptions {
    pub probe: bool,
    /// Probe on postprocessed embeddings instead of sphere-projected ones.
    pub pre_projection: bool,
    pub probe_config: ProbeConfig,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { probe: true, pre_projection: false, probe_config: ProbeConfig::default() }
    }
}

/// Identifies a run in the results table.
#[derive(Clone, Debug, PartialEq)]
pub struct RunLabel {
    pub dataset: String,
    pub method: String,
    pub seed: u64,
    pub seconds: f64,
}

/// Probe accuracy plus clustering scores of `e`; uniformity of all rows.
pub fn evaluate_embeddings(e: &Tensor, g: &GraphBundle, label: &RunLabel, opts: &EvalOptions) -> Result<MetricsReport> {
    let accuracy = if opts.probe {
        Some(linear_probe(e, &g.labels, &g.splits, &opts.probe_config)?.test_accuracy)
    } else {
        None
    };
    Ok(MetricsReport {
        dataset: label.dataset.clone(),
        method: label.method.clone(),
        dim: e.cols(),
        seed: label.seed,
        accuracy,
        alignment: None,
        uniformity: uniformity(e, UNIFORM_T)?,
        sc: silhouette(e, &g.labels)?,
        db: davies_bouldin(e, &g.labels)?,
        ch: calinski_harabasz(e, &g.labels)?,
        seconds: label.seconds,
    })
}

/// Alignment between two freshly augmented views and their mean uniformity.
pub fn view_metrics(params: &ModelParams, cfg: &TrainConfig, g: &GraphBundle, seed: u64) -> Result<(f64, f64)> {
    let views = make_views(g, &cfg.augment, derive_seed(seed, tag::EVAL_VIEWS, 0));
    let mut out = Vec::with_capacity(2);
    for v in [&views.view1, &views.view2] {
        let x = FeatureInput::from_tensor(v.features.clone());
        out.push(embed_view(params, &cfg.encoder, &cfg.kind, &v.adjacency, &x)?.projected);
    }
    let align = alignment(&out[0], &out[1], ALIGN_ALPHA)?;
    let unif = 0.5 * (uniformity(&out[0], UNIFORM_T)? + uniformity(&out[1], UNIFORM_T)?);
    Ok((align, unif))
}

/// Full evaluation of a trained model: probe and clustering scores on the
/// inference embeddings, alignment/uniformity on a held-out view pair.
pub fn evaluate_model(
    params: &ModelParams,
    cfg: &TrainConfig,
    g: &GraphBundle,
    label: &RunLabel,
    opts: &EvalOptions,
) -> Result<(MetricsReport, FullEmbedding)> {
    let emb = embed_full(params, &cfg.encoder, &cfg.kind, g)?;
    let probe_input = if opts.pre_projection { &emb.postprocessed } else { &emb.projected };
    let mut report = evaluate_embeddings(&emb.projected, g, label, &EvalOptions { probe: false, ..*opts })?;
    if opts.probe {
        report.accuracy = Some(linear_probe(probe_input, &g.labels, &g.splits, &opts.probe_config)?.test_accuracy);
    }
    let (align, unif) = view_metrics(params, cfg, g, label.seed)?;
    report.alignment = Some(align);
    report.uniformity = unif;
    Ok((report, emb))
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub train: TrainOutput,
    pub report: MetricsReport,
    pub embedding: FullEmbedding,
}

/// Pretrains on `train_graph` and evaluates against `eval_graph`'s labels and
/// splits. They differ only in perturbation sweeps.
pub fn run(train_graph: &GraphBundle, eval_graph: &GraphBundle, cfg: &TrainConfig, dataset: &str, method: &str, opts: &EvalOptions) -> Result<RunOutcome> {
    let out = train(train_graph, cfg)?;
    let seconds = out.history.iter().map(|r| r.seconds).sum();
    let label = RunLabel { dataset: dataset.to_string(), method: method.to_string(), seed: cfg.seed, seconds };
    let (report, embedding) = evaluate_model(&out.params, cfg, eval_graph, &label, opts)?;
    Ok(RunOutcome { train: out, report, embedding })
}

/// `g` with `⌊|A|p⌋` extra random edges, seeded from the run seed.
pub fn perturbed(g: &GraphBundle, p: f64, seed: u64) -> Result<GraphBundle> {
    let a = perturb_edges(&g.adjacency, p, derive_seed(seed, tag::PERTURB, 0))?;
    Ok(g.with_adjacency(a))
}

/// Normalized adjacency and features of the unaugmented graph.
pub fn full_inputs(g: &GraphBundle) -> (crate::graph::NormalizedAdjacency, FeatureInput) {
    (normalize_adjacency(&g.adjacency), FeatureInput::from_tensor(g.features.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augment::AugmentConfig;
    use crate::graph::{generate_sbm, SbmConfig};
    use crate::model::{EncoderConfig, PostprocessorKind};
    use crate::objective::LossKind;

    fn cfg(seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: 5,
            m: 64,
            tau: 0.5,
            lr1: 1e-2,
            wd1: 0.0,
            augment: AugmentConfig { p_e: 0.3, p_f: 0.2 },
            encoder: EncoderConfig::gcn(2, 16),
            kind: PostprocessorKind::Bn,
            loss: LossKind::NtXent,
            lambda: 1e-3,
            seed,
        }
    }

    #[test]
    fn run_fills_every_metric_and_repeats_exactly() {
        let g = generate_sbm(&SbmConfig { block_sizes: vec![30, 30], p_in: 0.2, feature_dim: 8, seed: 1, ..Default::default() });
        let a = run(&g, &g, &cfg(2), "sbm", "CLNR", &EvalOptions::default()).unwrap();
        let r = &a.report;
        assert!(r.accuracy.is_some_and(|x| (0.0..=1.0).contains(&x)));
        assert!(r.alignment.is_some_and(|x| x >= 0.0));
        assert!(r.uniformity <= 0.0 && (-1.0..=1.0).contains(&r.sc) && r.db >= 0.0 && r.ch >= 0.0);
        let b = run(&g, &g, &cfg(2), "sbm", "CLNR", &EvalOptions::default()).unwrap();
        assert_eq!(a.embedding, b.embedding);
        assert_eq!(a.report.accuracy, b.report.accuracy);
    }

    #[test]
    fn zero_perturbation_is_identity() {
        let g = generate_sbm(&SbmConfig { block_sizes: vec![20, 20], seed: 3, ..Default::default() });
        assert_eq!(perturbed(&g, 0.0, 9).unwrap(), g);
        let p = perturbed(&g, 0.5, 9).unwrap();
        assert_eq!(p.n_edges(), g.n_edges() + g.n_edges() / 2);
    }
}
