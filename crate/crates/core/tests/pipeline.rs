use std::sync::Arc;

use clnr_core::augment::make_views;
use clnr_core::autodiff::{grad_check_many, ActivationKind, NodeId, Tape};
use clnr_core::graph::{generate_sbm, load_bundle, save_bundle, FeatureFormat, SbmConfig};
use clnr_core::model::{
    embed_full, encode, init_params, load_checkpoint, postprocess, project_sphere, save_checkpoint, whiten, Checkpoint, FeatureInput,
    HeadConfig, ParamNodes, BN_EPS,
};
use clnr_core::objective::{cca_preprocess, cca_ssg_loss, evaluate_loss, nt_xent, sample_batch};
use clnr_core::seed::rng_from;
use clnr_core::{Arch, EncoderConfig, PostprocessorKind, RunConfig, SparseMatrix, Tensor};
use nalgebra::DMatrix;
use rand::Rng;

fn randn(rows: usize, cols: usize, seed: u64) -> Tensor {
    let mut rng = rng_from(seed);
    Tensor::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

/// Exact ZCA whitening through a symmetric eigendecomposition.
fn zca_oracle(x: &Tensor, eps: f64) -> Tensor {
    let (n, d) = x.shape();
    let m = DMatrix::from_row_slice(n, d, x.data());
    let mean = m.row_mean();
    let c = DMatrix::from_fn(n, d, |i, j| m[(i, j)] - mean[j]);
    let cov = c.transpose() * &c / n as f64 + DMatrix::identity(d, d) * eps;
    let eig = cov.symmetric_eigen();
    let inv_sqrt = &eig.eigenvectors
        * DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()))
        * eig.eigenvectors.transpose();
    let w = c * inv_sqrt;
    Tensor::from_fn(n, d, |i, j| w[(i, j)])
}

fn whitened(x: &Tensor, iters: usize) -> Tensor {
    let mut t = Tape::new();
    let id = t.constant(x.clone());
    let out = whiten(&mut t, id, BN_EPS, iters).unwrap();
    t.value(out).clone()
}

#[test]
fn whitening_converges_to_eigen_oracle() {
    // mildly correlated columns keep the condition number small
    let base = randn(60, 4, 1);
    let mix = Tensor::from_rows(&[[1.0, 0.3, 0.0, 0.1], [0.0, 1.0, 0.2, 0.0], [0.0, 0.0, 1.0, 0.4], [0.0, 0.0, 0.0, 1.0]]);
    let x = base.matmul(&mix).unwrap();
    let exact = zca_oracle(&x, BN_EPS);
    let converged = whitened(&x, 30);
    assert!(converged.max_abs_diff(&exact) < 1e-8, "{}", converged.max_abs_diff(&exact));
    let err5 = whitened(&x, 5).max_abs_diff(&exact);
    let err10 = whitened(&x, 10).max_abs_diff(&exact);
    assert!(err10 < err5, "{err10} vs {err5}");
}

struct Fixture {
    adj: [clnr_core::NormalizedAdjacency; 2],
    x: [FeatureInput; 2],
    batch: Vec<usize>,
}

fn fixture(sparse: bool) -> Fixture {
    let g = generate_sbm(&SbmConfig { block_sizes: vec![7, 7], p_in: 0.4, p_out: 0.05, feature_dim: 6, seed: 4, ..Default::default() });
    let views = make_views(&g, &clnr_core::AugmentConfig { p_e: 0.3, p_f: 0.3 }, 11);
    let input = |t: &Tensor| {
        if sparse {
            FeatureInput::Sparse(Arc::new(SparseMatrix::from_dense(t)))
        } else {
            FeatureInput::Dense(t.clone())
        }
    };
    Fixture {
        adj: [views.view1.adjacency.clone(), views.view2.adjacency.clone()],
        x: [input(&views.view1.features), input(&views.view2.features)],
        batch: vec![0, 2, 5, 7, 8, 13],
    }
}

fn layout(params: &clnr_core::ModelParams, ids: &[NodeId]) -> ParamNodes {
    let mut it = ids.iter().copied();
    ParamNodes {
        encoder: it.by_ref().take(params.encoder.len()).collect(),
        encoder_slopes: it.by_ref().take(params.encoder_slopes.len()).collect(),
        head: it.by_ref().take(params.head.len()).collect(),
        head_slope: params.head_slope.as_ref().and_then(|_| it.next()),
    }
}

fn check(cfg: &EncoderConfig, kind: &PostprocessorKind, sparse: bool, cca: bool) -> f64 {
    let fx = fixture(sparse);
    let mut params = init_params(cfg, kind, 6, 3);
    // slopes away from their init value
    for s in params.encoder_slopes.iter_mut().chain(params.head_slope.iter_mut()) {
        *s = Tensor::scalar(0.3);
    }
    let points: Vec<Tensor> = params.tensors().into_iter().cloned().collect();
    grad_check_many(
        |t, ids| {
            let nodes = layout(&params, ids);
            let mut out = Vec::new();
            for v in 0..2 {
                let z = encode(t, cfg, &nodes, &fx.adj[v], &fx.x[v])?;
                let u = postprocess(t, kind, z, &nodes, BN_EPS)?;
                out.push(if cca { cca_preprocess(t, u, BN_EPS)? } else { project_sphere(t, u)? });
            }
            if cca {
                cca_ssg_loss(t, out[0], out[1], 1e-3)
            } else {
                nt_xent(t, out[0], out[1], &fx.batch, 0.5)
            }
        },
        &points,
        1e-5,
    )
    .unwrap()
}

#[test]
fn end_to_end_gradients_for_every_configuration() {
    let gcn = EncoderConfig { hidden_dim: 5, out_dim: 4, ..EncoderConfig::gcn(2, 4) };
    let elu_head = HeadConfig { hidden_dim: 3, activation: ActivationKind::Elu };
    let prelu_head = HeadConfig { hidden_dim: 0, activation: ActivationKind::Prelu };
    let cases: Vec<(&str, EncoderConfig, PostprocessorKind, bool, bool)> = vec![
        ("mlp_bn", gcn, PostprocessorKind::MlpBn(elu_head), false, false),
        ("mlp prelu head", gcn, PostprocessorKind::Mlp(prelu_head), false, false),
        ("prelu encoder", EncoderConfig { activation: ActivationKind::Prelu, ..gcn }, PostprocessorKind::Bn, false, false),
        ("mlp encoder", EncoderConfig { arch: Arch::Mlp, ..gcn }, PostprocessorKind::Bn, false, false),
        ("sparse input", gcn, PostprocessorKind::Bn, true, false),
        ("three layers", EncoderConfig { n_layers: 3, ..gcn }, PostprocessorKind::Dbn { iters: 5 }, false, false),
        ("cca", gcn, PostprocessorKind::None, false, true),
    ];
    for (name, cfg, kind, sparse, cca) in cases {
        let err = check(&cfg, &kind, sparse, cca);
        assert!(err < 1e-4, "{name}: relative error {err:.2e}");
    }
}

#[test]
fn training_lowers_held_out_loss_for_almost_every_seed() {
    let g = generate_sbm(&SbmConfig { block_sizes: vec![40, 40], p_in: 0.2, p_out: 0.01, feature_dim: 8, seed: 5, ..Default::default() });
    let mut lowered = 0;
    for seed in 0..20 {
        let mut c = RunConfig::new("sbm");
        c.dim = 16;
        c.epochs = 30;
        c.lr1 = 1e-2;
        c.seed = seed;
        let cfg = c.train_config();
        let views = make_views(&g, &cfg.augment, 1000 + seed);
        let batch = sample_batch(g.n_nodes, cfg.m, 2000 + seed);
        let before = evaluate_loss(&init_params(&cfg.encoder, &cfg.kind, g.feature_dim, seed), &cfg, &views, &batch).unwrap();
        let out = clnr_core::train(&g, &cfg).unwrap();
        let after = evaluate_loss(&out.params, &cfg, &views, &batch).unwrap();
        if after < before {
            lowered += 1;
        }
    }
    assert!(lowered >= 19, "loss went down for {lowered}/20 seeds");
}

#[test]
fn bundle_and_checkpoint_round_trip_preserve_embeddings() {
    let dir = std::env::temp_dir().join(format!("clnr-pipeline-{}", std::process::id()));
    let g = generate_sbm(&SbmConfig { block_sizes: vec![15, 15], feature_dim: 5, seed: 8, ..Default::default() });
    save_bundle(&g, dir.join("tsv"), FeatureFormat::Tsv).unwrap();
    assert_eq!(load_bundle(dir.join("tsv")).unwrap(), g);

    let mut c = RunConfig::new("sbm");
    c.dim = 8;
    c.epochs = 3;
    c.postproc = "mlp_bn".parse().unwrap();
    let cfg = c.train_config();
    let out = clnr_core::train(&g, &cfg).unwrap();
    let ckpt = Checkpoint { encoder: cfg.encoder, kind: cfg.kind, in_dim: g.feature_dim, seed: cfg.seed, params: out.params.clone() };
    save_checkpoint(&ckpt, &dir.join("model.ckpt")).unwrap();
    let back = load_checkpoint(&dir.join("model.ckpt")).unwrap();
    let a = embed_full(&out.params, &cfg.encoder, &cfg.kind, &g).unwrap();
    let b = embed_full(&back.params, &back.encoder, &back.kind, &g).unwrap();
    assert_eq!(a, b);
    let _ = std::fs::remove_dir_all(&dir);
}
