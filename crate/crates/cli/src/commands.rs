use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clnr_core::eval::{MetricsReport, ProbeConfig};
use clnr_core::experiment::{evaluate_embeddings, evaluate_model, perturbed, run, EvalOptions, RunLabel};
use clnr_core::graph::{generate_sbm, read_f32_matrix, validate_bundle, write_f32_matrix, FeatureFormat, SbmConfig};
use clnr_core::model::{load_checkpoint, save_checkpoint, Checkpoint};
use clnr_core::objective::{history_csv, train_with};
use clnr_core::{embed_full, load_bundle, save_bundle, Error, GraphBundle, RunConfig};

use crate::results::{self, Table};
use crate::{CliResult, Failure, SweepMode, EXIT_NUMERIC, EXIT_USAGE};

pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const EMBEDDINGS_FILE: &str = "embeddings.bin";
pub const HISTORY_FILE: &str = "history.csv";
pub const CONFIG_FILE: &str = "config.txt";
pub const RESULTS_FILE: &str = "results.csv";

#[derive(Clone, Copy, Debug)]
pub struct EvalFlags {
    pub probe: bool,
    pub pre_projection: bool,
    pub no_wd: bool,
}

fn load_config(path: &Path, overrides: &[String]) -> CliResult<RunConfig> {
    let mut cfg = RunConfig::load(path)?;
    for o in overrides {
        let (k, v) = o.split_once('=').ok_or_else(|| Failure::usage(anyhow!("--set expects KEY=VALUE, got '{o}'")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    cfg.train_config().validate()?;
    Ok(cfg)
}

/// Last path component of a bundle directory, used as the dataset label.
fn dataset_name(path: &Path) -> String {
    path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| path.display().to_string())
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> CliResult {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display())).map_err(Failure::usage)
}

fn report(path: &Path, r: &MetricsReport) -> CliResult {
    let row = r.csv_row();
    results::append(path, &row)?;
    println!("{row}");
    Ok(())
}

pub fn train(config: &Path, overrides: &[String]) -> CliResult {
    let cfg = load_config(config, overrides)?;
    let g = load_bundle(&cfg.dataset)?;
    let tc = cfg.train_config();
    let out = &cfg.out_dir;
    fs::create_dir_all(out).with_context(|| out.display().to_string()).map_err(Failure::usage)?;
    write(&out.join(CONFIG_FILE), cfg.to_text())?;

    let result = train_with(&g, &tc, |r| eprintln!("epoch {:>4}  loss {:.6}  {:.3}s", r.epoch, r.loss, r.seconds));
    let trained = match result {
        Ok(t) => t,
        Err(e) => {
            if let Error::Aborted { history, .. } = &e {
                write(&out.join(HISTORY_FILE), history_csv(history))?;
            }
            return Err(e.into());
        }
    };
    write(&out.join(HISTORY_FILE), history_csv(&trained.history))?;
    let ckpt = Checkpoint { encoder: tc.encoder, kind: tc.kind, in_dim: g.feature_dim, seed: tc.seed, params: trained.params };
    save_checkpoint(&ckpt, &out.join(CHECKPOINT_FILE))?;
    let emb = embed_full(&ckpt.params, &tc.encoder, &tc.kind, &g)?;
    if !emb.projected.is_finite() {
        return Err(Failure { code: EXIT_NUMERIC, error: anyhow!("non-finite embeddings") });
    }
    write(&out.join(EMBEDDINGS_FILE), write_f32_matrix(&emb.projected))?;
    let seconds: f64 = trained.history.iter().map(|r| r.seconds).sum();
    println!("{} {} epochs in {seconds:.2}s -> {}", cfg.method(), trained.history.len(), out.display());
    Ok(())
}

fn require(path: PathBuf) -> CliResult<PathBuf> {
    if path.exists() {
        Ok(path)
    } else {
        Err(Failure::usage(anyhow!("missing artifact {}", path.display())))
    }
}

/// Total training time recorded in a run's history, 0 if unavailable.
fn history_seconds(run: &Path) -> f64 {
    let Ok(t) = Table::read(&run.join(HISTORY_FILE)) else { return 0.0 };
    let Ok(col) = t.column("seconds") else { return 0.0 };
    t.rows.iter().filter_map(|r| r[col].parse::<f64>().ok()).sum()
}

fn probe_config(base: ProbeConfig, flags: EvalFlags) -> ProbeConfig {
    if flags.no_wd {
        ProbeConfig { wd2: 0.0, ..base }
    } else {
        base
    }
}

pub fn eval_run(run_dir: &Path, bundle: Option<&Path>, flags: EvalFlags, results: Option<&Path>) -> CliResult {
    let cfg = RunConfig::load(&require(run_dir.join(CONFIG_FILE))?)?;
    let ckpt = load_checkpoint(&require(run_dir.join(CHECKPOINT_FILE))?)?;
    let bundle_path = bundle.map(Path::to_path_buf).unwrap_or_else(|| cfg.dataset.clone());
    let g = load_bundle(&bundle_path)?;
    if ckpt.in_dim != g.feature_dim {
        return Err(Failure::usage(anyhow!("checkpoint expects {} features, bundle has {}", ckpt.in_dim, g.feature_dim)));
    }
    let mut tc = cfg.train_config();
    tc.encoder = ckpt.encoder;
    tc.kind = ckpt.kind;
    let label = RunLabel { dataset: dataset_name(&bundle_path), method: cfg.method().to_string(), seed: cfg.seed, seconds: history_seconds(run_dir) };
    let opts = EvalOptions { probe: flags.probe, pre_projection: flags.pre_projection, probe_config: probe_config(cfg.probe_config(), flags) };
    let (r, _) = evaluate_model(&ckpt.params, &tc, &g, &label, &opts)?;
    let out = results.map(Path::to_path_buf).unwrap_or_else(|| run_dir.join(RESULTS_FILE));
    report(&out, &r)
}

pub fn eval_embeddings(path: &Path, bundle: &Path, method: &str, seed: u64, flags: EvalFlags, results: Option<&Path>) -> CliResult {
    if flags.pre_projection {
        return Err(Failure::usage(anyhow!("--pre-projection needs --run")));
    }
    let bytes = fs::read(require(path.to_path_buf())?)?;
    let e = read_f32_matrix(&bytes).map_err(|d| Failure::usage(anyhow!("{}: {d}", path.display())))?;
    let g = load_bundle(bundle)?;
    if e.rows() != g.n_nodes {
        return Err(Failure::usage(anyhow!("{} embedding rows for {} nodes", e.rows(), g.n_nodes)));
    }
    if !e.is_finite() {
        return Err(Failure { code: EXIT_NUMERIC, error: anyhow!("{} holds non-finite values", path.display()) });
    }
    let label = RunLabel { dataset: dataset_name(bundle), method: method.to_string(), seed, seconds: 0.0 };
    let opts = EvalOptions { probe: flags.probe, pre_projection: false, probe_config: probe_config(ProbeConfig::default(), flags) };
    let r = evaluate_embeddings(&e, &g, &label, &opts)?;
    let out = results.map(Path::to_path_buf).unwrap_or_else(|| path.with_file_name(RESULTS_FILE));
    report(&out, &r)
}

enum Point {
    Dim(usize),
    Rate(f64),
}

fn parse_grid(mode: SweepMode, grid: &[String]) -> CliResult<Vec<Point>> {
    if grid.is_empty() {
        return Err(Failure::usage(anyhow!("empty grid")));
    }
    grid.iter()
        .map(|s| {
            let s = s.trim();
            match mode {
                SweepMode::Dims => s.parse().ok().filter(|&d: &usize| d > 0).map(Point::Dim),
                SweepMode::Perturb => s.parse().ok().filter(|p: &f64| (0.0..=1.0).contains(p)).map(Point::Rate),
            }
            .ok_or_else(|| Failure::usage(anyhow!("bad grid value '{s}'")))
        })
        .collect()
}

pub fn sweep(config: &Path, mode: SweepMode, grid: &[String], seeds: &[u64], overrides: &[String], results: Option<&Path>) -> CliResult {
    let base = load_config(config, overrides)?;
    let points = parse_grid(mode, grid)?;
    let g = load_bundle(&base.dataset)?;
    let name = dataset_name(&base.dataset);
    let seeds = if seeds.is_empty() { vec![base.seed] } else { seeds.to_vec() };
    let out = results.map(Path::to_path_buf).unwrap_or_else(|| base.out_dir.join(RESULTS_FILE));
    let mut failed = 0;
    let mut code = EXIT_USAGE;
    let total = points.len() * seeds.len();
    for point in &points {
        for &seed in &seeds {
            let mut c = base.clone();
            c.seed = seed;
            let outcome = (|| -> CliResult<MetricsReport> {
                let (train_graph, dataset): (std::borrow::Cow<GraphBundle>, String) = match *point {
                    Point::Dim(d) => {
                        c.dim = d;
                        (std::borrow::Cow::Borrowed(&g), name.clone())
                    }
                    Point::Rate(p) => {
                        let pg = perturbed(&g, p, seed)?;
                        let want = g.n_edges() + (g.n_edges() as f64 * p).floor() as usize;
                        eprintln!("p={p} seed={seed}: |A| {} -> {} (expected {want})", g.n_edges(), pg.n_edges());
                        (std::borrow::Cow::Owned(pg), format!("{name}@p={p}"))
                    }
                };
                let tc = c.train_config();
                tc.validate()?;
                let opts = EvalOptions { probe: true, pre_projection: false, probe_config: c.probe_config() };
                Ok(run(&train_graph, &g, &tc, &dataset, c.method(), &opts)?.report)
            })();
            match outcome {
                Ok(r) => report(&out, &r)?,
                Err(f) => {
                    failed += 1;
                    if f.code == EXIT_NUMERIC {
                        code = EXIT_NUMERIC;
                    }
                    eprintln!("point failed (seed {seed}): {:#}", f.error);
                }
            }
        }
    }
    if failed > 0 {
        return Err(Failure { code, error: anyhow!("{failed} of {total} sweep points failed") });
    }
    Ok(())
}

pub fn gen_sbm(cfg: &SbmConfig, out: &Path, format: FeatureFormat) -> CliResult {
    if cfg.block_sizes.is_empty() || cfg.block_sizes.contains(&0) {
        return Err(Failure::usage(anyhow!("block sizes must be positive")));
    }
    for (name, p) in [("p-in", cfg.p_in), ("p-out", cfg.p_out)] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Failure::usage(anyhow!("--{name} must lie in [0, 1], got {p}")));
        }
    }
    if !(cfg.noise_std >= 0.0) || !cfg.class_mean_shift.is_finite() {
        return Err(Failure::usage(anyhow!("noise must be nonnegative and shift finite")));
    }
    let g = generate_sbm(cfg);
    save_bundle(&g, out, format)?;
    println!("{} nodes, {} edges, {} features, {} classes -> {}", g.n_nodes, g.n_edges(), g.feature_dim, g.n_classes, out.display());
    Ok(())
}

pub fn validate(bundle: &Path) -> CliResult {
    let g = load_bundle(bundle)?;
    let nonzero = g.features.data().iter().filter(|&&x| x != 0.0).count();
    println!("nodes      {}", g.n_nodes);
    println!("edges      {}", g.n_edges());
    println!("features   {} (density {:.4})", g.feature_dim, nonzero as f64 / g.features.len().max(1) as f64);
    println!("classes    {}", g.n_classes);
    println!("splits     train {} / val {} / test {}", g.splits.train.len(), g.splits.val.len(), g.splits.test.len());
    let problems = validate_bundle(&g);
    if problems.is_empty() {
        println!("ok");
        return Ok(());
    }
    for p in &problems {
        println!("invalid: {p}");
    }
    Err(Failure::usage(anyhow!("{} problems in {}", problems.len(), bundle.display())))
}
