use clnr_bench::cora_scale_graph;
use clnr_core::{train, RunConfig};
use criterion::{criterion_group, criterion_main, Criterion};

/// One full training epoch (two views, encoder, postprocessor, loss, Adam)
/// at the default Cora-row config, per postprocessor.
fn epoch(c: &mut Criterion) {
    let g = cora_scale_graph(0);
    let mut group = c.benchmark_group("epoch cora-scale dim 512");
    group.sample_size(10);
    for kind in ["bn", "mlp", "none", "dbn"] {
        let mut cfg = RunConfig::new("bench");
        cfg.epochs = 1;
        cfg.postproc = kind.parse().unwrap();
        let tc = cfg.train_config();
        group.bench_function(kind, |b| b.iter(|| train(&g, &tc).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, epoch);
criterion_main!(benches);
