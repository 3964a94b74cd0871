use clnr_bench::{cora_scale_graph, uniform};
use clnr_core::autodiff::Tape;
use clnr_core::graph::normalize_adjacency;
use clnr_core::model::{standardize, whiten, BN_EPS};
use clnr_core::objective::{nt_xent, sample_batch};
use clnr_core::tensor::gemm;
use clnr_core::Tensor;
use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

fn dense(c: &mut Criterion) {
    let a = uniform(2708, 512, 1);
    let b = uniform(512, 512, 2);
    c.bench_function("gemm 2708x512x512", |bench| {
        let mut out = Tensor::zeros(2708, 512);
        bench.iter(|| gemm(1.0, black_box(&a), false, black_box(&b), false, 0.0, &mut out))
    });
}

fn sparse(c: &mut Criterion) {
    let g = cora_scale_graph(0);
    let adj = normalize_adjacency(&g.adjacency);
    let x = uniform(g.n_nodes, 512, 3);
    c.bench_function("spmm normalized adjacency x 512", |bench| bench.iter(|| adj.matrix().spmm(black_box(&x)).unwrap()));
}

fn losses(c: &mut Criterion) {
    let u = uniform(2708, 512, 4);
    let v = uniform(2708, 512, 5);
    let batch = sample_batch(2708, 1024, 6);
    c.bench_function("nt_xent m=1024 forward+backward", |bench| {
        bench.iter(|| {
            let mut t = Tape::new();
            let a = t.param(u.clone());
            let b = t.param(v.clone());
            let l = nt_xent(&mut t, a, b, &batch, 0.5).unwrap();
            t.backward(l).unwrap()
        })
    });
    let mut post = c.benchmark_group("postprocess forward+backward 2708x512");
    post.bench_function("bn", |bench| {
        bench.iter(|| {
            let mut t = Tape::new();
            let z = t.param(u.clone());
            let s = standardize(&mut t, z, BN_EPS).unwrap();
            let l = t.sum_squares(s).unwrap();
            t.backward(l).unwrap()
        })
    });
    post.sample_size(10);
    post.bench_function("dbn", |bench| {
        bench.iter(|| {
            let mut t = Tape::new();
            let z = t.param(u.clone());
            let s = whiten(&mut t, z, BN_EPS, 5).unwrap();
            let l = t.sum_squares(s).unwrap();
            t.backward(l).unwrap()
        })
    });
    post.finish();
}

criterion_group!(benches, dense, sparse, losses);
criterion_main!(benches);
