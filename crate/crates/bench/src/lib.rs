//! Shared fixtures for the benchmarks in `benches/`.

use clnr_core::graph::{generate_sbm, SbmConfig};
use clnr_core::seed::rng_from;
use clnr_core::{GraphBundle, Tensor};
use rand::Rng;

/// Cora-sized planted-partition graph: 2708 nodes in 7 blocks, about 5.3k
/// edges, 1433 sparse binary features.
pub fn cora_scale_graph(seed: u64) -> GraphBundle {
    let blocks = vec![387, 387, 387, 387, 387, 387, 386];
    let mut g = generate_sbm(&SbmConfig { block_sizes: blocks, p_in: 0.008, p_out: 0.00035, feature_dim: 7, seed, ..Default::default() });
    let mut rng = rng_from(seed ^ 0x5eed);
    g.features = Tensor::from_fn(g.n_nodes, 1433, |_, _| if rng.random::<f64>() < 0.0127 { 1.0 } else { 0.0 });
    g.feature_dim = 1433;
    g
}

pub fn uniform(rows: usize, cols: usize, seed: u64) -> Tensor {
    let mut rng = rng_from(seed);
    Tensor::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}
