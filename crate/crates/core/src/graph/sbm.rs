use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use super::{adjacency_from_edges, GraphBundle, Splits};
use crate::seed::{derived_rng, tag};
use crate::tensor::Tensor;

/// Planted-partition graph with class-informative Gaussian features.
#[derive(Clone, Debug)]
pub struct SbmConfig {
    pub block_sizes: Vec<usize>,
    pub p_in: f64,
    pub p_out: f64,
    /// Added to the feature coordinate matching the node's class.
    pub class_mean_shift: f64,
    pub noise_std: f64,
    /// Feature width; 0 means one coordinate per class. Extra coordinates are pure noise.
    pub feature_dim: usize,
    pub seed: u64,
}

impl Default for SbmConfig {
    fn default() -> Self {
        SbmConfig {
            block_sizes: vec![50, 50],
            p_in: 0.1,
            p_out: 0.01,
            class_mean_shift: 1.0,
            noise_std: 1.0,
            feature_dim: 0,
            seed: 0,
        }
    }
}

pub fn generate_sbm(cfg: &SbmConfig) -> GraphBundle {
    assert!(!cfg.block_sizes.is_empty(), "block_sizes must be nonempty");
    assert!((0.0..=1.0).contains(&cfg.p_in) && (0.0..=1.0).contains(&cfg.p_out), "edge probabilities must lie in [0,1]");
    let k = cfg.block_sizes.len();
    let labels: Vec<usize> = cfg.block_sizes.iter().enumerate().flat_map(|(c, &s)| std::iter::repeat_n(c, s)).collect();
    let n = labels.len();

    let mut rng = derived_rng(cfg.seed, tag::SBM, 0);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let p = if labels[i] == labels[j] { cfg.p_in } else { cfg.p_out };
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    let adjacency = adjacency_from_edges(n, &edges).expect("indices in range");

    let dim = if cfg.feature_dim == 0 { k } else { cfg.feature_dim.max(k) };
    let mut rng = derived_rng(cfg.seed, tag::SBM, 1);
    let noise = Normal::new(0.0, cfg.noise_std.max(0.0)).expect("finite noise std");
    let mut features = Tensor::zeros(n, dim);
    for (i, &y) in labels.iter().enumerate() {
        for (j, v) in features.row_mut(i).iter_mut().enumerate() {
            let mean = if j == y { cfg.class_mean_shift } else { 0.0 };
            *v = mean + if cfg.noise_std > 0.0 { noise.sample(&mut rng) } else { 0.0 };
        }
    }

    let splits = Splits::stratified(&labels, k, &mut derived_rng(cfg.seed, tag::SBM, 2));
    GraphBundle { n_nodes: n, feature_dim: dim, n_classes: k, adjacency, features, labels, splits }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{undirected_edges, validate_bundle};

    #[test]
    fn complete_blocks_no_crossings() {
        let g = generate_sbm(&SbmConfig { block_sizes: vec![4, 3], p_in: 1.0, p_out: 0.0, ..Default::default() });
        let e = undirected_edges(&g.adjacency);
        assert_eq!(e.len(), 6 + 3);
        assert!(e.iter().all(|&(i, j)| g.labels[i] == g.labels[j]));
    }

    #[test]
    fn within_block_count_is_binomial() {
        let g = generate_sbm(&SbmConfig { block_sizes: vec![50, 50], p_in: 0.2, p_out: 0.01, seed: 11, ..Default::default() });
        let within = undirected_edges(&g.adjacency).iter().filter(|&&(i, j)| g.labels[i] == g.labels[j]).count() as f64;
        let trials = 2.0 * (50.0 * 49.0 / 2.0);
        let (mean, sd) = (trials * 0.2, (trials * 0.2 * 0.8f64).sqrt());
        assert!((within - mean).abs() < 4.0 * sd, "{within} vs {mean}±{sd}");
    }

    #[test]
    fn noiseless_features_constant_within_class() {
        let g = generate_sbm(&SbmConfig { block_sizes: vec![5, 5, 5], noise_std: 0.0, class_mean_shift: 2.0, ..Default::default() });
        for i in 0..g.n_nodes {
            let first = g.labels.iter().position(|&y| y == g.labels[i]).unwrap();
            assert_eq!(g.features.row(i), g.features.row(first));
        }
        assert_eq!(g.features.get(0, 0), 2.0);
    }

    #[test]
    fn valid_and_deterministic() {
        let cfg = SbmConfig { block_sizes: vec![20, 30], feature_dim: 8, seed: 4, ..Default::default() };
        let g = generate_sbm(&cfg);
        assert!(validate_bundle(&g).is_empty());
        assert_eq!(g.feature_dim, 8);
        assert_eq!(generate_sbm(&cfg), g);
    }
}
