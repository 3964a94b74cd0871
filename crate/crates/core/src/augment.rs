//! Stochastic graph views: edge dropping and per-entry feature masking.

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::graph::{adjacency_from_edges, normalize_adjacency, undirected_edges, GraphBundle, NormalizedAdjacency};
use crate::seed::{derive_seed, rng_from};
use crate::tensor::{SparseMatrix, Tensor};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AugmentConfig {
    /// Probability that an undirected edge is dropped.
    pub p_e: f64,
    /// Probability that a feature matrix entry is zeroed.
    pub p_f: f64,
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("p_e", self.p_e), ("p_f", self.p_f)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("{name} must lie in [0,1], got {p}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct View {
    pub features: Tensor,
    pub adjacency: NormalizedAdjacency,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ViewPair {
    pub view1: View,
    pub view2: View,
}

/// One Bernoulli draw per undirected edge; both directions share its fate.
pub fn drop_edges(a: &SparseMatrix, p_e: f64, seed: u64) -> SparseMatrix {
    let mut rng = rng_from(seed);
    let kept: Vec<(usize, usize)> = undirected_edges(a).into_iter().filter(|_| rng.random::<f64>() >= p_e).collect();
    adjacency_from_edges(a.rows(), &kept).expect("subset of a valid adjacency")
}

/// Zeroes each entry independently with probability `p_f`.
pub fn mask_features(x: &Tensor, p_f: f64, seed: u64) -> Tensor {
    let mut rng = rng_from(seed);
    let mut out = x.clone();
    for v in out.data_mut() {
        if rng.random::<f64>() < p_f {
            *v = 0.0;
        }
    }
    out
}

fn make_view(g: &GraphBundle, cfg: &AugmentConfig, seed: u64) -> View {
    let features = mask_features(&g.features, cfg.p_f, derive_seed(seed, "mask", 0));
    let dropped = drop_edges(&g.adjacency, cfg.p_e, derive_seed(seed, "drop", 0));
    View { features, adjacency: normalize_adjacency(&dropped) }
}

/// Two independent views of `g`, fully determined by `(g, cfg, seed)`.
pub fn make_views(g: &GraphBundle, cfg: &AugmentConfig, seed: u64) -> ViewPair {
    ViewPair {
        view1: make_view(g, cfg, derive_seed(seed, "view", 1)),
        view2: make_view(g, cfg, derive_seed(seed, "view", 2)),
    }
}
