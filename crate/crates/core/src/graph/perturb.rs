use std::collections::HashSet;

use rand::Rng as _;

use super::{adjacency_from_edges, undirected_edges};
use crate::error::{Error, Result};
use crate::seed::rng_from;
use crate::tensor::SparseMatrix;

/// Adds exactly `⌊|A|·p⌋` new undirected edges drawn uniformly without
/// replacement from the absent non-loop pairs, where `|A|` is the
/// undirected edge count. Existing edges are kept.
pub fn perturb_edges(a: &SparseMatrix, p: f64, seed: u64) -> Result<SparseMatrix> {
    if !(p >= 0.0 && p.is_finite()) {
        return Err(Error::Config(format!("perturbation rate must be a finite non-negative number, got {p}")));
    }
    let n = a.rows();
    let edges = undirected_edges(a);
    let k = (edges.len() as f64 * p).floor() as usize;
    if k == 0 {
        return Ok(a.clone());
    }
    let total_pairs = n * n.saturating_sub(1) / 2;
    let absent = total_pairs - edges.len();
    if k > absent {
        return Err(Error::Capacity(format!("need {k} new edges but only {absent} absent pairs exist")));
    }
    let existing: HashSet<(usize, usize)> = edges.iter().copied().collect();
    let mut rng = rng_from(seed);
    let mut added: Vec<(usize, usize)> = Vec::with_capacity(k);

    if k <= absent / 2 {
        // rejection sampling; each accepted pair is uniform over the remaining absent pairs
        let mut chosen = HashSet::with_capacity(k);
        while added.len() < k {
            let i = rng.random_range(0..n);
            let j = rng.random_range(0..n);
            if i == j {
                continue;
            }
            let e = (i.min(j), i.max(j));
            if existing.contains(&e) || !chosen.insert(e) {
                continue;
            }
            added.push(e);
        }
    } else {
        let mut pool = Vec::with_capacity(absent);
        for i in 0..n {
            for j in i + 1..n {
                if !existing.contains(&(i, j)) {
                    pool.push((i, j));
                }
            }
        }
        // partial Fisher-Yates
        for t in 0..k {
            let r = rng.random_range(t..pool.len());
            pool.swap(t, r);
        }
        added.extend_from_slice(&pool[..k]);
    }

    let mut all = edges;
    all.extend(added);
    adjacency_from_edges(n, &all)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn contains_all(big: &SparseMatrix, small: &SparseMatrix) -> bool {
        undirected_edges(small).iter().all(|&(i, j)| big.contains(i, j) && big.contains(j, i))
    }

    #[test]
    fn zero_budget_is_identity() {
        let a = adjacency_from_edges(5, &[(0, 1), (1, 2)]).unwrap();
        assert_eq!(perturb_edges(&a, 0.0, 1).unwrap(), a);
        assert_eq!(perturb_edges(&a, 0.4, 1).unwrap(), a); // ⌊2·0.4⌋ = 0
    }

    #[test]
    fn four_nodes_two_edges_half() {
        // absent pairs of the path 0-1, 2-3 are exactly these four
        let a = adjacency_from_edges(4, &[(0, 1), (2, 3)]).unwrap();
        let absent = [(0, 2), (0, 3), (1, 2), (1, 3)];
        let mut seen = HashSet::new();
        for seed in 0..64 {
            let b = perturb_edges(&a, 0.5, seed).unwrap();
            let e = undirected_edges(&b);
            assert_eq!(e.len(), 3);
            assert!(contains_all(&b, &a));
            let new: Vec<_> = e.into_iter().filter(|x| *x != (0, 1) && *x != (2, 3)).collect();
            assert_eq!(new.len(), 1);
            assert!(absent.contains(&new[0]));
            seen.insert(new[0]);
            assert!(b.is_symmetric());
        }
        assert_eq!(seen.len(), 4, "every absent pair should be reachable");
    }

    #[test]
    fn capacity_error_when_graph_is_too_dense() {
        let a = adjacency_from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        assert!(matches!(perturb_edges(&a, 1.0, 0), Err(Error::Capacity(_))));
        // exactly one absent pair: the dense-pool path fills it
        let b = perturb_edges(&a, 0.5, 0).unwrap();
        assert_eq!(undirected_edges(&b), vec![(0, 1), (0, 2), (1, 2)]);
    }

    #[test]
    fn exact_count_over_seeds_and_rates() {
        let g = crate::graph::generate_sbm(&crate::graph::SbmConfig {
            block_sizes: vec![30, 30],
            p_in: 0.2,
            p_out: 0.02,
            seed: 9,
            ..Default::default()
        });
        let m = g.n_edges();
        for (seed, p) in [(0u64, 0.1), (1, 0.25), (2, 0.5), (3, 0.9)] {
            let b = perturb_edges(&g.adjacency, p, seed).unwrap();
            assert_eq!(undirected_edges(&b).len(), m + (m as f64 * p).floor() as usize);
            assert!(contains_all(&b, &g.adjacency));
        }
    }
}
