use clnr_core::autodiff::Tape;
use clnr_core::eval::{alignment, calinski_harabasz, davies_bouldin, silhouette, uniformity};
use clnr_core::graph::{adjacency_from_edges, normalize_adjacency, perturb_edges, undirected_edges};
use clnr_core::model::{project_sphere, standardize, BN_EPS};
use clnr_core::objective::nt_xent;
use clnr_core::tensor::{SparseMatrix, Tensor};
use proptest::prelude::*;

fn matrix(rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> impl Strategy<Value = Tensor> {
    (rows, cols).prop_flat_map(|(r, c)| {
        prop::collection::vec(-3.0f64..3.0, r * c).prop_map(move |d| Tensor::new(r, c, d).unwrap())
    })
}

fn standardized(x: &Tensor) -> Tensor {
    let mut t = Tape::new();
    let id = t.constant(x.clone());
    let out = standardize(&mut t, id, BN_EPS).unwrap();
    t.value(out).clone()
}

fn projected(x: &Tensor) -> Tensor {
    let mut t = Tape::new();
    let id = t.constant(x.clone());
    let out = project_sphere(&mut t, id).unwrap();
    t.value(out).clone()
}

fn loss(u: &Tensor, v: &Tensor, batch: &[usize], tau: f64) -> f64 {
    let mut t = Tape::new();
    let a = t.constant(u.clone());
    let b = t.constant(v.clone());
    let l = nt_xent(&mut t, a, b, batch, tau).unwrap();
    t.value(l).item()
}

/// Random orthogonal matrix from Gram-Schmidt on a seeded Gaussian-ish matrix.
fn rotation(d: usize, seed: &[f64]) -> Tensor {
    let mut cols: Vec<Vec<f64>> = Vec::new();
    for j in 0..d {
        let mut v: Vec<f64> = (0..d).map(|i| seed[(i * d + j) % seed.len()] + if i == j { 2.0 } else { 0.0 }).collect();
        for c in &cols {
            let dot: f64 = v.iter().zip(c).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(c).for_each(|(a, b)| *a -= dot * b);
        }
        let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        cols.push(v.into_iter().map(|a| a / n).collect());
    }
    Tensor::from_fn(d, d, |i, j| cols[j][i])
}

fn random_graph(n: usize, bits: &[bool]) -> SparseMatrix {
    let mut edges = Vec::new();
    let mut k = 0;
    for i in 0..n {
        for j in i + 1..n {
            if bits[k % bits.len()] {
                edges.push((i, j));
            }
            k += 1;
        }
    }
    adjacency_from_edges(n, &edges).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn standardized_columns_have_zero_mean_unit_variance(x in matrix(3..40, 1..8)) {
        let (_, raw_var) = x.column_moments();
        let (m, v) = standardized(&x).column_moments();
        for j in 0..x.cols() {
            prop_assert!(m[j].abs() < 1e-6);
            if raw_var[j] > 1e3 * BN_EPS {
                prop_assert!((v[j] - 1.0).abs() < 1e-3, "col {j}: raw var {} -> {}", raw_var[j], v[j]);
            }
        }
    }

    #[test]
    fn standardization_ignores_column_shift_and_scale(x in matrix(4..30, 1..6), shift in -5.0f64..5.0, scale in 0.5f64..4.0) {
        let (_, raw_var) = x.column_moments();
        prop_assume!(raw_var.iter().all(|&v| v > 1e-2));
        let y = x.map(|a| scale * a + shift);
        // ε breaks exact invariance; the residual is O(ε / var)
        prop_assert!(standardized(&x).max_abs_diff(&standardized(&y)) < 1e-2);
    }

    #[test]
    fn sphere_projection_gives_unit_rows(x in matrix(1..20, 1..6)) {
        let p = projected(&x);
        for (i, row) in p.row_iter().enumerate() {
            let n = row.iter().map(|a| a * a).sum::<f64>().sqrt();
            let raw = x.row(i).iter().map(|a| a * a).sum::<f64>().sqrt();
            if raw > 1e-9 {
                prop_assert!((n - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn nt_xent_is_symmetric_in_views(u in matrix(6..7, 3..4), v in matrix(6..7, 3..4), tau in 0.1f64..2.0) {
        let batch = [0, 2, 3, 5];
        let a = loss(&u, &v, &batch, tau);
        let b = loss(&v, &u, &batch, tau);
        prop_assert!((a - b).abs() < 1e-10 * a.abs().max(1.0));
        prop_assert!(a.is_finite());
    }

    #[test]
    fn nt_xent_ignores_row_scale(u in matrix(5..6, 3..4), v in matrix(5..6, 3..4), s in 0.1f64..10.0) {
        let all = [0, 1, 2, 3, 4];
        prop_assume!(u.row_iter().chain(v.row_iter()).all(|r| r.iter().map(|a| a * a).sum::<f64>() > 1e-3));
        let a = loss(&u, &v, &all, 0.5);
        let b = loss(&u.scale(s), &v, &all, 0.5);
        prop_assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn geometry_metrics_are_rotation_invariant(x in matrix(8..9, 3..4), y in matrix(8..9, 3..4), seed in prop::collection::vec(-1.0f64..1.0, 9)) {
        let r = rotation(3, &seed);
        let (xr, yr) = (x.matmul(&r).unwrap(), y.matmul(&r).unwrap());
        let labels = [0, 0, 0, 1, 1, 1, 2, 2];
        prop_assert!((alignment(&x, &y, 2.0).unwrap() - alignment(&xr, &yr, 2.0).unwrap()).abs() < 1e-10);
        prop_assert!((uniformity(&x, 2.0).unwrap() - uniformity(&xr, 2.0).unwrap()).abs() < 1e-10);
        prop_assert!((silhouette(&x, &labels).unwrap() - silhouette(&xr, &labels).unwrap()).abs() < 1e-9);
        let db = davies_bouldin(&x, &labels).unwrap();
        prop_assert!((db - davies_bouldin(&xr, &labels).unwrap()).abs() < 1e-8 * db.max(1.0));
        let ch = calinski_harabasz(&x, &labels).unwrap();
        prop_assert!((ch - calinski_harabasz(&xr, &labels).unwrap()).abs() < 1e-8 * ch.max(1.0));
    }

    #[test]
    fn uniformity_ignores_row_order(x in matrix(3..15, 1..5), seed: u64) {
        let mut idx: Vec<usize> = (0..x.rows()).collect();
        idx.rotate_left((seed % x.rows() as u64) as usize);
        idx.reverse();
        let p = x.gather_rows(&idx);
        prop_assert!((uniformity(&x, 2.0).unwrap() - uniformity(&p, 2.0).unwrap()).abs() < 1e-10);
        // alignment needs the same permutation on both sides
        prop_assert!((alignment(&x, &x.map(|a| a + 0.1), 2.0).unwrap() - alignment(&p, &p.map(|a| a + 0.1), 2.0).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn uniformity_is_at_most_zero(x in matrix(2..12, 1..5)) {
        prop_assert!(uniformity(&x, 2.0).unwrap() <= 1e-12);
    }

    #[test]
    fn perturbation_adds_exact_edge_count(n in 5usize..25, bits in prop::collection::vec(prop::bool::weighted(0.2), 1..60), p in 0.0f64..1.0, seed: u64) {
        let a = random_graph(n, &bits);
        let base = undirected_edges(&a).len();
        let max_edges = n * (n - 1) / 2;
        let want = base + (base as f64 * p).floor() as usize;
        prop_assume!(want <= max_edges);
        let b = perturb_edges(&a, p, seed).unwrap();
        prop_assert!(b.is_symmetric());
        prop_assert_eq!(undirected_edges(&b).len(), want);
        for (i, j) in undirected_edges(&a) {
            prop_assert!(b.contains(i, j));
        }
        for i in 0..n {
            prop_assert!(!b.contains(i, i));
        }
    }

    #[test]
    fn normalized_adjacency_is_symmetric_with_bounded_spectrum(n in 2usize..20, bits in prop::collection::vec(any::<bool>(), 1..40)) {
        let a = normalize_adjacency(&random_graph(n, &bits));
        let m = a.matrix();
        prop_assert!(m.is_symmetric());
        // power iteration: the spectral radius is at most 1
        let mut v = Tensor::filled(n, 1, 1.0);
        for _ in 0..200 {
            let w = m.spmm(&v).unwrap();
            let norm = w.frobenius_norm();
            v = w.scale(1.0 / norm);
        }
        let lambda = m.spmm(&v).unwrap().frobenius_norm();
        prop_assert!(lambda <= 1.0 + 1e-9);
    }
}
