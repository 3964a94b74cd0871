//! Frozen-embedding evaluation: linear probe, alignment/uniformity and
//! label-based clustering scores.

use crate::autodiff::Tape;
use crate::error::{Error, Result};
use crate::graph::Splits;
use crate::objective::{adam_step, AdamState};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbeConfig {
    pub lr2: f64,
    pub wd2: f64,
    pub epochs: usize,
    /// Epochs without a new best validation accuracy before stopping.
    pub patience: usize,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig { lr2: 5e-3, wd2: 1e-4, epochs: 300, patience: 30 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProbeResult {
    pub test_accuracy: f64,
    pub val_accuracy: f64,
    /// `F x K` weights and `1 x K` bias at the best validation epoch.
    pub weights: Tensor,
    pub bias: Tensor,
    pub epochs_run: usize,
}

fn logits(x: &Tensor, w: &Tensor, b: &Tensor) -> Tensor {
    let mut out = x.matmul(w).expect("probe shapes checked");
    for r in 0..out.rows() {
        out.row_mut(r).iter_mut().zip(b.data()).for_each(|(o, bb)| *o += bb);
    }
    out
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = k;
        }
    }
    best
}

fn accuracy(x: &Tensor, y: &[usize], w: &Tensor, b: &Tensor) -> f64 {
    if y.is_empty() {
        return 0.0;
    }
    let l = logits(x, w, b);
    let hits = l.row_iter().zip(y).filter(|(r, &t)| argmax(r) == t).count();
    hits as f64 / y.len() as f64
}

/// Mean softmax cross-entropy and its gradient with respect to the logits.
fn softmax_ce(logits: &Tensor, y: &[usize]) -> (f64, Tensor) {
    let n = logits.rows() as f64;
    let mut grad = Tensor::zeros(logits.rows(), logits.cols());
    let mut loss = 0.0;
    for (i, (row, &t)) in logits.row_iter().zip(y).enumerate() {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = row.iter().map(|v| (v - max).exp()).sum();
        let lse = max + z.ln();
        loss += lse - row[t];
        for (k, g) in grad.row_mut(i).iter_mut().enumerate() {
            *g = ((row[k] - lse).exp() - if k == t { 1.0 } else { 0.0 }) / n;
        }
    }
    (loss / n, grad)
}

/// Multinomial logistic regression on frozen embeddings: full-batch Adam on
/// the train split, early-stopped on validation accuracy, scored on test.
/// Fully deterministic.
pub fn linear_probe(e: &Tensor, labels: &[usize], splits: &Splits, cfg: &ProbeConfig) -> Result<ProbeResult> {
    if e.cols() == 0 || e.rows() == 0 {
        return Err(Error::degenerate("linear_probe", format!("embedding matrix is {}x{}", e.rows(), e.cols())));
    }
    if !e.is_finite() {
        return Err(Error::numeric("linear_probe", "non-finite embeddings"));
    }
    if labels.len() != e.rows() {
        return Err(Error::shape("linear_probe", format!("{} labels for {} rows", labels.len(), e.rows())));
    }
    if !(cfg.lr2 > 0.0) || !(cfg.wd2 >= 0.0) || cfg.epochs == 0 {
        return Err(Error::Config("probe needs lr2 > 0, wd2 >= 0 and at least one epoch".into()));
    }
    let train_y: Vec<usize> = splits.train.iter().map(|&i| labels[i]).collect();
    if train_y.iter().all(|&y| Some(&y) == train_y.first()) {
        return Err(Error::degenerate("linear_probe", "train split has fewer than two classes"));
    }
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let f = e.cols();
    let x_train = e.gather_rows(&splits.train);
    let x_val = e.gather_rows(&splits.val);
    let x_test = e.gather_rows(&splits.test);
    let val_y: Vec<usize> = splits.val.iter().map(|&i| labels[i]).collect();
    let test_y: Vec<usize> = splits.test.iter().map(|&i| labels[i]).collect();

    // the objective is convex, so start from zero rather than a random draw
    let mut w = Tensor::zeros(f, k);
    let mut b = Tensor::zeros(1, k);
    let mut adam = AdamState::new([(f, k), (1, k)]);

    let mut best = (f64::NEG_INFINITY, w.clone(), b.clone());
    let mut since_best = 0;
    let mut epochs_run = 0;
    for _ in 0..cfg.epochs {
        epochs_run += 1;
        let mut tape = Tape::new();
        let x = tape.constant(x_train.clone());
        let wn = tape.param(w.clone());
        let bn = tape.param(b.clone());
        let xw = tape.matmul(x, wn)?;
        let l = tape.add_row(xw, bn)?;
        let (value, grad) = softmax_ce(tape.value(l), &train_y);
        let loss = tape.fused_loss("softmax_ce", value, vec![(l, grad)])?;
        let grads = tape.backward(loss)?;
        let gs = [grads.get(wn), grads.get(bn)];
        adam_step(&mut adam, &mut [&mut w, &mut b], &gs, cfg.lr2, cfg.wd2)?;

        let val_acc = if val_y.is_empty() { accuracy(&x_train, &train_y, &w, &b) } else { accuracy(&x_val, &val_y, &w, &b) };
        if val_acc > best.0 {
            best = (val_acc, w.clone(), b.clone());
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }
    let (val_accuracy, weights, bias) = best;
    Ok(ProbeResult { test_accuracy: accuracy(&x_test, &test_y, &weights, &bias), val_accuracy, weights, bias, epochs_run })
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Mean of `‖uᵢ − vᵢ‖^α` over matched rows.
pub fn alignment(u: &Tensor, v: &Tensor, alpha: f64) -> Result<f64> {
    if u.shape() != v.shape() {
        return Err(Error::shape("alignment", format!("{:?} vs {:?}", u.shape(), v.shape())));
    }
    if u.rows() == 0 {
        return Err(Error::degenerate("alignment", "no rows"));
    }
    let total: f64 = u.row_iter().zip(v.row_iter()).map(|(a, b)| sq_dist(a, b).sqrt().powf(alpha)).sum();
    Ok(total / u.rows() as f64)
}

/// `log mean_{i≠j} exp(−t‖xᵢ − xⱼ‖²)`.
pub fn uniformity(e: &Tensor, t: f64) -> Result<f64> {
    let n = e.rows();
    if n < 2 {
        return Err(Error::degenerate("uniformity", format!("need at least 2 rows, got {n}")));
    }
    // each unordered pair stands for both orderings, so the mean is unchanged
    let mut exps = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            exps.push(-t * sq_dist(e.row(i), e.row(j)));
        }
    }
    let max = exps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = exps.iter().map(|x| (x - max).exp()).sum();
    Ok(max + (sum / exps.len() as f64).ln())
}

/// Distinct labels in ascending order and per-row cluster positions.
fn clusters(labels: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let mut present: Vec<usize> = labels.to_vec();
    present.sort_unstable();
    present.dedup();
    let pos = labels.iter().map(|y| present.binary_search(y).unwrap()).collect();
    (present, pos)
}

fn check_labels(op: &'static str, e: &Tensor, labels: &[usize]) -> Result<(usize, Vec<usize>)> {
    if labels.len() != e.rows() {
        return Err(Error::shape(op, format!("{} labels for {} rows", labels.len(), e.rows())));
    }
    let (present, pos) = clusters(labels);
    if present.len() < 2 {
        return Err(Error::degenerate(op, "need at least two classes"));
    }
    Ok((present.len(), pos))
}

fn centroids(e: &Tensor, pos: &[usize], k: usize) -> (Tensor, Vec<usize>) {
    let mut c = Tensor::zeros(k, e.cols());
    let mut counts = vec![0usize; k];
    for (row, &p) in e.row_iter().zip(pos) {
        counts[p] += 1;
        c.row_mut(p).iter_mut().zip(row).for_each(|(a, b)| *a += b);
    }
    for (p, &n) in counts.iter().enumerate() {
        c.row_mut(p).iter_mut().for_each(|a| *a /= n as f64);
    }
    (c, counts)
}

/// Mean silhouette coefficient with Euclidean distances. Members of
/// singleton clusters score 0.
pub fn silhouette(e: &Tensor, labels: &[usize]) -> Result<f64> {
    let (k, pos) = check_labels("silhouette", e, labels)?;
    let n = e.rows();
    let mut counts = vec![0usize; k];
    pos.iter().for_each(|&p| counts[p] += 1);
    // sums[i * k + c]: total distance from node i to members of cluster c
    let mut sums = vec![0.0; n * k];
    for i in 0..n {
        for j in i + 1..n {
            let d = sq_dist(e.row(i), e.row(j)).sqrt();
            sums[i * k + pos[j]] += d;
            sums[j * k + pos[i]] += d;
        }
    }
    let mut total = 0.0;
    for i in 0..n {
        let own = pos[i];
        if counts[own] < 2 {
            continue;
        }
        let x = sums[i * k + own] / (counts[own] - 1) as f64;
        let y = (0..k).filter(|&c| c != own).map(|c| sums[i * k + c] / counts[c] as f64).fold(f64::INFINITY, f64::min);
        let den = x.max(y);
        if den > 0.0 {
            total += (y - x) / den;
        }
    }
    Ok(total / n as f64)
}

/// Davies–Bouldin index over the label-defined clusters.
pub fn davies_bouldin(e: &Tensor, labels: &[usize]) -> Result<f64> {
    let (k, pos) = check_labels("davies_bouldin", e, labels)?;
    let (c, counts) = centroids(e, &pos, k);
    let mut scatter = vec![0.0; k];
    for (row, &p) in e.row_iter().zip(&pos) {
        scatter[p] += sq_dist(row, c.row(p)).sqrt();
    }
    scatter.iter_mut().zip(&counts).for_each(|(s, &n)| *s /= n as f64);
    let mut total = 0.0;
    for i in 0..k {
        let mut worst = 0.0f64;
        for j in (0..k).filter(|&j| j != i) {
            let m = sq_dist(c.row(i), c.row(j)).sqrt();
            if m == 0.0 {
                return Err(Error::degenerate("davies_bouldin", "two clusters share a centroid"));
            }
            worst = worst.max((scatter[i] + scatter[j]) / m);
        }
        total += worst;
    }
    Ok(total / k as f64)
}

/// Calinski–Harabasz variance ratio over the label-defined clusters.
pub fn calinski_harabasz(e: &Tensor, labels: &[usize]) -> Result<f64> {
    let (k, pos) = check_labels("calinski_harabasz", e, labels)?;
    let n = e.rows();
    if n <= k {
        return Err(Error::degenerate("calinski_harabasz", format!("{n} points for {k} clusters")));
    }
    let (c, counts) = centroids(e, &pos, k);
    let mut overall = vec![0.0; e.cols()];
    for row in e.row_iter() {
        overall.iter_mut().zip(row).for_each(|(a, b)| *a += b / n as f64);
    }
    let between: f64 = (0..k).map(|p| counts[p] as f64 * sq_dist(c.row(p), &overall)).sum();
    let within: f64 = e.row_iter().zip(&pos).map(|(row, &p)| sq_dist(row, c.row(p))).sum();
    if within == 0.0 {
        return Err(Error::degenerate("calinski_harabasz", "zero within-cluster dispersion"));
    }
    Ok(between / within * (n - k) as f64 / (k - 1) as f64)
}

pub const METRICS_HEADER: &str = "dataset,method,dim,seed,accuracy,align,unif,sc,db,ch,seconds";

/// One evaluated run. `accuracy` is `None` when the probe was skipped.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub dataset: String,
    pub method: String,
    pub dim: usize,
    pub seed: u64,
    pub accuracy: Option<f64>,
    /// `None` when no model was available to embed augmented views.
    pub alignment: Option<f64>,
    pub uniformity: f64,
    pub sc: f64,
    pub db: f64,
    pub ch: f64,
    pub seconds: f64,
}

impl MetricsReport {
    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(|a| format!("{a:.6}")).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6}",
            self.dataset,
            self.method,
            self.dim,
            self.seed,
            opt(self.accuracy),
            opt(self.alignment),
            self.uniformity,
            self.sc,
            self.db,
            self.ch,
            self.seconds
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from;
    use rand::seq::SliceRandom;
    use rand_distr::{Distribution, StandardNormal};

    fn randn(rows: usize, cols: usize, seed: u64) -> Tensor {
        let mut rng = rng_from(seed);
        Tensor::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
    }

    fn four_points() -> (Tensor, Vec<usize>) {
        (Tensor::from_rows(&[[0.0, 0.0], [0.0, 1.0], [10.0, 0.0], [10.0, 1.0]]), vec![0, 0, 1, 1])
    }

    #[test]
    fn clustering_hand_examples() {
        let (e, y) = four_points();
        let y_far = (10.0 + 101f64.sqrt()) / 2.0;
        assert!((silhouette(&e, &y).unwrap() - (y_far - 1.0) / y_far).abs() < 1e-12);
        assert!((silhouette(&e, &y).unwrap() - 0.900).abs() < 1e-3);
        assert!((davies_bouldin(&e, &y).unwrap() - 0.1).abs() < 1e-12);
        assert!((calinski_harabasz(&e, &y).unwrap() - 200.0).abs() < 1e-9);
    }

    #[test]
    fn clustering_degenerate_cases() {
        let two = Tensor::from_rows(&[[0.0], [1.0]]);
        assert_eq!(silhouette(&two, &[0, 1]).unwrap(), 0.0);
        let same = Tensor::filled(4, 2, 3.0);
        assert_eq!(silhouette(&same, &[0, 0, 1, 1]).unwrap(), 0.0);
        assert!(matches!(silhouette(&same, &[0, 0, 0, 0]), Err(Error::Degenerate { .. })));
        assert!(matches!(davies_bouldin(&same, &[0, 0, 1, 1]), Err(Error::Degenerate { .. })));
        assert!(matches!(calinski_harabasz(&same, &[0, 0, 1, 1]), Err(Error::Degenerate { .. })));
        let points = Tensor::from_rows(&[[0.0], [0.0], [5.0], [5.0]]);
        assert_eq!(davies_bouldin(&points, &[0, 0, 1, 1]).unwrap(), 0.0);
    }

    #[test]
    fn alignment_and_uniformity_examples() {
        let u = Tensor::from_rows(&[[1.0, 0.0], [0.0, 1.0]]);
        assert_eq!(alignment(&u, &u, 2.0).unwrap(), 0.0);
        let neg = u.scale(-1.0);
        assert!((alignment(&u, &neg, 2.0).unwrap() - 4.0).abs() < 1e-15);
        assert!(matches!(alignment(&u, &Tensor::zeros(3, 2), 2.0), Err(Error::Shape { .. })));

        assert_eq!(uniformity(&Tensor::filled(5, 3, 0.5), 2.0).unwrap(), 0.0);
        let anti = Tensor::from_rows(&[[1.0, 0.0], [-1.0, 0.0]]);
        assert!((uniformity(&anti, 2.0).unwrap() + 8.0).abs() < 1e-12);
        assert!(matches!(uniformity(&Tensor::zeros(1, 3), 2.0), Err(Error::Degenerate { .. })));
    }

    #[test]
    fn uniformity_matches_double_loop() {
        let e = randn(50, 3, 7);
        let mut acc = 0.0;
        for i in 0..50 {
            for j in 0..50 {
                if i != j {
                    acc += (-2.0 * sq_dist(e.row(i), e.row(j))).exp();
                }
            }
        }
        let want = (acc / (50.0 * 49.0)).ln();
        assert!((uniformity(&e, 2.0).unwrap() - want).abs() < 1e-12);
    }

    fn blobs(n: usize, seed: u64) -> (Tensor, Vec<usize>, Splits) {
        let mut rng = rng_from(seed);
        let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
        let e = Tensor::from_fn(n, 4, |i, _| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z * 0.3 + if labels[i] == 0 { -5.0 } else { 5.0 }
        });
        let splits = Splits::stratified(&labels, 2, &mut rng);
        (e, labels, splits)
    }

    #[test]
    fn probe_separates_blobs() {
        let (e, y, s) = blobs(200, 1);
        let r = linear_probe(&e, &y, &s, &ProbeConfig { lr2: 0.01, ..Default::default() }).unwrap();
        assert_eq!(r.test_accuracy, 1.0);
    }

    #[test]
    fn probe_on_shuffled_labels_is_chance() {
        let k = 4;
        let n = 2000;
        let e = randn(n, 8, 2);
        let mut y: Vec<usize> = (0..n).map(|i| i % k).collect();
        y.shuffle(&mut rng_from(9));
        let s = Splits::stratified(&y, k, &mut rng_from(3));
        let r = linear_probe(&e, &y, &s, &ProbeConfig::default()).unwrap();
        let nt = s.test.len() as f64;
        let sd = (0.25 * 0.75 / nt).sqrt();
        assert!((r.test_accuracy - 0.25).abs() < 4.0 * sd, "{}", r.test_accuracy);
    }

    #[test]
    fn probe_rejects_degenerate_inputs() {
        let (e, _, s) = blobs(40, 1);
        let one_class = vec![0; 40];
        assert!(matches!(linear_probe(&e, &one_class, &s, &ProbeConfig::default()), Err(Error::Degenerate { .. })));
        let empty = Tensor::zeros(40, 0);
        let y: Vec<usize> = (0..40).map(|i| i % 2).collect();
        assert!(matches!(linear_probe(&empty, &y, &s, &ProbeConfig::default()), Err(Error::Degenerate { .. })));
    }

    #[test]
    fn probe_is_deterministic() {
        let (e, y, s) = blobs(100, 4);
        let cfg = ProbeConfig::default();
        assert_eq!(linear_probe(&e, &y, &s, &cfg).unwrap(), linear_probe(&e, &y, &s, &cfg).unwrap());
    }

    #[test]
    fn csv_row_leaves_skipped_accuracy_empty() {
        let r = MetricsReport {
            dataset: "sbm".into(),
            method: "CLNR".into(),
            dim: 16,
            seed: 0,
            accuracy: None,
            alignment: Some(0.5),
            uniformity: -2.0,
            sc: 0.1,
            db: 1.0,
            ch: 3.0,
            seconds: 0.25,
        };
        assert_eq!(r.csv_row(), "sbm,CLNR,16,0,,0.500000,-2.000000,0.100000,1.000000,3.000000,0.250000");
        assert_eq!(METRICS_HEADER.split(',').count(), r.csv_row().split(',').count());
    }
}
