use std::sync::Arc;

use super::{ActivationKind, NodeId, Op, Tape};
use crate::error::{Error, Result};
use crate::tensor::{gemm, SparseMatrix, Tensor};

fn same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::shape(op, format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    Ok(())
}

fn row_vector(op: &'static str, x: &Tensor, r: &Tensor) -> Result<()> {
    if r.rows() != 1 || r.cols() != x.cols() {
        return Err(Error::shape(op, format!("row operand {:?} does not broadcast over {:?}", r.shape(), x.shape())));
    }
    Ok(())
}

fn scalar_operand(op: &'static str, s: &Tensor) -> Result<()> {
    if s.shape() != (1, 1) {
        return Err(Error::shape(op, format!("expected 1x1 scalar, got {:?}", s.shape())));
    }
    Ok(())
}

fn accumulate(grads: &mut [Option<Tensor>], id: NodeId, g: Tensor) {
    match &mut grads[id.0] {
        Some(acc) => acc.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

fn column_sums(g: &Tensor) -> Tensor {
    let mut out = Tensor::zeros(1, g.cols());
    for r in g.row_iter() {
        for (o, v) in out.data_mut().iter_mut().zip(r) {
            *o += v;
        }
    }
    out
}

impl Tape {
    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.value(a).matmul(self.value(b))?;
        self.push("matmul", v, Op::MatMul(a, b), &[a, b])
    }

    /// `adj * x` with a constant sparse left operand.
    pub fn spmm(&mut self, adj: &Arc<SparseMatrix>, x: NodeId) -> Result<NodeId> {
        let v = adj.spmm(self.value(x))?;
        self.push("spmm", v, Op::SpMM(Arc::clone(adj), x), &[x])
    }

    /// Elementwise nonlinearity. `slope` is required for [`ActivationKind::Prelu`] and ignored otherwise.
    pub fn activation(&mut self, kind: ActivationKind, x: NodeId, slope: Option<NodeId>) -> Result<NodeId> {
        let xv = self.value(x);
        let (v, slope) = match kind {
            ActivationKind::Relu => (xv.map(|t| if t > 0.0 { t } else { 0.0 }), None),
            ActivationKind::Elu => (xv.map(|t| if t > 0.0 { t } else { t.exp_m1() }), None),
            ActivationKind::Prelu => {
                let s = slope.ok_or_else(|| Error::contract("activation", "prelu needs a slope node"))?;
                scalar_operand("activation", self.value(s))?;
                let a = self.value(s).item();
                (xv.map(|t| if t > 0.0 { t } else { a * t }), Some(s))
            }
        };
        let mut inputs = vec![x];
        inputs.extend(slope);
        self.push("activation", v, Op::Activation { kind, x, slope }, &inputs)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        same_shape("add", self.value(a), self.value(b))?;
        let v = self.value(a).zip_map(self.value(b), |x, y| x + y);
        self.push("add", v, Op::Add(a, b), &[a, b])
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        same_shape("sub", self.value(a), self.value(b))?;
        let v = self.value(a).zip_map(self.value(b), |x, y| x - y);
        self.push("sub", v, Op::Sub(a, b), &[a, b])
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        same_shape("mul", self.value(a), self.value(b))?;
        let v = self.value(a).zip_map(self.value(b), |x, y| x * y);
        self.push("mul", v, Op::Mul(a, b), &[a, b])
    }

    pub fn scale(&mut self, x: NodeId, s: f64) -> Result<NodeId> {
        let v = self.value(x).scale(s);
        self.push("scale", v, Op::Scale(x, s), &[x])
    }

    pub fn add_scalar(&mut self, x: NodeId, c: f64) -> Result<NodeId> {
        let v = self.value(x).map(|t| t + c);
        self.push("add_scalar", v, Op::AddScalar(x), &[x])
    }

    pub fn square(&mut self, x: NodeId) -> Result<NodeId> {
        let v = self.value(x).map(|t| t * t);
        self.push("square", v, Op::Square(x), &[x])
    }

    pub fn sqrt(&mut self, x: NodeId) -> Result<NodeId> {
        let xv = self.value(x);
        if xv.data().iter().any(|&t| t < 0.0) {
            return Err(Error::numeric("sqrt", "negative input"));
        }
        let v = xv.map(f64::sqrt);
        self.push("sqrt", v, Op::Sqrt(x), &[x])
    }

    pub fn transpose(&mut self, x: NodeId) -> Result<NodeId> {
        let v = self.value(x).transpose();
        self.push("transpose", v, Op::Transpose(x), &[x])
    }

    /// Column means as a `1 x cols` row.
    pub fn col_mean(&mut self, x: NodeId) -> Result<NodeId> {
        let xv = self.value(x);
        if xv.rows() == 0 {
            return Err(Error::degenerate("col_mean", "no rows"));
        }
        let v = column_sums(xv).scale(1.0 / xv.rows() as f64);
        self.push("col_mean", v, Op::ColMean(x), &[x])
    }

    /// `x + 1 rᵀ`: adds a row vector to every row.
    pub fn add_row(&mut self, x: NodeId, r: NodeId) -> Result<NodeId> {
        row_vector("add_row", self.value(x), self.value(r))?;
        let rv = self.value(r).data().to_vec();
        let mut v = self.value(x).clone();
        let c = v.cols();
        for row in v.data_mut().chunks_mut(c.max(1)) {
            row.iter_mut().zip(&rv).for_each(|(a, b)| *a += b);
        }
        self.push("add_row", v, Op::AddRow(x, r), &[x, r])
    }

    pub fn sub_row(&mut self, x: NodeId, r: NodeId) -> Result<NodeId> {
        row_vector("sub_row", self.value(x), self.value(r))?;
        let rv = self.value(r).data().to_vec();
        let mut v = self.value(x).clone();
        let c = v.cols();
        for row in v.data_mut().chunks_mut(c.max(1)) {
            row.iter_mut().zip(&rv).for_each(|(a, b)| *a -= b);
        }
        self.push("sub_row", v, Op::SubRow(x, r), &[x, r])
    }

    pub fn div_row(&mut self, x: NodeId, r: NodeId) -> Result<NodeId> {
        row_vector("div_row", self.value(x), self.value(r))?;
        let rv = self.value(r).data().to_vec();
        let mut v = self.value(x).clone();
        let c = v.cols();
        for row in v.data_mut().chunks_mut(c.max(1)) {
            row.iter_mut().zip(&rv).for_each(|(a, b)| *a /= b);
        }
        self.push("div_row", v, Op::DivRow(x, r), &[x, r])
    }

    /// `x * s` for a 1x1 node `s`.
    pub fn mul_scalar(&mut self, x: NodeId, s: NodeId) -> Result<NodeId> {
        scalar_operand("mul_scalar", self.value(s))?;
        let sv = self.value(s).item();
        let v = self.value(x).scale(sv);
        self.push("mul_scalar", v, Op::MulScalar(x, s), &[x, s])
    }

    /// `x / s` for a 1x1 node `s`.
    pub fn div_scalar(&mut self, x: NodeId, s: NodeId) -> Result<NodeId> {
        scalar_operand("div_scalar", self.value(s))?;
        let sv = self.value(s).item();
        let v = self.value(x).map(|t| t / sv);
        self.push("div_scalar", v, Op::DivScalar(x, s), &[x, s])
    }

    pub fn trace(&mut self, x: NodeId) -> Result<NodeId> {
        let xv = self.value(x);
        if xv.rows() != xv.cols() {
            return Err(Error::shape("trace", format!("not square: {:?}", xv.shape())));
        }
        let t = (0..xv.rows()).map(|i| xv.get(i, i)).sum();
        self.push("trace", Tensor::scalar(t), Op::Trace(x), &[x])
    }

    pub fn sum_all(&mut self, x: NodeId) -> Result<NodeId> {
        let s = self.value(x).sum();
        self.push("sum_all", Tensor::scalar(s), Op::SumAll(x), &[x])
    }

    /// Squared Frobenius norm.
    pub fn sum_squares(&mut self, x: NodeId) -> Result<NodeId> {
        let s = self.value(x).data().iter().map(|v| v * v).sum();
        self.push("sum_squares", Tensor::scalar(s), Op::SumSquares(x), &[x])
    }

    pub fn gather_rows(&mut self, x: NodeId, idx: &[usize]) -> Result<NodeId> {
        let xv = self.value(x);
        if let Some(&bad) = idx.iter().find(|&&i| i >= xv.rows()) {
            return Err(Error::shape("gather_rows", format!("row {bad} out of {}", xv.rows())));
        }
        let v = xv.gather_rows(idx);
        self.push("gather_rows", v, Op::GatherRows(x, idx.to_vec()), &[x])
    }

    /// Divides each row by `max(‖row‖₂, eps)`.
    pub fn normalize_rows(&mut self, x: NodeId, eps: f64) -> Result<NodeId> {
        let xv = self.value(x);
        let norms: Vec<f64> = xv.row_iter().map(|r| r.iter().map(|t| t * t).sum::<f64>().sqrt()).collect();
        let mut v = xv.clone();
        for (i, &n) in norms.iter().enumerate() {
            let d = n.max(eps);
            v.row_mut(i).iter_mut().for_each(|t| *t /= d);
        }
        self.push("normalize_rows", v, Op::NormalizeRows { x, eps, norms }, &[x])
    }

    /// Registers a scalar loss computed outside the tape together with its
    /// local gradients with respect to `inputs`.
    pub(crate) fn fused_loss(&mut self, op: &'static str, value: f64, inputs: Vec<(NodeId, Tensor)>) -> Result<NodeId> {
        for (id, g) in &inputs {
            same_shape(op, self.value(*id), g)?;
        }
        if !value.is_finite() || inputs.iter().any(|(_, g)| !g.is_finite()) {
            return Err(Error::numeric(op, "non-finite loss or gradient"));
        }
        let ids: Vec<NodeId> = inputs.iter().map(|(i, _)| *i).collect();
        self.push(op, Tensor::scalar(value), Op::FusedLoss { inputs }, &ids)
    }

    pub(super) fn propagate(
        &self,
        op: &Op,
        out: &Tensor,
        g: &Tensor,
        grads: &mut [Option<Tensor>],
    ) -> Result<()> {
        match op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                if self.needs_grad(*a) {
                    let mut da = Tensor::zeros(av.rows(), av.cols());
                    gemm(1.0, g, false, bv, true, 0.0, &mut da);
                    accumulate(grads, *a, da);
                }
                if self.needs_grad(*b) {
                    let mut db = Tensor::zeros(bv.rows(), bv.cols());
                    gemm(1.0, av, true, g, false, 0.0, &mut db);
                    accumulate(grads, *b, db);
                }
            }
            Op::SpMM(adj, x) => {
                if self.needs_grad(*x) {
                    accumulate(grads, *x, adj.spmm_transpose(g)?);
                }
            }
            Op::Activation { kind, x, slope } => {
                let xv = self.value(*x);
                match kind {
                    ActivationKind::Relu => {
                        if self.needs_grad(*x) {
                            accumulate(grads, *x, xv.zip_map(g, |t, d| if t > 0.0 { d } else { 0.0 }));
                        }
                    }
                    ActivationKind::Elu => {
                        if self.needs_grad(*x) {
                            // for t <= 0 the output is exp(t) - 1, so its derivative is output + 1
                            let dx = Tensor::new(
                                xv.rows(),
                                xv.cols(),
                                xv.data()
                                    .iter()
                                    .zip(out.data())
                                    .zip(g.data())
                                    .map(|((&t, &y), &d)| if t > 0.0 { d } else { (y + 1.0) * d })
                                    .collect(),
                            )?;
                            accumulate(grads, *x, dx);
                        }
                    }
                    ActivationKind::Prelu => {
                        let s = slope.expect("prelu without slope");
                        let a = self.value(s).item();
                        if self.needs_grad(*x) {
                            accumulate(grads, *x, xv.zip_map(g, |t, d| if t > 0.0 { d } else { a * d }));
                        }
                        if self.needs_grad(s) {
                            let da: f64 = xv
                                .data()
                                .iter()
                                .zip(g.data())
                                .filter(|(&t, _)| t <= 0.0)
                                .map(|(&t, &d)| t * d)
                                .sum();
                            accumulate(grads, s, Tensor::scalar(da));
                        }
                    }
                }
            }
            Op::Add(a, b) => {
                if self.needs_grad(*a) {
                    accumulate(grads, *a, g.clone());
                }
                if self.needs_grad(*b) {
                    accumulate(grads, *b, g.clone());
                }
            }
            Op::Sub(a, b) => {
                if self.needs_grad(*a) {
                    accumulate(grads, *a, g.clone());
                }
                if self.needs_grad(*b) {
                    accumulate(grads, *b, g.scale(-1.0));
                }
            }
            Op::Mul(a, b) => {
                if self.needs_grad(*a) {
                    accumulate(grads, *a, g.zip_map(self.value(*b), |d, y| d * y));
                }
                if self.needs_grad(*b) {
                    accumulate(grads, *b, g.zip_map(self.value(*a), |d, x| d * x));
                }
            }
            Op::Scale(x, s) => accumulate(grads, *x, g.scale(*s)),
            Op::AddScalar(x) => accumulate(grads, *x, g.clone()),
            Op::Square(x) => accumulate(grads, *x, self.value(*x).zip_map(g, |t, d| 2.0 * t * d)),
            Op::Sqrt(x) => accumulate(grads, *x, out.zip_map(g, |y, d| d / (2.0 * y))),
            Op::Transpose(x) => accumulate(grads, *x, g.transpose()),
            Op::ColMean(x) => {
                let xv = self.value(*x);
                let inv_n = 1.0 / xv.rows() as f64;
                let row: Vec<f64> = g.data().iter().map(|d| d * inv_n).collect();
                let mut dx = Tensor::zeros(xv.rows(), xv.cols());
                for i in 0..xv.rows() {
                    dx.row_mut(i).copy_from_slice(&row);
                }
                accumulate(grads, *x, dx);
            }
            Op::AddRow(x, r) | Op::SubRow(x, r) => {
                let sign = if matches!(op, Op::AddRow(..)) { 1.0 } else { -1.0 };
                if self.needs_grad(*x) {
                    accumulate(grads, *x, g.clone());
                }
                if self.needs_grad(*r) {
                    accumulate(grads, *r, column_sums(g).scale(sign));
                }
            }
            Op::DivRow(x, r) => {
                let rv = self.value(*r).data();
                if self.needs_grad(*x) {
                    let mut dx = g.clone();
                    let c = dx.cols();
                    for row in dx.data_mut().chunks_mut(c.max(1)) {
                        row.iter_mut().zip(rv).for_each(|(d, s)| *d /= s);
                    }
                    accumulate(grads, *x, dx);
                }
                if self.needs_grad(*r) {
                    // d(x/s)/ds = -x/s² = -out/s
                    let mut dr = Tensor::zeros(1, rv.len());
                    for i in 0..g.rows() {
                        for (j, ((d, y), s)) in g.row(i).iter().zip(out.row(i)).zip(rv).enumerate() {
                            dr.data_mut()[j] -= d * y / s;
                        }
                    }
                    accumulate(grads, *r, dr);
                }
            }
            Op::MulScalar(x, s) => {
                let sv = self.value(*s).item();
                if self.needs_grad(*x) {
                    accumulate(grads, *x, g.scale(sv));
                }
                if self.needs_grad(*s) {
                    let ds = g.data().iter().zip(self.value(*x).data()).map(|(d, t)| d * t).sum();
                    accumulate(grads, *s, Tensor::scalar(ds));
                }
            }
            Op::DivScalar(x, s) => {
                let sv = self.value(*s).item();
                if self.needs_grad(*x) {
                    accumulate(grads, *x, g.scale(1.0 / sv));
                }
                if self.needs_grad(*s) {
                    let ds: f64 = g.data().iter().zip(out.data()).map(|(d, y)| d * y).sum();
                    accumulate(grads, *s, Tensor::scalar(-ds / sv));
                }
            }
            Op::Trace(x) => {
                let n = self.value(*x).rows();
                accumulate(grads, *x, Tensor::identity(n).scale(g.item()));
            }
            Op::SumAll(x) => {
                let (r, c) = self.shape(*x);
                accumulate(grads, *x, Tensor::filled(r, c, g.item()));
            }
            Op::SumSquares(x) => accumulate(grads, *x, self.value(*x).scale(2.0 * g.item())),
            Op::GatherRows(x, idx) => {
                let (r, c) = self.shape(*x);
                let mut dx = Tensor::zeros(r, c);
                for (k, &i) in idx.iter().enumerate() {
                    dx.row_mut(i).iter_mut().zip(g.row(k)).for_each(|(a, b)| *a += b);
                }
                accumulate(grads, *x, dx);
            }
            Op::NormalizeRows { x, eps, norms } => {
                let mut dx = Tensor::zeros(out.rows(), out.cols());
                for (i, &n) in norms.iter().enumerate() {
                    let (gi, yi) = (g.row(i), out.row(i));
                    let dst = dx.row_mut(i);
                    if n > *eps {
                        let proj: f64 = gi.iter().zip(yi).map(|(a, b)| a * b).sum();
                        for ((d, a), y) in dst.iter_mut().zip(gi).zip(yi) {
                            *d = (a - y * proj) / n;
                        }
                    } else {
                        for (d, a) in dst.iter_mut().zip(gi) {
                            *d = a / eps;
                        }
                    }
                }
                accumulate(grads, *x, dx);
            }
            Op::FusedLoss { inputs } => {
                let scale = g.item();
                for (id, local) in inputs {
                    if self.needs_grad(*id) {
                        accumulate(grads, *id, local.scale(scale));
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::column_moments;

    #[test]
    fn relu_and_elu_forward() {
        let mut t = Tape::new();
        let x = t.constant(Tensor::from_rows(&[[-1.0, 2.0]]));
        let y = t.activation(ActivationKind::Relu, x, None).unwrap();
        assert_eq!(t.value(y), &Tensor::from_rows(&[[0.0, 2.0]]));
        let z = t.constant(Tensor::from_rows(&[[0.0]]));
        let e = t.activation(ActivationKind::Elu, z, None).unwrap();
        assert_eq!(t.value(e).item(), 0.0);
    }

    #[test]
    fn elu_derivative_continuous_at_origin() {
        for x0 in [0.0, 1e-12, -1e-12] {
            let mut t = Tape::new();
            let x = t.param(Tensor::scalar(x0));
            let y = t.activation(ActivationKind::Elu, x, None).unwrap();
            let g = t.backward(y).unwrap().get(x).item();
            assert!((g - 1.0).abs() < 1e-9, "elu'({x0}) = {g}");
        }
    }

    #[test]
    fn relu_subgradient_at_zero_is_zero() {
        let mut t = Tape::new();
        let x = t.param(Tensor::scalar(0.0));
        let y = t.activation(ActivationKind::Relu, x, None).unwrap();
        assert_eq!(t.backward(y).unwrap().get(x).item(), 0.0);
    }

    #[test]
    fn prelu_requires_slope() {
        let mut t = Tape::new();
        let x = t.param(Tensor::scalar(-2.0));
        assert!(t.activation(ActivationKind::Prelu, x, None).is_err());
        let a = t.param(Tensor::scalar(0.25));
        let y = t.activation(ActivationKind::Prelu, x, Some(a)).unwrap();
        assert_eq!(t.value(y).item(), -0.5);
        let g = t.backward(y).unwrap();
        assert_eq!(g.get(x).item(), 0.25);
        assert_eq!(g.get(a).item(), -2.0);
    }

    #[test]
    fn spmm_identity_and_path() {
        let mut t = Tape::new();
        let x = Tensor::from_rows(&[[2.0, 0.0], [0.0, 2.0]]);
        let xi = t.constant(x.clone());
        let id = Arc::new(SparseMatrix::identity(2));
        let y = t.spmm(&id, xi).unwrap();
        assert_eq!(t.value(y), &x);
        let half = Arc::new(SparseMatrix::from_triplets(2, 2, &[(0, 0, 0.5), (0, 1, 0.5), (1, 0, 0.5), (1, 1, 0.5)]).unwrap());
        let z = t.spmm(&half, xi).unwrap();
        assert_eq!(t.value(z), &Tensor::from_rows(&[[1.0, 1.0], [1.0, 1.0]]));
    }

    #[test]
    fn identity_matmul() {
        let mut t = Tape::new();
        let m = Tensor::from_fn(3, 2, |i, j| (i * 2 + j) as f64);
        let a = t.constant(Tensor::identity(3));
        let b = t.constant(m.clone());
        let c = t.matmul(a, b).unwrap();
        assert_eq!(t.value(c), &m);
        let bad = t.constant(Tensor::zeros(2, 2));
        assert!(matches!(t.matmul(a, bad), Err(Error::Shape { .. })));
    }

    #[test]
    fn column_moments_examples() {
        let mut t = Tape::new();
        let x = t.constant(Tensor::from_rows(&[[1.0, 2.0], [3.0, 4.0]]));
        let (m, v) = column_moments(&mut t, x).unwrap();
        assert_eq!(t.value(m), &Tensor::from_rows(&[[2.0, 3.0]]));
        assert_eq!(t.value(v), &Tensor::from_rows(&[[1.0, 1.0]]));
        let c = t.constant(Tensor::filled(4, 3, 7.5));
        let (_, v) = column_moments(&mut t, c).unwrap();
        assert!(t.value(v).data().iter().all(|&s| s == 0.0));
        let one = t.constant(Tensor::zeros(1, 3));
        assert!(matches!(column_moments(&mut t, one), Err(Error::Degenerate { .. })));
    }

    #[test]
    fn backward_requires_scalar_loss() {
        let mut t = Tape::new();
        let x = t.param(Tensor::zeros(2, 2));
        assert!(matches!(t.backward(x), Err(Error::Contract { .. })));
    }

    #[test]
    fn constant_loss_gives_zero_gradients() {
        let mut t = Tape::new();
        let w = t.param(Tensor::filled(2, 2, 3.0));
        let c = t.constant(Tensor::scalar(5.0));
        let g = t.backward(c).unwrap();
        assert_eq!(g.get(w), Tensor::zeros(2, 2));
    }

    #[test]
    fn sum_of_linear_map_gradient() {
        // d/dx Σ(xW) = 1 · Wᵀ, i.e. every row equals the row sums of W
        let mut t = Tape::new();
        let w_val = Tensor::from_rows(&[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]);
        let x = t.param(Tensor::from_rows(&[[0.3, -1.0], [2.0, 0.5], [1.0, 1.0]]));
        let w = t.constant(w_val.clone());
        let y = t.matmul(x, w).unwrap();
        let s = t.sum_all(y).unwrap();
        let g = t.backward(s).unwrap().get(x);
        for i in 0..3 {
            assert_eq!(g.row(i), &[6.0, 15.0]);
        }
    }

    #[test]
    fn unreachable_param_gets_exact_zero() {
        let mut t = Tape::new();
        let a = t.param(Tensor::filled(2, 3, 1.5));
        let b = t.param(Tensor::filled(3, 3, 2.0));
        let sq = t.sum_squares(a).unwrap();
        let g = t.backward(sq).unwrap();
        assert!(!g.is_reached(b));
        assert_eq!(g.get(b), Tensor::zeros(3, 3));
        assert_eq!(g.get(a), Tensor::filled(2, 3, 3.0));
    }

    #[test]
    fn normalize_rows_guards_zero_rows() {
        let mut t = Tape::new();
        let x = t.param(Tensor::from_rows(&[[3.0, 4.0], [0.0, 0.0]]));
        let y = t.normalize_rows(x, 1e-12).unwrap();
        assert_eq!(t.value(y), &Tensor::from_rows(&[[0.6, 0.8], [0.0, 0.0]]));
    }

    #[test]
    fn non_finite_forward_is_rejected() {
        let mut t = Tape::new();
        let x = t.constant(Tensor::scalar(1.0));
        let z = t.constant(Tensor::scalar(0.0));
        assert!(matches!(t.div_scalar(x, z), Err(Error::Numeric { .. })));
    }
}
