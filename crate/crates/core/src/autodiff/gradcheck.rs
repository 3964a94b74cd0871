use super::{NodeId, Tape};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Absolute floor on the relative-error denominator.
const DENOM_FLOOR: f64 = 1e-8;

/// Worst relative error between the reverse-mode gradient of `f` at `point`
/// and central differences with step `h`.
pub fn grad_check<F>(f: F, point: &Tensor, h: f64) -> Result<f64>
where
    F: Fn(&mut Tape, NodeId) -> Result<NodeId>,
{
    grad_check_many(|tape, ids| f(tape, ids[0]), std::slice::from_ref(point), h)
}

/// [`grad_check`] over several parameter tensors at once; every coordinate of
/// every tensor is perturbed.
pub fn grad_check_many<F>(f: F, points: &[Tensor], h: f64) -> Result<f64>
where
    F: Fn(&mut Tape, &[NodeId]) -> Result<NodeId>,
{
    if !(h > 0.0) {
        return Err(Error::contract("grad_check", format!("step must be positive, got {h}")));
    }
    let eval = |pts: &[Tensor]| -> Result<(Tape, Vec<NodeId>, NodeId)> {
        let mut tape = Tape::new();
        let ids: Vec<NodeId> = pts.iter().map(|p| tape.param(p.clone())).collect();
        let loss = f(&mut tape, &ids)?;
        if !tape.value(loss).is_finite() {
            return Err(Error::numeric("grad_check", "non-finite forward value"));
        }
        Ok((tape, ids, loss))
    };

    let (tape, ids, loss) = eval(points)?;
    let grads = tape.backward(loss)?;
    let analytic: Vec<Tensor> = ids.iter().map(|&i| grads.get(i)).collect();

    let mut worst = 0.0f64;
    let mut pts = points.to_vec();
    for p in 0..pts.len() {
        for k in 0..pts[p].len() {
            let orig = pts[p].data()[k];
            pts[p].data_mut()[k] = orig + h;
            let (t, _, l) = eval(&pts)?;
            let plus = t.value(l).item();
            pts[p].data_mut()[k] = orig - h;
            let (t, _, l) = eval(&pts)?;
            let minus = t.value(l).item();
            pts[p].data_mut()[k] = orig;

            let numeric = (plus - minus) / (2.0 * h);
            let a = analytic[p].data()[k];
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(DENOM_FLOOR);
            worst = worst.max(err);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_function_is_exact() {
        let w = Tensor::from_rows(&[[0.5, -1.0], [2.0, 0.25], [1.0, 3.0]]);
        let x = Tensor::from_rows(&[[1.0, 2.0, 3.0]]);
        let err = grad_check(
            |t, x| {
                let w = t.constant(w.clone());
                let y = t.matmul(x, w)?;
                t.sum_all(y)
            },
            &x,
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn rejects_bad_step() {
        let x = Tensor::scalar(1.0);
        assert!(grad_check(|t, x| t.sum_all(x), &x, 0.0).is_err());
    }

    #[test]
    fn non_finite_forward_is_a_numeric_error() {
        let x = Tensor::scalar(-1.0);
        let r = grad_check(|t, x| t.sqrt(x), &x, 1e-5);
        assert!(matches!(r, Err(Error::Numeric { .. })));
    }
}
