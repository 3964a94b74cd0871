//! Reverse-mode differentiation over dense matrices.
//!
//! A [`Tape`] records every operation eagerly: each call computes the forward
//! value immediately and appends a record naming its inputs. Records are
//! appended in evaluation order, so the tape is topologically sorted by
//! construction and [`Tape::backward`] simply walks it in reverse.
//!
//! Only the primitives the training pipeline needs are provided. Sparse
//! operands (adjacency, sparse features) are constants: gradients flow to the
//! dense side only.

mod gradcheck;
mod ops;

use std::sync::Arc;

pub use gradcheck::{grad_check, grad_check_many};

use crate::error::{Error, Result};
use crate::tensor::{SparseMatrix, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ActivationKind {
    Relu,
    Elu,
    /// Leaky ReLU with a learnable slope; the slope is a separate 1x1 node.
    Prelu,
}

impl ActivationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ActivationKind::Relu => "relu",
            ActivationKind::Elu => "elu",
            ActivationKind::Prelu => "prelu",
        }
    }
}

impl std::str::FromStr for ActivationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(ActivationKind::Relu),
            "elu" => Ok(ActivationKind::Elu),
            "prelu" => Ok(ActivationKind::Prelu),
            other => Err(Error::Config(format!("unknown activation '{other}'"))),
        }
    }
}

/// Initial slope for PReLU activations.
pub const PRELU_INIT_SLOPE: f64 = 0.25;

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(NodeId, NodeId),
    SpMM(Arc<SparseMatrix>, NodeId),
    Activation { kind: ActivationKind, x: NodeId, slope: Option<NodeId> },
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    AddScalar(NodeId),
    Square(NodeId),
    Sqrt(NodeId),
    Transpose(NodeId),
    ColMean(NodeId),
    AddRow(NodeId, NodeId),
    SubRow(NodeId, NodeId),
    DivRow(NodeId, NodeId),
    MulScalar(NodeId, NodeId),
    DivScalar(NodeId, NodeId),
    Trace(NodeId),
    SumAll(NodeId),
    SumSquares(NodeId),
    GatherRows(NodeId, Vec<usize>),
    NormalizeRows { x: NodeId, eps: f64, norms: Vec<f64> },
    /// Scalar loss whose local gradients were computed during the forward pass.
    FusedLoss { inputs: Vec<(NodeId, Tensor)> },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

/// Record of a differentiable computation.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// A value that receives no gradient.
    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.push_raw(value, Op::Leaf, false)
    }

    /// A value whose gradient is reported by [`Tape::backward`].
    pub fn param(&mut self, value: Tensor) -> NodeId {
        self.push_raw(value, Op::Leaf, true)
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    pub fn shape(&self, id: NodeId) -> (usize, usize) {
        self.nodes[id.0].value.shape()
    }

    fn needs_grad(&self, id: NodeId) -> bool {
        self.nodes[id.0].needs_grad
    }

    fn push_raw(&mut self, value: Tensor, op: Op, needs_grad: bool) -> NodeId {
        self.nodes.push(Node { value, op, needs_grad });
        NodeId(self.nodes.len() - 1)
    }

    fn push(&mut self, op_name: &'static str, value: Tensor, op: Op, inputs: &[NodeId]) -> Result<NodeId> {
        if !value.is_finite() {
            return Err(Error::numeric(op_name, "non-finite value produced"));
        }
        let needs_grad = inputs.iter().any(|&i| self.needs_grad(i));
        Ok(self.push_raw(value, op, needs_grad))
    }

    /// Gradients of the scalar `loss` with respect to every node on the tape.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        let shape = self.shape(loss);
        if shape != (1, 1) {
            return Err(Error::contract("backward", format!("loss must be 1x1, got {}x{}", shape.0, shape.1)));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::scalar(1.0));
        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.needs_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[idx].take() else { continue };
            self.propagate(&node.op, &node.value, &g, &mut grads)?;
        }
        let keep = self.nodes.iter().map(|n| n.needs_grad && matches!(n.op, Op::Leaf));
        let grads = grads.into_iter().zip(keep).map(|(g, k)| if k { g } else { None }).collect();
        Ok(Gradients { grads, shapes: self.nodes.iter().map(|n| n.value.shape()).collect() })
    }
}

/// Gradient map from [`Tape::backward`]. Leaves off every path to the loss get zeros.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    shapes: Vec<(usize, usize)>,
}

impl Gradients {
    pub fn get(&self, id: NodeId) -> Tensor {
        match &self.grads[id.0] {
            Some(g) => g.clone(),
            None => {
                let (r, c) = self.shapes[id.0];
                Tensor::zeros(r, c)
            }
        }
    }

    pub fn take(&mut self, id: NodeId) -> Tensor {
        self.grads[id.0].take().unwrap_or_else(|| {
            let (r, c) = self.shapes[id.0];
            Tensor::zeros(r, c)
        })
    }

    /// True when some path carried gradient into `id`.
    pub fn is_reached(&self, id: NodeId) -> bool {
        self.grads[id.0].is_some()
    }
}

/// Population column means and variances of `x`, both `1 x cols`.
pub fn column_moments(tape: &mut Tape, x: NodeId) -> Result<(NodeId, NodeId)> {
    let (rows, _) = tape.shape(x);
    if rows < 2 {
        return Err(Error::degenerate("column_moments", format!("need at least 2 rows, got {rows}")));
    }
    let mean = tape.col_mean(x)?;
    let centered = tape.sub_row(x, mean)?;
    let sq = tape.square(centered)?;
    let var = tape.col_mean(sq)?;
    Ok((mean, var))
}
