//! Tape-based reverse-mode automatic differentiation.
//!
//! A [`Graph`] records operations as they are applied (define-by-run):
//! every builder call evaluates its node immediately, so the node list is
//! always in topological order. Trainable leaves refer to tensors owned by
//! a [`ParamStore`]; the graph only borrows them, which keeps per-step
//! graph construction cheap for large weight matrices.
//!
//! Elementwise binary ops broadcast over 2-D views: a rank-1 tensor is a
//! row vector, and an extent of 1 stretches to match the other operand.
//!
//! ```
//! use caml_core::autodiff::{Graph, Group, ParamStore};
//! use caml_core::tensor::Tensor;
//!
//! let mut store = ParamStore::new();
//! let x = store.add("x", Tensor::vector(vec![1.0, 2.0]), Group::Other).unwrap();
//! let mut g = Graph::new(&store);
//! let xn = g.param(x);
//! let sq = g.mul(xn, xn).unwrap();
//! let loss = g.sum(sq);
//! let grads = g.backward(loss).unwrap();
//! assert_eq!(grads.get(x).unwrap().data(), &[2.0, 4.0]);
//! ```

mod ops;
pub mod gradcheck;
pub mod optim;
pub mod params;

use thiserror::Error;

use crate::tensor::{Tensor, TensorError};

pub use ops::ConvGeometry;
pub use optim::{coordinate_schedule, OptimizerState};
pub use params::{Group, GroupSet, Param, ParamId, ParamStore};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("node {node} ({op}): {detail}")]
    Shape {
        node: usize,
        op: &'static str,
        detail: String,
    },
    #[error("backward needs a scalar root; node {node} has shape {shape:?}")]
    NonScalarRoot { node: usize, shape: Vec<usize> },
    #[error("duplicate parameter name `{0}`")]
    DuplicateParam(String),
    #[error("unknown node {0}")]
    UnknownNode(usize),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

pub type Result<T> = std::result::Result<T, GraphError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
pub(crate) enum Op {
    Input,
    Param(ParamId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    MatMul(NodeId, NodeId),
    /// Column-wise concatenation.
    Concat(Vec<NodeId>),
    SliceCols { src: NodeId, start: usize, end: usize },
    Gather { src: NodeId, rows: Vec<usize> },
    SegmentSum { src: NodeId, segments: Vec<usize>, count: usize },
    Reshape { src: NodeId, shape: Vec<usize> },
    Im2Col { src: NodeId, geom: ConvGeometry },
    Sigmoid(NodeId),
    Tanh(NodeId),
    Relu(NodeId),
    Sum(NodeId),
    Mean(NodeId),
    L2Loss(NodeId, NodeId),
    SigmoidCrossEntropy(NodeId, NodeId),
    SoftmaxCrossEntropy { logits: NodeId, labels: Vec<usize> },
    StopGradient(NodeId),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Input => "input",
            Op::Param(_) => "param",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::MatMul(..) => "matmul",
            Op::Concat(_) => "concat",
            Op::SliceCols { .. } => "slice",
            Op::Gather { .. } => "gather",
            Op::SegmentSum { .. } => "segment_sum",
            Op::Reshape { .. } => "reshape",
            Op::Im2Col { .. } => "im2col",
            Op::Sigmoid(_) => "sigmoid",
            Op::Tanh(_) => "tanh",
            Op::Relu(_) => "relu",
            Op::Sum(_) => "sum",
            Op::Mean(_) => "mean",
            Op::L2Loss(..) => "l2_loss",
            Op::SigmoidCrossEntropy(..) => "sigmoid_cross_entropy",
            Op::SoftmaxCrossEntropy { .. } => "softmax_cross_entropy",
            Op::StopGradient(_) => "stop_gradient",
        }
    }

    fn inputs(&self) -> Vec<NodeId> {
        match self {
            Op::Input | Op::Param(_) => vec![],
            Op::Add(a, b)
            | Op::Sub(a, b)
            | Op::Mul(a, b)
            | Op::MatMul(a, b)
            | Op::L2Loss(a, b)
            | Op::SigmoidCrossEntropy(a, b) => vec![*a, *b],
            Op::Concat(v) => v.clone(),
            Op::SliceCols { src, .. }
            | Op::Gather { src, .. }
            | Op::SegmentSum { src, .. }
            | Op::Reshape { src, .. }
            | Op::Im2Col { src, .. } => vec![*src],
            Op::Sigmoid(a)
            | Op::Tanh(a)
            | Op::Relu(a)
            | Op::Sum(a)
            | Op::Mean(a)
            | Op::StopGradient(a) => vec![*a],
            Op::SoftmaxCrossEntropy { logits, .. } => vec![*logits],
        }
    }
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    /// `None` for parameter leaves, whose value lives in the store.
    value: Option<Tensor>,
    requires_grad: bool,
}

/// Recorded computation over tensors with parameter leaves borrowed from a
/// [`ParamStore`].
pub struct Graph<'p> {
    params: &'p ParamStore,
    nodes: Vec<Node>,
}

/// Gradients of a scalar root with respect to every parameter it reaches.
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, id: ParamId) -> Option<&Tensor> {
        self.grads.get(id.0).and_then(Option::as_ref)
    }

    pub fn get_by_name<'a>(&'a self, store: &ParamStore, name: &str) -> Option<&'a Tensor> {
        store.id(name).and_then(|id| self.get(id))
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Tensor)> {
        self.grads
            .iter()
            .enumerate()
            .filter_map(|(i, g)| g.as_ref().map(|t| (ParamId(i), t)))
    }
}

impl<'p> Graph<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Self {
            params,
            nodes: Vec::new(),
        }
    }

    pub fn store(&self) -> &'p ParamStore {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        let node = &self.nodes[id.0];
        match (&node.op, &node.value) {
            (_, Some(v)) => v,
            (Op::Param(p), None) => self.params.get(*p),
            _ => unreachable!("non-parameter node without a value"),
        }
    }

    /// A constant leaf; receives no gradient.
    pub fn input(&mut self, value: Tensor) -> NodeId {
        self.nodes.push(Node {
            op: Op::Input,
            value: Some(value),
            requires_grad: false,
        });
        NodeId(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: f64) -> NodeId {
        self.input(Tensor::scalar(value))
    }

    pub fn param(&mut self, id: ParamId) -> NodeId {
        self.nodes.push(Node {
            op: Op::Param(id),
            value: None,
            requires_grad: true,
        });
        NodeId(self.nodes.len() - 1)
    }

    fn push(&mut self, op: Op) -> Result<NodeId> {
        let index = self.nodes.len();
        for i in op.inputs() {
            if i.0 >= index {
                return Err(GraphError::UnknownNode(i.0));
            }
        }
        let value = self.eval(&op).map_err(|detail| GraphError::Shape {
            node: index,
            op: op.name(),
            detail,
        })?;
        let requires_grad = !matches!(op, Op::StopGradient(_))
            && op.inputs().iter().any(|i| self.nodes[i.0].requires_grad);
        self.nodes.push(Node {
            op,
            value: Some(value),
            requires_grad,
        });
        Ok(NodeId(index))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.push(Op::Add(a, b))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.push(Op::Sub(a, b))
    }

    /// Elementwise (Hadamard) product with broadcasting.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.push(Op::Mul(a, b))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.push(Op::MatMul(a, b))
    }

    /// Concatenates along columns; all parts need the same row count.
    pub fn concat(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        if parts.len() == 1 {
            return Ok(parts[0]);
        }
        self.push(Op::Concat(parts.to_vec()))
    }

    pub fn slice_cols(&mut self, src: NodeId, start: usize, end: usize) -> Result<NodeId> {
        self.push(Op::SliceCols { src, start, end })
    }

    /// Selects rows of `src` (embedding lookup).
    pub fn gather(&mut self, src: NodeId, rows: Vec<usize>) -> Result<NodeId> {
        self.push(Op::Gather { src, rows })
    }

    /// Sums rows sharing a segment id into a `count × cols` result.
    pub fn segment_sum(&mut self, src: NodeId, segments: Vec<usize>, count: usize) -> Result<NodeId> {
        self.push(Op::SegmentSum {
            src,
            segments,
            count,
        })
    }

    pub fn reshape(&mut self, src: NodeId, shape: &[usize]) -> Result<NodeId> {
        self.push(Op::Reshape {
            src,
            shape: shape.to_vec(),
        })
    }

    /// Extracts convolution patches: `[B × H·W·C]` to `[B·H′·W′ × k·k·C]`.
    pub fn im2col(&mut self, src: NodeId, geom: ConvGeometry) -> Result<NodeId> {
        self.push(Op::Im2Col { src, geom })
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        self.push(Op::Sigmoid(a)).expect("unary op")
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        self.push(Op::Tanh(a)).expect("unary op")
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        self.push(Op::Relu(a)).expect("unary op")
    }

    pub fn sum(&mut self, a: NodeId) -> NodeId {
        self.push(Op::Sum(a)).expect("unary op")
    }

    pub fn mean(&mut self, a: NodeId) -> NodeId {
        self.push(Op::Mean(a)).expect("unary op")
    }

    pub fn stop_gradient(&mut self, a: NodeId) -> NodeId {
        self.push(Op::StopGradient(a)).expect("unary op")
    }

    /// `1 − a`, elementwise.
    pub fn one_minus(&mut self, a: NodeId) -> NodeId {
        let one = self.constant(1.0);
        self.sub(one, a).expect("scalar broadcast")
    }

    /// Squared L2 distance per row, averaged over rows.
    pub fn l2_loss(&mut self, pred: NodeId, target: NodeId) -> Result<NodeId> {
        self.push(Op::L2Loss(pred, target))
    }

    /// Mean sigmoid cross-entropy of logits against targets in `[0, 1]`.
    pub fn sigmoid_cross_entropy(&mut self, logits: NodeId, targets: NodeId) -> Result<NodeId> {
        self.push(Op::SigmoidCrossEntropy(logits, targets))
    }

    /// Mean softmax cross-entropy of `[B × K]` logits against class labels.
    pub fn softmax_cross_entropy(&mut self, logits: NodeId, labels: Vec<usize>) -> Result<NodeId> {
        self.push(Op::SoftmaxCrossEntropy { logits, labels })
    }

    /// Convenience: `x·W + b` with a row-broadcast bias.
    pub fn affine(&mut self, x: NodeId, w: ParamId, b: ParamId) -> Result<NodeId> {
        let wn = self.param(w);
        let bn = self.param(b);
        let xw = self.matmul(x, wn)?;
        self.add(xw, bn)
    }

    /// Re-evaluates every node from its inputs and returns the value of the
    /// last node. Useful after parameter values changed in place.
    pub fn forward(&mut self) -> Result<&Tensor> {
        for index in 0..self.nodes.len() {
            if matches!(self.nodes[index].op, Op::Input | Op::Param(_)) {
                continue;
            }
            let op = self.nodes[index].op.clone();
            let value = self.eval(&op).map_err(|detail| GraphError::Shape {
                node: index,
                op: op.name(),
                detail,
            })?;
            self.nodes[index].value = Some(value);
        }
        let last = self.nodes.len().checked_sub(1).ok_or(GraphError::UnknownNode(0))?;
        Ok(self.value(NodeId(last)))
    }

    /// Reverse-mode sweep from a scalar `root`.
    pub fn backward(&self, root: NodeId) -> Result<Gradients> {
        if root.0 >= self.nodes.len() {
            return Err(GraphError::UnknownNode(root.0));
        }
        let rv = self.value(root);
        if rv.len() != 1 {
            return Err(GraphError::NonScalarRoot {
                node: root.0,
                shape: rv.shape().to_vec(),
            });
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; root.0 + 1];
        grads[root.0] = Some(Tensor::filled(rv.shape(), 1.0));
        let mut out = Gradients {
            grads: vec![None; self.params.len()],
        };

        for index in (0..=root.0).rev() {
            let Some(g) = grads[index].take() else { continue };
            let node = &self.nodes[index];
            if !node.requires_grad {
                continue;
            }
            if let Op::Param(p) = node.op {
                accumulate(&mut out.grads[p.0], g);
                continue;
            }
            for (input, gi) in self.input_grads(&node.op, NodeId(index), &g) {
                if self.nodes[input.0].requires_grad {
                    accumulate(&mut grads[input.0], gi);
                }
            }
        }
        Ok(out)
    }
}

fn accumulate(slot: &mut Option<Tensor>, g: Tensor) {
    match slot {
        Some(acc) => acc
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .for_each(|(a, b)| *a += b),
        None => *slot = Some(g),
    }
}

/// Numerically stable logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests;
