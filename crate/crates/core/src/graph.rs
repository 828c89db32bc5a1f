//! Minimal reverse-mode differentiation over dense 2-D arrays.
//!
//! A [`Graph`] owns an append-only list of nodes; building an operation
//! evaluates it eagerly, so node indices are already a topological order and
//! the backward sweep is a single reverse pass. The op set is exactly what
//! the recurrent model and the training loss need, nothing more.
//!
//! Everything is generic over the element type: `f32` for training runs and
//! checkpoints, `f64` for finite-difference verification.

use ndarray::{Array2, Axis};
use num_traits::Float;

use crate::error::{Error, Result};

/// Element type of the engine. `f32` and `f64` are the two instantiations.
pub trait Real:
    Float
    + num_traits::NumAssignOps
    + ndarray::LinalgScalar
    + Send
    + Sync
    + std::fmt::Debug
    + std::fmt::Display
    + std::iter::Sum
    + 'static
{
    fn from_f64(x: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Real for f32 {
    fn from_f64(x: f64) -> Self {
        x as f32
    }
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn as_f64(self) -> f64 {
        self
    }
}

/// Handle to a node of one particular [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(usize);

#[derive(Debug, Clone)]
enum Op<F> {
    Leaf { requires_grad: bool },
    MatMul(NodeId, NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Div(NodeId, NodeId),
    AddRow(NodeId, NodeId),
    Scale(NodeId, F),
    SubFrom(NodeId, F),
    MinScalar(NodeId, F),
    MaxScalar(NodeId, F),
    Clamp(NodeId, F, F),
    Ln(NodeId),
    Sigmoid(NodeId),
    Tanh(NodeId),
    Relu(NodeId),
    SoftmaxRows(NodeId),
    ConcatCols(NodeId, NodeId),
    SliceCols(NodeId, usize, usize),
    Row(NodeId, usize),
    StackRows(Vec<NodeId>),
    SumAll(NodeId),
}

struct Node<F> {
    value: Array2<F>,
    grad: Option<Array2<F>>,
    op: Op<F>,
}

pub struct Graph<F: Real> {
    nodes: Vec<Node<F>>,
}

impl<F: Real> Default for Graph<F> {
    fn default() -> Self {
        Self::new()
    }
}

impl<F: Real> Graph<F> {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    fn push(&mut self, value: Array2<F>, op: Op<F>) -> NodeId {
        self.nodes.push(Node {
            value,
            grad: None,
            op,
        });
        NodeId(self.nodes.len() - 1)
    }

    /// Differentiable input: gradients are accumulated into it.
    pub fn leaf(&mut self, value: Array2<F>) -> NodeId {
        self.push(value, Op::Leaf { requires_grad: true })
    }

    /// Constant input: treated as data, receives no gradient.
    pub fn constant(&mut self, value: Array2<F>) -> NodeId {
        self.push(
            value,
            Op::Leaf {
                requires_grad: false,
            },
        )
    }

    /// 1x1 constant.
    pub fn scalar(&mut self, v: F) -> NodeId {
        self.constant(Array2::from_elem((1, 1), v))
    }

    pub fn value(&self, id: NodeId) -> &Array2<F> {
        &self.nodes[id.0].value
    }

    /// Gradient accumulated by the latest [`Graph::backward`] call; `None`
    /// for nodes the loss does not reach.
    pub fn grad(&self, id: NodeId) -> Option<&Array2<F>> {
        self.nodes[id.0].grad.as_ref()
    }

    pub fn scalar_value(&self, id: NodeId) -> F {
        let v = self.value(id);
        assert_eq!(v.dim(), (1, 1), "node is not a scalar");
        v[(0, 0)]
    }

    fn dims(&self, id: NodeId) -> (usize, usize) {
        self.nodes[id.0].value.dim()
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (ar, ac) = self.dims(a);
        let (br, bc) = self.dims(b);
        assert_eq!(ac, br, "matmul inner dims {}x{} . {}x{}", ar, ac, br, bc);
        let value = self.nodes[a.0].value.dot(&self.nodes[b.0].value);
        self.push(value, Op::MatMul(a, b))
    }

    fn binary_same_shape(&mut self, a: NodeId, b: NodeId, op: fn(NodeId, NodeId) -> Op<F>) -> NodeId {
        assert_eq!(self.dims(a), self.dims(b), "elementwise shape mismatch");
        let value = match op(a, b) {
            Op::Add(..) => &self.nodes[a.0].value + &self.nodes[b.0].value,
            Op::Sub(..) => &self.nodes[a.0].value - &self.nodes[b.0].value,
            Op::Mul(..) => &self.nodes[a.0].value * &self.nodes[b.0].value,
            Op::Div(..) => &self.nodes[a.0].value / &self.nodes[b.0].value,
            _ => unreachable!(),
        };
        self.push(value, op(a, b))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.binary_same_shape(a, b, Op::Add)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.binary_same_shape(a, b, Op::Sub)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.binary_same_shape(a, b, Op::Mul)
    }

    pub fn div(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.binary_same_shape(a, b, Op::Div)
    }

    /// `a + b` with `b` a single row broadcast over the rows of `a`.
    pub fn add_row(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (_, ac) = self.dims(a);
        let (br, bc) = self.dims(b);
        assert_eq!((br, bc), (1, ac), "row broadcast shape mismatch");
        let value = &self.nodes[a.0].value + &self.nodes[b.0].value.row(0);
        self.push(value, Op::AddRow(a, b))
    }

    pub fn scale(&mut self, a: NodeId, c: F) -> NodeId {
        let value = self.nodes[a.0].value.mapv(|x| x * c);
        self.push(value, Op::Scale(a, c))
    }

    /// `c - a`.
    pub fn sub_from(&mut self, a: NodeId, c: F) -> NodeId {
        let value = self.nodes[a.0].value.mapv(|x| c - x);
        self.push(value, Op::SubFrom(a, c))
    }

    pub fn min_scalar(&mut self, a: NodeId, c: F) -> NodeId {
        let value = self.nodes[a.0].value.mapv(|x| x.min(c));
        self.push(value, Op::MinScalar(a, c))
    }

    pub fn max_scalar(&mut self, a: NodeId, c: F) -> NodeId {
        let value = self.nodes[a.0].value.mapv(|x| x.max(c));
        self.push(value, Op::MaxScalar(a, c))
    }

    pub fn clamp(&mut self, a: NodeId, lo: F, hi: F) -> NodeId {
        let value = self.nodes[a.0].value.mapv(|x| x.max(lo).min(hi));
        self.push(value, Op::Clamp(a, lo, hi))
    }

    pub fn ln(&mut self, a: NodeId) -> NodeId {
        let value = self.nodes[a.0].value.mapv(Float::ln);
        self.push(value, Op::Ln(a))
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let one = F::one();
        let value = self.nodes[a.0].value.mapv(|x| one / (one + (-x).exp()));
        self.push(value, Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        let value = self.nodes[a.0].value.mapv(Float::tanh);
        self.push(value, Op::Tanh(a))
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        let zero = F::zero();
        let value = self.nodes[a.0].value.mapv(|x| x.max(zero));
        self.push(value, Op::Relu(a))
    }

    /// Row-wise softmax with the usual max-shift for stability.
    pub fn softmax_rows(&mut self, a: NodeId) -> NodeId {
        let mut value = self.nodes[a.0].value.clone();
        for mut row in value.rows_mut() {
            let max = row.iter().cloned().fold(F::neg_infinity(), F::max);
            row.mapv_inplace(|x| (x - max).exp());
            let sum = row.iter().cloned().sum::<F>();
            row.mapv_inplace(|x| x / sum);
        }
        self.push(value, Op::SoftmaxRows(a))
    }

    pub fn concat_cols(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (ar, _) = self.dims(a);
        let (br, _) = self.dims(b);
        assert_eq!(ar, br, "concat_cols row mismatch");
        let value = ndarray::concatenate(
            Axis(1),
            &[self.nodes[a.0].value.view(), self.nodes[b.0].value.view()],
        )
        .expect("concat shapes verified");
        self.push(value, Op::ConcatCols(a, b))
    }

    pub fn slice_cols(&mut self, a: NodeId, from: usize, to: usize) -> NodeId {
        let (_, ac) = self.dims(a);
        assert!(from < to && to <= ac, "column slice out of range");
        let value = self.nodes[a.0]
            .value
            .slice(ndarray::s![.., from..to])
            .to_owned();
        self.push(value, Op::SliceCols(a, from, to))
    }

    pub fn row(&mut self, a: NodeId, r: usize) -> NodeId {
        let (ar, _) = self.dims(a);
        assert!(r < ar, "row index out of range");
        let value = self.nodes[a.0]
            .value
            .row(r)
            .to_owned()
            .insert_axis(Axis(0));
        self.push(value, Op::Row(a, r))
    }

    /// Stacks 1-row nodes into a matrix, one input per output row.
    pub fn stack_rows(&mut self, rows: &[NodeId]) -> NodeId {
        assert!(!rows.is_empty(), "stack_rows needs at least one row");
        let (_, cols) = self.dims(rows[0]);
        let mut value = Array2::zeros((rows.len(), cols));
        for (i, &id) in rows.iter().enumerate() {
            assert_eq!(self.dims(id), (1, cols), "stack_rows shape mismatch");
            value.row_mut(i).assign(&self.nodes[id.0].value.row(0));
        }
        self.push(value, Op::StackRows(rows.to_vec()))
    }

    /// Sum of every element, as a 1x1 node.
    pub fn sum_all(&mut self, a: NodeId) -> NodeId {
        let value = Array2::from_elem((1, 1), self.nodes[a.0].value.iter().cloned().sum::<F>());
        self.push(value, Op::SumAll(a))
    }

    /// Convenience left fold of [`Graph::add`] over scalar terms.
    pub fn add_all(&mut self, terms: &[NodeId]) -> NodeId {
        assert!(!terms.is_empty(), "add_all needs at least one term");
        let mut acc = terms[0];
        for &t in &terms[1..] {
            acc = self.add(acc, t);
        }
        acc
    }

    fn accumulate(&mut self, id: NodeId, delta: Array2<F>) {
        match &mut self.nodes[id.0].grad {
            Some(g) => *g += &delta,
            slot @ None => *slot = Some(delta),
        }
    }

    /// Reverse sweep from a scalar node. Gradients accumulate additively
    /// into every node that reaches the loss; leaves created with
    /// [`Graph::constant`] are skipped.
    pub fn backward(&mut self, loss: NodeId) -> Result<()> {
        let (r, c) = self.dims(loss);
        if (r, c) != (1, 1) {
            return Err(Error::NonScalarLoss { rows: r, cols: c });
        }
        for node in &mut self.nodes {
            node.grad = None;
        }
        self.nodes[loss.0].grad = Some(Array2::ones((1, 1)));

        for i in (0..=loss.0).rev() {
            let Some(grad) = self.nodes[i].grad.take() else {
                continue;
            };
            let op = self.nodes[i].op.clone();
            match &op {
                Op::Leaf { requires_grad } => {
                    // keep the gradient of differentiable leaves for the caller
                    if *requires_grad {
                        self.nodes[i].grad = Some(grad);
                    }
                }
                Op::MatMul(a, b) => {
                    let da = grad.dot(&self.nodes[b.0].value.t());
                    let db = self.nodes[a.0].value.t().dot(&grad);
                    self.accumulate(*a, da);
                    self.accumulate(*b, db);
                }
                Op::Add(a, b) => {
                    self.accumulate(*a, grad.clone());
                    self.accumulate(*b, grad.clone());
                }
                Op::Sub(a, b) => {
                    self.accumulate(*a, grad.clone());
                    self.accumulate(*b, grad.mapv(|x| -x));
                }
                Op::Mul(a, b) => {
                    let da = &grad * &self.nodes[b.0].value;
                    let db = &grad * &self.nodes[a.0].value;
                    self.accumulate(*a, da);
                    self.accumulate(*b, db);
                }
                Op::Div(a, b) => {
                    let bv = &self.nodes[b.0].value;
                    let da = &grad / bv;
                    let db = (&grad * &self.nodes[a.0].value).mapv(|x| -x) / (bv * bv);
                    self.accumulate(*a, da);
                    self.accumulate(*b, db);
                }
                Op::AddRow(a, b) => {
                    let db = grad.sum_axis(Axis(0)).insert_axis(Axis(0));
                    self.accumulate(*a, grad);
                    self.accumulate(*b, db);
                }
                Op::Scale(a, c) => {
                    self.accumulate(*a, grad.mapv(|x| x * *c));
                }
                Op::SubFrom(a, _) => {
                    self.accumulate(*a, grad.mapv(|x| -x));
                }
                Op::MinScalar(a, c) => {
                    let mask = self.nodes[a.0].value.mapv(|x| {
                        if x <= *c {
                            F::one()
                        } else {
                            F::zero()
                        }
                    });
                    self.accumulate(*a, grad * mask);
                }
                Op::MaxScalar(a, c) => {
                    let mask = self.nodes[a.0].value.mapv(|x| {
                        if x >= *c {
                            F::one()
                        } else {
                            F::zero()
                        }
                    });
                    self.accumulate(*a, grad * mask);
                }
                Op::Clamp(a, lo, hi) => {
                    let mask = self.nodes[a.0].value.mapv(|x| {
                        if x >= *lo && x <= *hi {
                            F::one()
                        } else {
                            F::zero()
                        }
                    });
                    self.accumulate(*a, grad * mask);
                }
                Op::Ln(a) => {
                    let da = &grad / &self.nodes[a.0].value;
                    self.accumulate(*a, da);
                }
                Op::Sigmoid(a) => {
                    let y = &self.nodes[i].value;
                    let da = &grad * &(y * &y.mapv(|v| F::one() - v));
                    self.accumulate(*a, da);
                }
                Op::Tanh(a) => {
                    let y = &self.nodes[i].value;
                    let da = &grad * &y.mapv(|v| F::one() - v * v);
                    self.accumulate(*a, da);
                }
                Op::Relu(a) => {
                    let mask = self.nodes[a.0].value.mapv(|x| {
                        if x > F::zero() {
                            F::one()
                        } else {
                            F::zero()
                        }
                    });
                    self.accumulate(*a, grad * mask);
                }
                Op::SoftmaxRows(a) => {
                    let y = &self.nodes[i].value;
                    let mut da = &grad * y;
                    for (mut drow, yrow) in da.rows_mut().into_iter().zip(y.rows()) {
                        let dot = drow.iter().cloned().sum::<F>();
                        drow.zip_mut_with(&yrow, |d, &yv| *d -= dot * yv);
                    }
                    self.accumulate(*a, da);
                }
                Op::ConcatCols(a, b) => {
                    let (_, ac) = self.dims(*a);
                    let da = grad.slice(ndarray::s![.., ..ac]).to_owned();
                    let db = grad.slice(ndarray::s![.., ac..]).to_owned();
                    self.accumulate(*a, da);
                    self.accumulate(*b, db);
                }
                Op::SliceCols(a, from, to) => {
                    let (ar, ac) = self.dims(*a);
                    let mut da = Array2::zeros((ar, ac));
                    da.slice_mut(ndarray::s![.., *from..*to]).assign(&grad);
                    self.accumulate(*a, da);
                }
                Op::Row(a, r) => {
                    let (ar, ac) = self.dims(*a);
                    let mut da = Array2::zeros((ar, ac));
                    da.row_mut(*r).assign(&grad.row(0));
                    self.accumulate(*a, da);
                }
                Op::StackRows(rows) => {
                    for (r, &id) in rows.iter().enumerate() {
                        let dr = grad.row(r).to_owned().insert_axis(Axis(0));
                        self.accumulate(id, dr);
                    }
                }
                Op::SumAll(a) => {
                    let (ar, ac) = self.dims(*a);
                    let g = grad[(0, 0)];
                    self.accumulate(*a, Array2::from_elem((ar, ac), g));
                }
            }
        }
        Ok(())
    }
}
