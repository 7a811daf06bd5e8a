//! Reverse-mode automatic differentiation over matrix-valued nodes.
//!
//! A [`Tape`] is append-only: every op refers to earlier nodes, so the
//! recorded computation is acyclic by construction and backward is a single
//! reverse sweep.

use std::rc::Rc;

use super::ops::{self, gemm};
use super::params::{BoundParams, ParamStore};
use super::{Tensor, TensorError};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(pub(crate) usize);

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddBias(Var, Var),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    Softmax(Var),
    Sigmoid(Var),
    Tanh(Var),
    SumRows(Var),
    Sum(Var),
    Mean(Var),
    Gather(Var, Rc<[usize]>),
    SegmentSum(Var, Rc<[usize]>),
    SegmentSoftmax(Var, Rc<[usize]>),
    BlockSumCols(Var, usize),
    RepeatCols(Var, usize),
    Bce(Var, Rc<Tensor>),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn ng(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    /// A leaf that never receives gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// A differentiable leaf.
    pub fn variable(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Records every parameter of `store` as a differentiable leaf.
    pub fn bind(&mut self, store: &ParamStore) -> BoundParams {
        let vars = store.iter().map(|p| self.variable(p.value.clone())).collect();
        BoundParams::new(vars)
    }

    /// Like [`Tape::bind`] but the parameters act as constants.
    pub fn bind_frozen(&mut self, store: &ParamStore) -> BoundParams {
        let vars = store.iter().map(|p| self.constant(p.value.clone())).collect();
        BoundParams::new(vars)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let v = ops::matmul(self.value(a), self.value(b))?;
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(v, Op::MatMul(a, b), ng))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let v = ops::add(self.value(a), self.value(b))?;
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(v, Op::Add(a, b), ng))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let v = ops::sub(self.value(a), self.value(b))?;
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(v, Op::Sub(a, b), ng))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let v = ops::mul(self.value(a), self.value(b))?;
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(v, Op::Mul(a, b), ng))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Result<Var, TensorError> {
        let v = ops::scale(self.value(a), factor)?;
        let ng = self.ng(a);
        Ok(self.push(v, Op::Scale(a, factor), ng))
    }

    pub fn add_bias(&mut self, a: Var, bias: Var) -> Result<Var, TensorError> {
        let v = ops::add_bias(self.value(a), self.value(bias))?;
        let ng = self.ng(a) || self.ng(bias);
        Ok(self.push(v, Op::AddBias(a, bias), ng))
    }

    /// `x @ w + b`.
    pub fn affine(&mut self, x: Var, w: Var, b: Var) -> Result<Var, TensorError> {
        let h = self.matmul(x, w)?;
        self.add_bias(h, b)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, TensorError> {
        let vals: Vec<&Tensor> = parts.iter().map(|p| self.value(*p)).collect();
        let v = ops::concat_cols(&vals)?;
        let ng = parts.iter().any(|p| self.ng(*p));
        Ok(self.push(v, Op::ConcatCols(parts.to_vec()), ng))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var, TensorError> {
        let vals: Vec<&Tensor> = parts.iter().map(|p| self.value(*p)).collect();
        let v = ops::concat_rows(&vals)?;
        let ng = parts.iter().any(|p| self.ng(*p));
        Ok(self.push(v, Op::ConcatRows(parts.to_vec()), ng))
    }

    pub fn rowwise_softmax(&mut self, a: Var) -> Result<Var, TensorError> {
        let v = ops::rowwise_softmax(self.value(a))?;
        let ng = self.ng(a);
        Ok(self.push(v, Op::Softmax(a), ng))
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var, TensorError> {
        let v = ops::sigmoid(self.value(a))?;
        let ng = self.ng(a);
        Ok(self.push(v, Op::Sigmoid(a), ng))
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var, TensorError> {
        let v = ops::tanh(self.value(a))?;
        let ng = self.ng(a);
        Ok(self.push(v, Op::Tanh(a), ng))
    }

    pub fn sum_rows(&mut self, a: Var) -> Result<Var, TensorError> {
        let v = ops::sum_rows(self.value(a))?;
        let ng = self.ng(a);
        Ok(self.push(v, Op::SumRows(a), ng))
    }

    pub fn sum(&mut self, a: Var) -> Result<Var, TensorError> {
        let v = ops::sum_all(self.value(a))?;
        let ng = self.ng(a);
        Ok(self.push(v, Op::Sum(a), ng))
    }

    pub fn mean(&mut self, a: Var) -> Result<Var, TensorError> {
        let v = ops::mean_all(self.value(a))?;
        let ng = self.ng(a);
        Ok(self.push(v, Op::Mean(a), ng))
    }

    pub fn gather_rows(&mut self, a: Var, index: Rc<[usize]>) -> Result<Var, TensorError> {
        let v = ops::gather_rows(self.value(a), &index)?;
        let ng = self.ng(a);
        Ok(self.push(v, Op::Gather(a, index), ng))
    }

    pub fn segment_sum(
        &mut self,
        a: Var,
        segment: Rc<[usize]>,
        n_segments: usize,
    ) -> Result<Var, TensorError> {
        let v = ops::segment_sum(self.value(a), &segment, n_segments)?;
        let ng = self.ng(a);
        Ok(self.push(v, Op::SegmentSum(a, segment), ng))
    }

    pub fn segment_softmax(
        &mut self,
        a: Var,
        segment: Rc<[usize]>,
        n_segments: usize,
    ) -> Result<Var, TensorError> {
        let v = ops::segment_softmax(self.value(a), &segment, n_segments)?;
        let ng = self.ng(a);
        Ok(self.push(v, Op::SegmentSoftmax(a, segment), ng))
    }

    pub fn block_sum_cols(&mut self, a: Var, block: usize) -> Result<Var, TensorError> {
        let v = ops::block_sum_cols(self.value(a), block)?;
        let ng = self.ng(a);
        Ok(self.push(v, Op::BlockSumCols(a, block), ng))
    }

    pub fn repeat_cols(&mut self, a: Var, times: usize) -> Result<Var, TensorError> {
        let v = ops::repeat_cols(self.value(a), times)?;
        let ng = self.ng(a);
        Ok(self.push(v, Op::RepeatCols(a, times), ng))
    }

    pub fn bce(&mut self, predictions: Var, targets: Tensor) -> Result<Var, TensorError> {
        let v = ops::bce_loss(self.value(predictions), &targets)?;
        let ng = self.ng(predictions);
        Ok(self.push(v, Op::Bce(predictions, Rc::new(targets)), ng))
    }

    /// Propagates d(loss)/d(node) to every node that needs a gradient.
    pub fn backward(&self, loss: Var) -> Result<Gradients, TensorError> {
        if loss.0 >= self.nodes.len() {
            return Err(TensorError::Invalid("loss variable is not on this tape".into()));
        }
        if self.value(loss).len() != 1 {
            return Err(TensorError::Invalid("backward needs a scalar loss".into()));
        }
        let mut grads: Vec<Option<Tensor>> = Vec::with_capacity(self.nodes.len());
        grads.resize_with(self.nodes.len(), || None);
        let shape = self.value(loss).shape().to_vec();
        grads[loss.0] = Some(Tensor::filled(&shape, 1.0));

        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            if !g.is_finite() {
                return Err(TensorError::NonFiniteGradient(format!("node {i}")));
            }
            self.propagate(&node.op, &node.value, &g, &mut grads)?;
            grads[i] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
        if !self.ng(v) {
            return;
        }
        match &mut grads[v.0] {
            Some(acc) => acc.add_assign(&g),
            slot @ None => *slot = Some(g),
        }
    }

    fn propagate(
        &self,
        op: &Op,
        out: &Tensor,
        g: &Tensor,
        grads: &mut [Option<Tensor>],
    ) -> Result<(), TensorError> {
        match op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                let (m, k) = av.dims();
                let n = bv.cols();
                if self.ng(*a) {
                    let mut ga = vec![0.0; m * k];
                    gemm(m, n, k, g.data(), false, bv.data(), true, &mut ga);
                    let ga = Tensor::new(av.shape().to_vec(), ga)?;
                    self.accumulate(grads, *a, ga);
                }
                if self.ng(*b) {
                    let mut gb = vec![0.0; k * n];
                    gemm(k, m, n, av.data(), true, g.data(), false, &mut gb);
                    let gb = Tensor::new(bv.shape().to_vec(), gb)?;
                    self.accumulate(grads, *b, gb);
                }
            }
            Op::Add(a, b) => {
                self.accumulate(grads, *a, g.clone());
                self.accumulate(grads, *b, g.clone());
            }
            Op::Sub(a, b) => {
                self.accumulate(grads, *a, g.clone());
                self.accumulate(grads, *b, ops::scale(g, -1.0)?);
            }
            Op::Mul(a, b) => {
                if self.ng(*a) {
                    self.accumulate(grads, *a, ops::mul(g, self.value(*b))?);
                }
                if self.ng(*b) {
                    self.accumulate(grads, *b, ops::mul(g, self.value(*a))?);
                }
            }
            Op::Scale(a, f) => self.accumulate(grads, *a, ops::scale(g, *f)?),
            Op::AddBias(a, bias) => {
                self.accumulate(grads, *a, g.clone());
                if self.ng(*bias) {
                    let s = ops::sum_rows(g)?;
                    let s = s.reshape(self.value(*bias).shape().to_vec())?;
                    self.accumulate(grads, *bias, s);
                }
            }
            Op::ConcatCols(parts) => {
                let rows = g.rows();
                let mut offset = 0;
                for p in parts {
                    let pv = self.value(*p);
                    let c = pv.cols();
                    if self.ng(*p) {
                        let mut data = Vec::with_capacity(rows * c);
                        for r in 0..rows {
                            data.extend_from_slice(&g.row(r)[offset..offset + c]);
                        }
                        self.accumulate(grads, *p, Tensor::new(pv.shape().to_vec(), data)?);
                    }
                    offset += c;
                }
            }
            Op::ConcatRows(parts) => {
                let cols = g.cols();
                let mut offset = 0;
                for p in parts {
                    let pv = self.value(*p);
                    let n = pv.rows() * cols;
                    if self.ng(*p) {
                        let data = g.data()[offset..offset + n].to_vec();
                        self.accumulate(grads, *p, Tensor::new(pv.shape().to_vec(), data)?);
                    }
                    offset += n;
                }
            }
            Op::Softmax(a) => {
                let (r, c) = out.dims();
                let mut gx = vec![0.0; r * c];
                for i in 0..r {
                    let y = out.row(i);
                    let gy = g.row(i);
                    let dot: f64 = y.iter().zip(gy).map(|(a, b)| a * b).sum();
                    for j in 0..c {
                        gx[i * c + j] = y[j] * (gy[j] - dot);
                    }
                }
                self.accumulate(grads, *a, Tensor::new(out.shape().to_vec(), gx)?);
            }
            Op::Sigmoid(a) => {
                let gx = out.data().iter().zip(g.data()).map(|(y, g)| g * y * (1.0 - y)).collect();
                self.accumulate(grads, *a, Tensor::new(out.shape().to_vec(), gx)?);
            }
            Op::Tanh(a) => {
                let gx = out.data().iter().zip(g.data()).map(|(y, g)| g * (1.0 - y * y)).collect();
                self.accumulate(grads, *a, Tensor::new(out.shape().to_vec(), gx)?);
            }
            Op::SumRows(a) => {
                let av = self.value(*a);
                let (r, c) = av.dims();
                let mut gx = Vec::with_capacity(r * c);
                for _ in 0..r {
                    gx.extend_from_slice(g.data());
                }
                self.accumulate(grads, *a, Tensor::new(av.shape().to_vec(), gx)?);
            }
            Op::Sum(a) => {
                let av = self.value(*a);
                self.accumulate(grads, *a, Tensor::filled(av.shape(), g.item()));
            }
            Op::Mean(a) => {
                let av = self.value(*a);
                let v = g.item() / av.len() as f64;
                self.accumulate(grads, *a, Tensor::filled(av.shape(), v));
            }
            Op::Gather(a, index) => {
                let av = self.value(*a);
                let gx = ops::segment_sum(g, index, av.rows())?;
                self.accumulate(grads, *a, gx.reshape(av.shape().to_vec())?);
            }
            Op::SegmentSum(a, segment) => {
                let gx = ops::gather_rows(g, segment)?;
                let shape = self.value(*a).shape().to_vec();
                self.accumulate(grads, *a, gx.reshape(shape)?);
            }
            Op::SegmentSoftmax(a, segment) => {
                let (r, c) = out.dims();
                let n_seg = segment.iter().max().map_or(0, |m| m + 1);
                let mut dot = vec![0.0; n_seg * c];
                for (e, &s) in segment.iter().enumerate() {
                    for j in 0..c {
                        dot[s * c + j] += g.get(e, j) * out.get(e, j);
                    }
                }
                let mut gx = vec![0.0; r * c];
                for (e, &s) in segment.iter().enumerate() {
                    for j in 0..c {
                        gx[e * c + j] = out.get(e, j) * (g.get(e, j) - dot[s * c + j]);
                    }
                }
                self.accumulate(grads, *a, Tensor::new(out.shape().to_vec(), gx)?);
            }
            Op::BlockSumCols(a, block) => {
                self.accumulate(grads, *a, ops::repeat_cols(g, *block)?);
            }
            Op::RepeatCols(a, times) => {
                self.accumulate(grads, *a, ops::block_sum_cols(g, *times)?);
            }
            Op::Bce(p, targets) => {
                let pv = self.value(*p);
                let n = pv.len();
                let scale = g.item();
                let gx = pv
                    .data()
                    .iter()
                    .zip(targets.data())
                    .map(|(p, y)| scale * ops::bce_grad(*p, *y, n))
                    .collect();
                self.accumulate(grads, *p, Tensor::new(pv.shape().to_vec(), gx)?);
            }
        }
        Ok(())
    }
}
