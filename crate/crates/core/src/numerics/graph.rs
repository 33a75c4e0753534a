//! Tape-based reverse-mode automatic differentiation.
//!
//! A [`Graph`] records every operation as it is evaluated. Nodes are appended
//! in evaluation order, so the tape is already topologically sorted and the
//! backward pass is a single reverse sweep.

use std::borrow::Cow;

use super::params::{Grads, ParamId, ParamStore};
use super::tensor::{matmul_acc, matmul_at_acc, matmul_bt_acc, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    /// Reduce over rows, leaving one row.
    Rows,
    /// Reduce over columns, leaving one column.
    Cols,
}

#[derive(Debug)]
enum Op {
    Constant,
    Param(ParamId),
    MatMul(NodeId, NodeId),
    /// Same shape, or `b` a single row broadcast over the rows of `a`.
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    MulCol(NodeId, NodeId),
    Scale(NodeId, f64),
    AddScalar(NodeId),
    Tanh(NodeId),
    Sigmoid(NodeId),
    Relu(NodeId),
    Exp(NodeId),
    Log(NodeId),
    Clamp(NodeId, f64, f64),
    /// Row-wise softmax.
    Softmax(NodeId),
    /// Row-wise log-softmax.
    LogSoftmax(NodeId),
    ConcatRows(Vec<NodeId>),
    ConcatCols(Vec<NodeId>),
    Slice {
        src: NodeId,
        row0: usize,
        col0: usize,
    },
    Reshape(NodeId),
    Transpose(NodeId),
    SumAll(NodeId),
    Sum(NodeId, Axis),
    MeanAll(NodeId),
    Mean(NodeId, Axis),
    /// Max along an axis with the flat source index of each winner.
    Max {
        src: NodeId,
        winners: Vec<usize>,
    },
    /// Rows of `table` picked by `ids`; rows listed in `frozen_row` get no gradient.
    Embedding {
        table: NodeId,
        ids: Vec<usize>,
        frozen_row: Option<usize>,
    },
    GatherRows {
        src: NodeId,
        idx: Vec<Option<usize>>,
    },
    BlockSum {
        src: NodeId,
        blocks: usize,
    },
    /// `mu + exp(logvar / 2) * eps`.
    Reparam {
        mu: NodeId,
        logvar: NodeId,
        eps: Vec<f64>,
    },
}

struct Node<'p> {
    value: Cow<'p, Tensor>,
    op: Op,
    needs_grad: bool,
}

/// A recorded computation over parameters borrowed from a [`ParamStore`].
pub struct Graph<'p> {
    store: &'p ParamStore,
    nodes: Vec<Node<'p>>,
    param_nodes: Vec<Option<NodeId>>,
}

impl<'p> Graph<'p> {
    pub fn new(store: &'p ParamStore) -> Self {
        Self { store, nodes: Vec::new(), param_nodes: vec![None; store.len()] }
    }

    pub fn store(&self) -> &'p ParamStore {
        self.store
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> NodeId {
        self.nodes.push(Node { value: Cow::Owned(value), op, needs_grad });
        NodeId(self.nodes.len() - 1)
    }

    fn ng(&self, id: NodeId) -> bool {
        self.nodes[id.0].needs_grad
    }

    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.push(value, Op::Constant, false)
    }

    /// Leaf node for a stored parameter. Repeated calls return the same node.
    pub fn param(&mut self, id: ParamId) -> NodeId {
        if let Some(n) = self.param_nodes[id.0] {
            return n;
        }
        let needs_grad = !self.store.is_frozen(id);
        self.nodes.push(Node { value: Cow::Borrowed(self.store.value(id)), op: Op::Param(id), needs_grad });
        let n = NodeId(self.nodes.len() - 1);
        self.param_nodes[id.0] = Some(n);
        n
    }

    pub fn param_by_name(&mut self, name: &str) -> Result<NodeId> {
        let id = self.store.id(name)?;
        Ok(self.param(id))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (m, k) = self.value(a).dims2();
        let (k2, n) = self.value(b).dims2();
        if k != k2 {
            return Err(Error::shape(format!("matmul {m}x{k} by {k2}x{n}")));
        }
        let mut out = vec![0.0; m * n];
        matmul_acc(self.value(a).data(), self.value(b).data(), &mut out, m, k, n);
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(Tensor::matrix(m, n, out)?, Op::MatMul(a, b), ng))
    }

    fn binary_shape(&self, a: NodeId, b: NodeId, broadcast: bool) -> Result<()> {
        let (ra, ca) = self.value(a).dims2();
        let (rb, cb) = self.value(b).dims2();
        if (ra, ca) == (rb, cb) || (broadcast && rb == 1 && cb == ca) {
            Ok(())
        } else {
            Err(Error::shape(format!("elementwise {ra}x{ca} with {rb}x{cb}")))
        }
    }

    fn out_shape(&self, a: NodeId) -> Vec<usize> {
        let (r, c) = self.value(a).dims2();
        vec![r, c]
    }

    /// `a + b`, broadcasting a single-row `b` over the rows of `a`.
    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary_shape(a, b, true)?;
        let va = self.value(a);
        let vb = self.value(b).data();
        let data: Vec<f64> = if vb.len() == va.len() {
            zip_map(va, self.value(b), |x, y| x + y)
        } else {
            let c = va.cols().max(1);
            va.data().chunks(c).flat_map(|row| row.iter().zip(vb).map(|(x, y)| x + y)).collect()
        };
        let t = Tensor::new(self.out_shape(a), data)?;
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(t, Op::Add(a, b), ng))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary_shape(a, b, false)?;
        let data = zip_map(self.value(a), self.value(b), |x, y| x - y);
        let t = Tensor::new(self.out_shape(a), data)?;
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(t, Op::Sub(a, b), ng))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.binary_shape(a, b, false)?;
        let data = zip_map(self.value(a), self.value(b), |x, y| x * y);
        let t = Tensor::new(self.out_shape(a), data)?;
        let ng = self.ng(a) || self.ng(b);
        Ok(self.push(t, Op::Mul(a, b), ng))
    }

    /// `a * col`, scaling row `i` of `a` by `col[i]` (`col` is `rows x 1`).
    pub fn mul_col(&mut self, a: NodeId, col: NodeId) -> Result<NodeId> {
        let (r, c) = self.value(a).dims2();
        if self.value(col).dims2() != (r, 1) {
            return Err(Error::shape(format!("row scaling {r}x{c} by {:?}", self.value(col).shape())));
        }
        let s = self.value(col).data();
        let data: Vec<f64> =
            self.value(a).data().chunks(c.max(1)).zip(s).flat_map(|(row, k)| row.iter().map(move |x| x * k)).collect();
        let t = Tensor::matrix(r, c, data)?;
        let ng = self.ng(a) || self.ng(col);
        Ok(self.push(t, Op::MulCol(a, col), ng))
    }

    fn unary(&mut self, a: NodeId, op: Op, f: impl Fn(f64) -> f64) -> NodeId {
        let v = self.value(a);
        let t = Tensor::new(v.shape().to_vec(), v.data().iter().map(|&x| f(x)).collect()).expect("same length");
        let ng = self.ng(a);
        self.push(t, op, ng)
    }

    pub fn scale(&mut self, a: NodeId, factor: f64) -> NodeId {
        self.unary(a, Op::Scale(a, factor), |x| x * factor)
    }

    pub fn add_scalar(&mut self, a: NodeId, c: f64) -> NodeId {
        self.unary(a, Op::AddScalar(a), |x| x + c)
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        self.unary(a, Op::Tanh(a), f64::tanh)
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        self.unary(a, Op::Sigmoid(a), sigmoid)
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        self.unary(a, Op::Relu(a), |x| x.max(0.0))
    }

    pub fn exp(&mut self, a: NodeId) -> NodeId {
        self.unary(a, Op::Exp(a), f64::exp)
    }

    pub fn log(&mut self, a: NodeId) -> NodeId {
        self.unary(a, Op::Log(a), f64::ln)
    }

    pub fn clamp(&mut self, a: NodeId, lo: f64, hi: f64) -> NodeId {
        self.unary(a, Op::Clamp(a, lo, hi), |x| x.clamp(lo, hi))
    }

    pub fn softmax(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a);
        let (r, c) = v.dims2();
        let mut out = v.data().to_vec();
        for row in out.chunks_mut(c.max(1)).take(r) {
            softmax_in_place(row);
        }
        let t = Tensor::new(v.shape().to_vec(), out).expect("same length");
        let ng = self.ng(a);
        self.push(t, Op::Softmax(a), ng)
    }

    pub fn log_softmax(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a);
        let c = v.cols().max(1);
        let mut out = v.data().to_vec();
        for row in out.chunks_mut(c) {
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = m + row.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
            for x in row.iter_mut() {
                *x -= lse;
            }
        }
        let t = Tensor::new(v.shape().to_vec(), out).expect("same length");
        let ng = self.ng(a);
        self.push(t, Op::LogSoftmax(a), ng)
    }

    /// Stacks inputs vertically; all must share a column count.
    pub fn concat_rows(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        if parts.is_empty() {
            return Err(Error::invalid("concat of zero tensors"));
        }
        let c = self.value(parts[0]).cols();
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let v = self.value(p);
            if v.cols() != c {
                return Err(Error::shape(format!("concat rows: {} vs {} columns", v.cols(), c)));
            }
            rows += v.rows();
            data.extend_from_slice(v.data());
        }
        let ng = parts.iter().any(|&p| self.ng(p));
        Ok(self.push(Tensor::matrix(rows, c, data)?, Op::ConcatRows(parts.to_vec()), ng))
    }

    /// Joins inputs side by side; all must share a row count.
    pub fn concat_cols(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        if parts.is_empty() {
            return Err(Error::invalid("concat of zero tensors"));
        }
        let r = self.value(parts[0]).rows();
        let mut total = 0;
        for &p in parts {
            let v = self.value(p);
            if v.rows() != r {
                return Err(Error::shape(format!("concat cols: {} vs {} rows", v.rows(), r)));
            }
            total += v.cols();
        }
        let mut data = Vec::with_capacity(r * total);
        for i in 0..r {
            for &p in parts {
                data.extend_from_slice(self.value(p).row_slice(i));
            }
        }
        let ng = parts.iter().any(|&p| self.ng(p));
        Ok(self.push(Tensor::matrix(r, total, data)?, Op::ConcatCols(parts.to_vec()), ng))
    }

    /// Sub-block `[row0, row0 + rows) x [col0, col0 + cols)`.
    pub fn slice(&mut self, src: NodeId, row0: usize, rows: usize, col0: usize, cols: usize) -> Result<NodeId> {
        let v = self.value(src);
        let (r, c) = v.dims2();
        if row0 + rows > r || col0 + cols > c {
            return Err(Error::shape(format!("slice [{row0}+{rows}, {col0}+{cols}] of {r}x{c}")));
        }
        let mut data = Vec::with_capacity(rows * cols);
        for i in row0..row0 + rows {
            data.extend_from_slice(&v.row_slice(i)[col0..col0 + cols]);
        }
        let ng = self.ng(src);
        Ok(self.push(Tensor::matrix(rows, cols, data)?, Op::Slice { src, row0, col0 }, ng))
    }

    pub fn reshape(&mut self, src: NodeId, rows: usize, cols: usize) -> Result<NodeId> {
        let t = self.value(src).clone().reshape(vec![rows, cols])?;
        let ng = self.ng(src);
        Ok(self.push(t, Op::Reshape(src), ng))
    }

    pub fn transpose(&mut self, src: NodeId) -> NodeId {
        let v = self.value(src);
        let (r, c) = v.dims2();
        let mut data = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                data[j * r + i] = v.data()[i * c + j];
            }
        }
        let ng = self.ng(src);
        self.push(Tensor::matrix(c, r, data).expect("same length"), Op::Transpose(src), ng)
    }

    /// Sum of every element, as a scalar.
    pub fn sum_all(&mut self, src: NodeId) -> NodeId {
        let s: f64 = self.value(src).data().iter().sum();
        let ng = self.ng(src);
        self.push(Tensor::scalar(s), Op::SumAll(src), ng)
    }

    pub fn mean_all(&mut self, src: NodeId) -> NodeId {
        let v = self.value(src);
        let s: f64 = v.data().iter().sum::<f64>() / v.len() as f64;
        let ng = self.ng(src);
        self.push(Tensor::scalar(s), Op::MeanAll(src), ng)
    }

    pub fn sum(&mut self, src: NodeId, axis: Axis) -> NodeId {
        let t = reduce(self.value(src), axis);
        let ng = self.ng(src);
        self.push(t, Op::Sum(src, axis), ng)
    }

    pub fn mean(&mut self, src: NodeId, axis: Axis) -> NodeId {
        let v = self.value(src);
        let (r, c) = v.dims2();
        let n = match axis {
            Axis::Rows => r,
            Axis::Cols => c,
        } as f64;
        let mut t = reduce(v, axis);
        for x in t.data_mut() {
            *x /= n;
        }
        let ng = self.ng(src);
        self.push(t, Op::Mean(src, axis), ng)
    }

    /// Maximum along an axis. On ties the first maximal element wins and
    /// receives the whole subgradient.
    pub fn max(&mut self, src: NodeId, axis: Axis) -> NodeId {
        let v = self.value(src);
        let (r, c) = v.dims2();
        let d = v.data();
        let (outer, inner, shape) = match axis {
            Axis::Rows => (c, r, vec![1, c]),
            Axis::Cols => (r, c, vec![r, 1]),
        };
        let mut winners = Vec::with_capacity(outer);
        let mut out = Vec::with_capacity(outer);
        for o in 0..outer {
            let idx = |i: usize| match axis {
                Axis::Rows => i * c + o,
                Axis::Cols => o * c + i,
            };
            let mut best = idx(0);
            for i in 1..inner {
                if d[idx(i)] > d[best] {
                    best = idx(i);
                }
            }
            winners.push(best);
            out.push(d[best]);
        }
        let ng = self.ng(src);
        self.push(Tensor::new(shape, out).expect("len"), Op::Max { src, winners }, ng)
    }

    /// Elementwise maximum over `blocks` vertically stacked blocks of equal
    /// height: `out[i] = max_k src[k * n + i]`. Ties go to the earliest block.
    pub fn block_max(&mut self, src: NodeId, blocks: usize) -> Result<NodeId> {
        let v = self.value(src);
        let (r, c) = v.dims2();
        if blocks == 0 || r % blocks != 0 {
            return Err(Error::shape(format!("{r} rows do not split into {blocks} blocks")));
        }
        let n = r / blocks;
        let d = v.data();
        let mut winners = Vec::with_capacity(n * c);
        let mut out = Vec::with_capacity(n * c);
        for i in 0..n * c {
            let mut best = i;
            for k in 1..blocks {
                if d[k * n * c + i] > d[best] {
                    best = k * n * c + i;
                }
            }
            winners.push(best);
            out.push(d[best]);
        }
        let ng = self.ng(src);
        Ok(self.push(Tensor::matrix(n, c, out)?, Op::Max { src, winners }, ng))
    }

    /// Sum of `blocks` vertically stacked blocks of equal height.
    pub fn block_sum(&mut self, src: NodeId, blocks: usize) -> Result<NodeId> {
        let v = self.value(src);
        let (r, c) = v.dims2();
        if blocks == 0 || r % blocks != 0 {
            return Err(Error::shape(format!("{r} rows do not split into {blocks} blocks")));
        }
        let n = r / blocks;
        let mut out = vec![0.0; n * c];
        for block in v.data().chunks(n * c) {
            for (o, x) in out.iter_mut().zip(block) {
                *o += x;
            }
        }
        let ng = self.ng(src);
        Ok(self.push(Tensor::matrix(n, c, out)?, Op::BlockSum { src, blocks }, ng))
    }

    /// Row `i` of the output is row `idx[i]` of `src`, or zeros for `None`.
    pub fn gather_rows(&mut self, src: NodeId, idx: &[Option<usize>]) -> Result<NodeId> {
        let v = self.value(src);
        let (r, c) = v.dims2();
        let mut data = Vec::with_capacity(idx.len() * c);
        for &i in idx {
            match i {
                Some(i) if i < r => data.extend_from_slice(v.row_slice(i)),
                Some(i) => return Err(Error::shape(format!("gather row {i} of {r}"))),
                None => data.extend(std::iter::repeat_n(0.0, c)),
            }
        }
        let ng = self.ng(src);
        let t = Tensor::matrix(idx.len(), c, data)?;
        Ok(self.push(t, Op::GatherRows { src, idx: idx.to_vec() }, ng))
    }

    /// Looks up rows of an embedding table. Row `frozen_row` (the padding row)
    /// reads as zeros and receives no gradient.
    pub fn embedding(&mut self, table: NodeId, ids: &[usize], frozen_row: Option<usize>) -> Result<NodeId> {
        let t = self.value(table);
        let (v, e) = t.dims2();
        let mut data = Vec::with_capacity(ids.len() * e);
        for &i in ids {
            if i >= v {
                return Err(Error::invalid(format!("embedding id {i} out of range {v}")));
            }
            if Some(i) == frozen_row {
                data.extend(std::iter::repeat_n(0.0, e));
            } else {
                data.extend_from_slice(t.row_slice(i));
            }
        }
        let ng = self.ng(table);
        let out = Tensor::matrix(ids.len(), e, data)?;
        Ok(self.push(out, Op::Embedding { table, ids: ids.to_vec(), frozen_row }, ng))
    }

    /// Gaussian reparameterization `mu + exp(logvar / 2) * eps`.
    pub fn reparam(&mut self, mu: NodeId, logvar: NodeId, eps: &[f64]) -> Result<NodeId> {
        self.binary_shape(mu, logvar, false)?;
        if eps.len() != self.value(mu).len() {
            return Err(Error::shape(format!("reparam noise length {} vs {}", eps.len(), self.value(mu).len())));
        }
        let data: Vec<f64> = self
            .value(mu)
            .data()
            .iter()
            .zip(self.value(logvar).data())
            .zip(eps)
            .map(|((m, lv), e)| m + (0.5 * lv).exp() * e)
            .collect();
        let t = Tensor::new(self.out_shape(mu), data)?;
        let ng = self.ng(mu) || self.ng(logvar);
        Ok(self.push(t, Op::Reparam { mu, logvar, eps: eps.to_vec() }, ng))
    }

    /// Reverse sweep from a scalar output. Parameters the output does not
    /// depend on get zero gradients.
    pub fn backward(&self, output: NodeId) -> Result<Grads> {
        let out = self.value(output);
        if out.len() != 1 || out.shape().iter().any(|&d| d != 1) {
            return Err(Error::shape(format!("gradient needs a scalar output, got shape {:?}", out.shape())));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[output.0] = Some(Tensor::filled(out.shape(), 1.0));
        let mut result = Grads::zeros_like(self.store);

        for i in (0..=output.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            self.propagate(&node.op, &node.value, g, &mut grads, &mut result);
        }
        Ok(result)
    }

    fn acc(&self, grads: &mut [Option<Tensor>], id: NodeId, g: Tensor) {
        if !self.ng(id) {
            return;
        }
        match &mut grads[id.0] {
            Some(existing) => existing.add_assign(&g),
            slot @ None => *slot = Some(g),
        }
    }

    fn acc_with(&self, grads: &mut [Option<Tensor>], id: NodeId, f: impl FnOnce(&mut Tensor)) {
        if !self.ng(id) {
            return;
        }
        let slot = &mut grads[id.0];
        if slot.is_none() {
            let (r, c) = self.value(id).dims2();
            *slot = Some(Tensor::zeros(&[r, c]));
        }
        f(slot.as_mut().expect("initialized"));
    }

    fn propagate(&self, op: &Op, value: &Tensor, g: Tensor, grads: &mut [Option<Tensor>], result: &mut Grads) {
        match op {
            Op::Constant => {}
            Op::Param(pid) => result.by_id_mut(*pid).add_assign(&g),
            Op::MatMul(a, b) => {
                let (m, k) = self.value(*a).dims2();
                let n = self.value(*b).cols();
                let (va, vb) = (self.value(*a).data(), self.value(*b).data());
                self.acc_with(grads, *a, |ga| matmul_bt_acc(g.data(), vb, ga.data_mut(), m, n, k));
                self.acc_with(grads, *b, |gb| matmul_at_acc(va, g.data(), gb.data_mut(), m, k, n));
            }
            Op::Add(a, b) => {
                let same = self.value(*a).len() == self.value(*b).len();
                if same {
                    self.acc(grads, *b, g.clone());
                } else {
                    let c = g.cols();
                    self.acc_with(grads, *b, |gb| {
                        for row in g.data().chunks(c) {
                            for (x, y) in gb.data_mut().iter_mut().zip(row) {
                                *x += y;
                            }
                        }
                    });
                }
                self.acc(grads, *a, g);
            }
            Op::Sub(a, b) => {
                let neg = map(&g, |x| -x);
                self.acc(grads, *b, neg);
                self.acc(grads, *a, g);
            }
            Op::Mul(a, b) => {
                let ga = zip_t(&g, self.value(*b), |x, y| x * y);
                let gb = zip_t(&g, self.value(*a), |x, y| x * y);
                self.acc(grads, *a, ga);
                self.acc(grads, *b, gb);
            }
            Op::MulCol(a, col) => {
                let c = g.cols().max(1);
                let s = self.value(*col).data();
                let ga: Vec<f64> =
                    g.data().chunks(c).zip(s).flat_map(|(row, k)| row.iter().map(move |x| x * k)).collect();
                let gc: Vec<f64> = g
                    .data()
                    .chunks(c)
                    .zip(self.value(*a).data().chunks(c))
                    .map(|(gr, ar)| gr.iter().zip(ar).map(|(x, y)| x * y).sum())
                    .collect();
                let (r, _) = g.dims2();
                self.acc(grads, *a, Tensor::matrix(r, g.cols(), ga).expect("len"));
                self.acc(grads, *col, Tensor::matrix(r, 1, gc).expect("len"));
            }
            Op::Scale(a, f) => self.acc(grads, *a, map(&g, |x| x * f)),
            Op::AddScalar(a) => self.acc(grads, *a, g),
            Op::Tanh(a) => self.acc(grads, *a, zip_t(&g, value, |gi, y| gi * (1.0 - y * y))),
            Op::Sigmoid(a) => self.acc(grads, *a, zip_t(&g, value, |gi, y| gi * y * (1.0 - y))),
            Op::Relu(a) => {
                let ga = zip_t(&g, self.value(*a), |gi, x| if x > 0.0 { gi } else { 0.0 });
                self.acc(grads, *a, ga)
            }
            Op::Exp(a) => self.acc(grads, *a, zip_t(&g, value, |gi, y| gi * y)),
            Op::Log(a) => self.acc(grads, *a, zip_t(&g, self.value(*a), |gi, x| gi / x)),
            Op::Clamp(a, lo, hi) => {
                let ga = zip_t(&g, self.value(*a), |gi, x| if x < *lo || x > *hi { 0.0 } else { gi });
                self.acc(grads, *a, ga)
            }
            Op::Softmax(a) => {
                let c = value.cols().max(1);
                let mut out = g.clone();
                for (orow, (grow, yrow)) in
                    out.data_mut().chunks_mut(c).zip(g.data().chunks(c).zip(value.data().chunks(c)))
                {
                    let dot: f64 = grow.iter().zip(yrow).map(|(x, y)| x * y).sum();
                    for ((o, gi), y) in orow.iter_mut().zip(grow).zip(yrow) {
                        *o = y * (gi - dot);
                    }
                }
                self.acc(grads, *a, out)
            }
            Op::LogSoftmax(a) => {
                let c = value.cols().max(1);
                let mut out = g.clone();
                for (orow, (grow, lrow)) in
                    out.data_mut().chunks_mut(c).zip(g.data().chunks(c).zip(value.data().chunks(c)))
                {
                    let total: f64 = grow.iter().sum();
                    for ((o, gi), l) in orow.iter_mut().zip(grow).zip(lrow) {
                        *o = gi - l.exp() * total;
                    }
                }
                self.acc(grads, *a, out)
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let n = self.value(p).len();
                    let (r, c) = self.value(p).dims2();
                    let part = Tensor::matrix(r, c, g.data()[offset..offset + n].to_vec()).expect("len");
                    offset += n;
                    self.acc(grads, p, part);
                }
            }
            Op::ConcatCols(parts) => {
                let total = g.cols();
                let mut col0 = 0;
                for &p in parts {
                    let (r, c) = self.value(p).dims2();
                    if self.ng(p) {
                        let mut data = Vec::with_capacity(r * c);
                        for i in 0..r {
                            data.extend_from_slice(&g.data()[i * total + col0..i * total + col0 + c]);
                        }
                        self.acc(grads, p, Tensor::matrix(r, c, data).expect("len"));
                    }
                    col0 += c;
                }
            }
            Op::Slice { src, row0, col0 } => {
                let (rows, cols) = g.dims2();
                let sc = self.value(*src).cols();
                self.acc_with(grads, *src, |gs| {
                    let d = gs.data_mut();
                    for i in 0..rows {
                        for j in 0..cols {
                            d[(row0 + i) * sc + col0 + j] += g.data()[i * cols + j];
                        }
                    }
                });
            }
            Op::Reshape(src) => {
                let (r, c) = self.value(*src).dims2();
                self.acc(grads, *src, g.reshape(vec![r, c]).expect("same length"));
            }
            Op::Transpose(src) => {
                let (r, c) = g.dims2();
                let mut data = vec![0.0; r * c];
                for i in 0..r {
                    for j in 0..c {
                        data[j * r + i] = g.data()[i * c + j];
                    }
                }
                self.acc(grads, *src, Tensor::matrix(c, r, data).expect("len"));
            }
            Op::SumAll(src) | Op::MeanAll(src) => {
                let n = self.value(*src).len() as f64;
                let gi = if matches!(op, Op::MeanAll(_)) { g.item() / n } else { g.item() };
                let (r, c) = self.value(*src).dims2();
                self.acc(grads, *src, Tensor::filled(&[r, c], gi));
            }
            Op::Sum(src, axis) | Op::Mean(src, axis) => {
                let (r, c) = self.value(*src).dims2();
                let div = if matches!(op, Op::Mean(..)) {
                    match axis {
                        Axis::Rows => r as f64,
                        Axis::Cols => c as f64,
                    }
                } else {
                    1.0
                };
                let mut data = vec![0.0; r * c];
                for i in 0..r {
                    for j in 0..c {
                        data[i * c + j] = match axis {
                            Axis::Rows => g.data()[j],
                            Axis::Cols => g.data()[i],
                        } / div;
                    }
                }
                self.acc(grads, *src, Tensor::matrix(r, c, data).expect("len"));
            }
            Op::Max { src, winners } => {
                self.acc_with(grads, *src, |gs| {
                    for (k, &w) in winners.iter().enumerate() {
                        gs.data_mut()[w] += g.data()[k];
                    }
                });
            }
            Op::Embedding { table, ids, frozen_row } => {
                let e = value.cols();
                self.acc_with(grads, *table, |gt| {
                    for (k, &id) in ids.iter().enumerate() {
                        if Some(id) == *frozen_row {
                            continue;
                        }
                        let src = &g.data()[k * e..(k + 1) * e];
                        for (x, y) in gt.row_slice_mut(id).iter_mut().zip(src) {
                            *x += y;
                        }
                    }
                });
            }
            Op::BlockSum { src, blocks } => {
                let (r, c) = g.dims2();
                let data: Vec<f64> = (0..*blocks).flat_map(|_| g.data().iter().copied()).collect();
                self.acc(grads, *src, Tensor::matrix(r * blocks, c, data).expect("len"));
            }
            Op::GatherRows { src, idx } => {
                let c = g.cols();
                self.acc_with(grads, *src, |gs| {
                    for (k, i) in idx.iter().enumerate() {
                        if let Some(i) = i {
                            for (x, y) in gs.row_slice_mut(*i).iter_mut().zip(&g.data()[k * c..(k + 1) * c]) {
                                *x += y;
                            }
                        }
                    }
                });
            }
            Op::Reparam { mu, logvar, eps } => {
                let lv = self.value(*logvar).data();
                let mut glv = g.clone();
                for ((o, gi), (l, e)) in glv.data_mut().iter_mut().zip(g.data()).zip(lv.iter().zip(eps)) {
                    *o = gi * e * 0.5 * (0.5 * l).exp();
                }
                self.acc(grads, *logvar, glv);
                self.acc(grads, *mu, g);
            }
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable softmax of one row.
pub fn softmax_in_place(row: &mut [f64]) {
    let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for x in row.iter_mut() {
        *x = (*x - m).exp();
        total += *x;
    }
    for x in row.iter_mut() {
        *x /= total;
    }
}

fn zip_map(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect()
}

fn zip_t(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let (r, c) = a.dims2();
    Tensor::matrix(r, c, zip_map(a, b, f)).expect("same length")
}

fn map(a: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    let (r, c) = a.dims2();
    Tensor::matrix(r, c, a.data().iter().map(|&x| f(x)).collect()).expect("same length")
}

fn reduce(v: &Tensor, axis: Axis) -> Tensor {
    let (r, c) = v.dims2();
    match axis {
        Axis::Rows => {
            let mut out = vec![0.0; c];
            for row in v.data().chunks(c) {
                for (o, x) in out.iter_mut().zip(row) {
                    *o += x;
                }
            }
            Tensor::matrix(1, c, out).expect("len")
        }
        Axis::Cols => {
            let out = v.data().chunks(c).map(|row| row.iter().sum()).collect();
            Tensor::matrix(r, 1, out).expect("len")
        }
    }
}
