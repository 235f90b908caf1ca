//! Define-by-run computation graph with reverse-mode differentiation.
//!
//! Every operation on a [`Var`] appends a node to its [`Graph`]; node ids are
//! therefore a topological order by construction. [`Graph::backward`] walks
//! the ids in reverse once, accumulating each node's gradient into its inputs.
//! A graph can be differentiated exactly once; build a fresh graph per
//! forward pass.

use std::cell::{Cell, RefCell};
use std::fmt;
use std::rc::Rc;

use crate::error::{Error, Result};

use super::value::{dims2, dims3};
use super::{Element, Tensor};

#[derive(Debug)]
enum Op<E> {
    Leaf,
    MatMul,
    Linear,
    Add,
    Sub,
    Mul,
    Affine { scale: E },
    Sigmoid,
    Tanh,
    Relu,
    Exp,
    Log,
    Sum,
    Mean,
    Softmax,
    CrossEntropy { labels: Vec<usize>, probs: Vec<E> },
    Concat { widths: Vec<usize> },
    TimeStep { t: usize },
    AddBias,
    Conv1d { stride: usize, pad_left: usize },
    MaxPool1d { argmax: Vec<usize> },
}

impl<E> Op<E> {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::MatMul => "matmul",
            Op::Linear => "linear",
            Op::Add => "add",
            Op::Sub => "sub",
            Op::Mul => "mul",
            Op::Affine { .. } => "affine",
            Op::Sigmoid => "sigmoid",
            Op::Tanh => "tanh",
            Op::Relu => "relu",
            Op::Exp => "exp",
            Op::Log => "log",
            Op::Sum => "sum",
            Op::Mean => "mean",
            Op::Softmax => "softmax",
            Op::CrossEntropy { .. } => "cross_entropy",
            Op::Concat { .. } => "concat",
            Op::TimeStep { .. } => "time_step",
            Op::AddBias => "add_bias",
            Op::Conv1d { .. } => "conv1d",
            Op::MaxPool1d { .. } => "max_pool1d",
        }
    }
}

struct Node<E> {
    value: Rc<Tensor<E>>,
    op: Op<E>,
    inputs: Vec<usize>,
    requires_grad: bool,
}

/// Padding mode for [`Var::conv1d`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Padding {
    /// No padding; the kernel must fit inside the input.
    Valid,
    /// Zero padding so that the output length is `ceil(T / stride)`.
    Same,
}

impl Padding {
    /// Returns `(pad_left, pad_total)` for an input of length `len`.
    pub fn amounts(self, len: usize, kernel: usize, stride: usize) -> (usize, usize) {
        match self {
            Padding::Valid => (0, 0),
            Padding::Same => {
                let out = len.div_ceil(stride);
                let total = ((out - 1) * stride + kernel).saturating_sub(len);
                (total / 2, total)
            }
        }
    }

    /// Output length, or `None` when the kernel does not fit.
    pub fn output_len(self, len: usize, kernel: usize, stride: usize) -> Option<usize> {
        let (_, total) = self.amounts(len, kernel, stride);
        let padded = len + total;
        (padded >= kernel).then(|| (padded - kernel) / stride + 1)
    }
}

/// A recording of tensor operations.
pub struct Graph<E: Element = f64> {
    nodes: RefCell<Vec<Node<E>>>,
    spent: Cell<bool>,
}

impl<E: Element> Default for Graph<E> {
    fn default() -> Self {
        Self::empty()
    }
}

impl Graph<f64> {
    /// An empty 64-bit graph.
    pub fn new() -> Self {
        Self::empty()
    }
}

impl<E: Element> fmt::Debug for Graph<E> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Graph")
            .field("nodes", &self.len())
            .field("spent", &self.spent.get())
            .finish()
    }
}

/// Handle to a node in a [`Graph`].
#[derive(Clone, Copy)]
pub struct Var<'g, E: Element = f64> {
    graph: &'g Graph<E>,
    id: usize,
}

impl<E: Element> fmt::Debug for Var<'_, E> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Var#{}{:?}", self.id, self.shape())
    }
}

/// Leaf gradients produced by [`Graph::backward`].
#[derive(Debug)]
pub struct Gradients<E = f64> {
    grads: Vec<Option<Tensor<E>>>,
    accumulations: Vec<usize>,
}

impl<E: Element> Gradients<E> {
    /// Gradient of a leaf created with [`Graph::param`].
    pub fn get(&self, var: Var<'_, E>) -> Option<&Tensor<E>> {
        self.grads.get(var.id).and_then(Option::as_ref)
    }

    pub fn take(&mut self, var: Var<'_, E>) -> Option<Tensor<E>> {
        self.grads.get_mut(var.id).and_then(Option::take)
    }

    /// Number of gradient contributions the node received during backward.
    pub fn accumulation_count(&self, var: Var<'_, E>) -> usize {
        self.accumulations.get(var.id).copied().unwrap_or(0)
    }
}

impl<E: Element> Graph<E> {
    /// An empty graph over any element type.
    pub fn empty() -> Self {
        Self {
            nodes: RefCell::new(Vec::new()),
            spent: Cell::new(false),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Total elements held by all recorded nodes.
    pub fn stored_elements(&self) -> usize {
        self.nodes.borrow().iter().map(|n| n.value.numel()).sum()
    }

    /// Elements held by non-leaf nodes, i.e. the activation workspace.
    pub fn activation_elements(&self) -> usize {
        self.nodes
            .borrow()
            .iter()
            .filter(|n| !matches!(n.op, Op::Leaf))
            .map(|n| n.value.numel())
            .sum()
    }

    /// A leaf whose gradient is wanted.
    pub fn param(&self, value: Tensor<E>) -> Var<'_, E> {
        self.leaf(value, true)
    }

    /// A leaf treated as a constant.
    pub fn constant(&self, value: Tensor<E>) -> Var<'_, E> {
        self.leaf(value, false)
    }

    fn leaf(&self, value: Tensor<E>, requires_grad: bool) -> Var<'_, E> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value: Rc::new(value),
            op: Op::Leaf,
            inputs: Vec::new(),
            requires_grad,
        });
        Var {
            graph: self,
            id: nodes.len() - 1,
        }
    }

    fn value(&self, id: usize) -> Rc<Tensor<E>> {
        Rc::clone(&self.nodes.borrow()[id].value)
    }

    fn push(&self, op: Op<E>, inputs: Vec<usize>, value: Tensor<E>) -> Result<Var<'_, E>> {
        if self.spent.get() {
            return Err(Error::Contract(
                "graph was already differentiated; record a new graph".into(),
            ));
        }
        if !value.is_finite() {
            return Err(Error::Numerical(format!(
                "{} produced non-finite values",
                op.name()
            )));
        }
        let mut nodes = self.nodes.borrow_mut();
        let requires_grad = inputs.iter().any(|&i| nodes[i].requires_grad);
        nodes.push(Node {
            value: Rc::new(value),
            op,
            inputs,
            requires_grad,
        });
        Ok(Var {
            graph: self,
            id: nodes.len() - 1,
        })
    }

    /// Number of recorded nodes that consume `var` (with multiplicity).
    pub fn fan_out(&self, var: Var<'_, E>) -> usize {
        self.nodes
            .borrow()
            .iter()
            .flat_map(|n| n.inputs.iter())
            .filter(|&&i| i == var.id)
            .count()
    }

    /// Reverse-mode sweep from a scalar `root`.
    ///
    /// Fails when the root is not scalar or the graph was already
    /// differentiated.
    pub fn backward(&self, root: Var<'_, E>) -> Result<Gradients<E>> {
        if !std::ptr::eq(root.graph, self) {
            return Err(Error::Contract("root belongs to another graph".into()));
        }
        if self.spent.get() {
            return Err(Error::Contract(
                "backward called twice on the same graph".into(),
            ));
        }
        let nodes = self.nodes.borrow();
        let root_value = &nodes[root.id].value;
        if !root_value.is_scalar() {
            return Err(Error::Contract(format!(
                "backward root must be scalar, got shape {:?}",
                root_value.shape()
            )));
        }
        self.spent.set(true);

        let n = root.id + 1;
        let mut grads: Vec<Option<Vec<E>>> = (0..n).map(|_| None).collect();
        let mut accumulations = vec![0usize; n];
        grads[root.id] = Some(vec![E::one()]);
        let mut leaf_grads: Vec<Option<Tensor<E>>> = (0..n).map(|_| None).collect();

        for id in (0..n).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &nodes[id];
            if let Op::Leaf = node.op {
                leaf_grads[id] = Some(Tensor::from_parts(node.value.shape().to_vec(), g));
                continue;
            }
            let wants: Vec<bool> = node
                .inputs
                .iter()
                .map(|&i| nodes[i].requires_grad)
                .collect();
            let ins: Vec<&Tensor<E>> = node.inputs.iter().map(|&i| &*nodes[i].value).collect();
            let local = local_grads(&node.op, &ins, &node.value, &g, &wants);
            for ((&input, want), lg) in node.inputs.iter().zip(&wants).zip(local) {
                if !*want {
                    continue;
                }
                let Some(lg) = lg else { continue };
                accumulations[input] += 1;
                match &mut grads[input] {
                    Some(acc) => acc.iter_mut().zip(&lg).for_each(|(a, b)| *a = *a + *b),
                    slot @ None => *slot = Some(lg),
                }
            }
        }
        Ok(Gradients {
            grads: leaf_grads,
            accumulations,
        })
    }
}

fn broadcast_ok(a: &Tensor<impl Element>, b: &Tensor<impl Element>) -> bool {
    a.shape() == b.shape() || a.is_scalar() || b.is_scalar()
}

fn binary<E: Element>(a: &Tensor<E>, b: &Tensor<E>, f: impl Fn(E, E) -> E) -> Tensor<E> {
    if a.shape() == b.shape() {
        let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
        Tensor::from_parts(a.shape().to_vec(), data)
    } else if b.is_scalar() {
        let y = b.data()[0];
        a.map(|x| f(x, y))
    } else {
        let x = a.data()[0];
        b.map(|y| f(x, y))
    }
}

/// Reduce a full-shape gradient onto an operand that may have been broadcast.
fn reduce_to<E: Element>(operand: &Tensor<E>, g: Vec<E>) -> Vec<E> {
    if operand.numel() == g.len() {
        g
    } else {
        vec![g.into_iter().sum()]
    }
}

fn local_grads<E: Element>(
    op: &Op<E>,
    ins: &[&Tensor<E>],
    out: &Tensor<E>,
    g: &[E],
    wants: &[bool],
) -> Vec<Option<Vec<E>>> {
    let one = E::one();
    let zero = E::zero();
    let unary = |f: &dyn Fn(usize) -> E| vec![Some((0..g.len()).map(f).collect())];
    match op {
        Op::Leaf => vec![],
        Op::MatMul => {
            let (a, b) = (ins[0], ins[1]);
            let (m, k) = (a.shape()[0], a.shape()[1]);
            let n = b.shape()[1];
            let da = wants[0].then(|| {
                let mut da = vec![zero; m * k];
                E::gemm(m, n, k, g, (n, 1), b.data(), (1, n), &mut da, false);
                da
            });
            let db = wants[1].then(|| {
                let mut db = vec![zero; k * n];
                E::gemm(k, m, n, a.data(), (1, k), g, (n, 1), &mut db, false);
                db
            });
            vec![da, db]
        }
        Op::Linear => {
            let (x, w) = (ins[0], ins[1]);
            let (rows, inp) = (x.shape()[0], x.shape()[1]);
            let outw = w.shape()[0];
            let dx = wants[0].then(|| {
                let mut dx = vec![zero; rows * inp];
                E::gemm(rows, outw, inp, g, (outw, 1), w.data(), (inp, 1), &mut dx, false);
                dx
            });
            let dw = wants[1].then(|| {
                let mut dw = vec![zero; outw * inp];
                E::gemm(outw, rows, inp, g, (1, outw), x.data(), (inp, 1), &mut dw, false);
                dw
            });
            let mut res = vec![dx, dw];
            if ins.len() == 3 {
                let db = wants[2].then(|| {
                    let mut db = vec![zero; outw];
                    for row in g.chunks_exact(outw) {
                        db.iter_mut().zip(row).for_each(|(d, &v)| *d = *d + v);
                    }
                    db
                });
                res.push(db);
            }
            res
        }
        Op::Add | Op::Sub => {
            let sign = if matches!(op, Op::Sub) { -one } else { one };
            let da = wants[0].then(|| reduce_to(ins[0], g.to_vec()));
            let db = wants[1].then(|| reduce_to(ins[1], g.iter().map(|&v| v * sign).collect()));
            vec![da, db]
        }
        Op::Mul => {
            let (a, b) = (ins[0], ins[1]);
            let at = |t: &Tensor<E>, i: usize| {
                if t.is_scalar() {
                    t.data()[0]
                } else {
                    t.data()[i]
                }
            };
            let da = wants[0].then(|| reduce_to(a, (0..g.len()).map(|i| g[i] * at(b, i)).collect()));
            let db = wants[1].then(|| reduce_to(b, (0..g.len()).map(|i| g[i] * at(a, i)).collect()));
            vec![da, db]
        }
        Op::Affine { scale } => unary(&|i| g[i] * *scale),
        Op::Sigmoid => unary(&|i| {
            let s = out.data()[i];
            g[i] * s * (one - s)
        }),
        Op::Tanh => unary(&|i| {
            let y = out.data()[i];
            g[i] * (one - y * y)
        }),
        Op::Relu => unary(&|i| if ins[0].data()[i] > zero { g[i] } else { zero }),
        Op::Exp => unary(&|i| g[i] * out.data()[i]),
        Op::Log => unary(&|i| g[i] / ins[0].data()[i]),
        Op::Sum => vec![Some(vec![g[0]; ins[0].numel()])],
        Op::Mean => {
            let n = ins[0].numel();
            vec![Some(vec![g[0] / E::from_usize(n).unwrap(); n])]
        }
        Op::Softmax => {
            let k = *out.shape().last().unwrap();
            let mut dx = vec![zero; g.len()];
            for ((dxr, gr), yr) in dx
                .chunks_exact_mut(k)
                .zip(g.chunks_exact(k))
                .zip(out.data().chunks_exact(k))
            {
                let dot: E = gr.iter().zip(yr).map(|(&a, &b)| a * b).sum();
                for j in 0..k {
                    dxr[j] = yr[j] * (gr[j] - dot);
                }
            }
            vec![Some(dx)]
        }
        Op::CrossEntropy { labels, probs } => {
            let b = labels.len();
            let k = probs.len() / b;
            let scale = g[0] / E::from_usize(b).unwrap();
            let mut dx: Vec<E> = probs.iter().map(|&p| p * scale).collect();
            for (row, &label) in labels.iter().enumerate() {
                dx[row * k + label] = dx[row * k + label] - scale;
            }
            vec![Some(dx)]
        }
        Op::Concat { widths } => {
            let total: usize = widths.iter().sum();
            let rows = g.len() / total;
            let mut offset = 0;
            widths
                .iter()
                .zip(wants)
                .map(|(&w, &want)| {
                    let start = offset;
                    offset += w;
                    want.then(|| {
                        (0..rows)
                            .flat_map(|r| g[r * total + start..r * total + start + w].iter().copied())
                            .collect()
                    })
                })
                .collect()
        }
        Op::TimeStep { t } => {
            let (b, c, time) = (ins[0].shape()[0], ins[0].shape()[1], ins[0].shape()[2]);
            let mut dx = vec![zero; b * c * time];
            for bi in 0..b {
                for ci in 0..c {
                    dx[(bi * c + ci) * time + t] = g[bi * c + ci];
                }
            }
            vec![Some(dx)]
        }
        Op::AddBias => {
            let shape = ins[0].shape();
            let channels = shape[1];
            let inner: usize = shape[2..].iter().product();
            let db = wants[1].then(|| {
                let mut db = vec![zero; channels];
                for (i, &v) in g.iter().enumerate() {
                    let c = (i / inner) % channels;
                    db[c] = db[c] + v;
                }
                db
            });
            vec![wants[0].then(|| g.to_vec()), db]
        }
        Op::Conv1d { stride, pad_left } => {
            let (x, w) = (ins[0], ins[1]);
            let (cout, cin, k) = (w.shape()[0], w.shape()[1], w.shape()[2]);
            let time = *x.shape().last().unwrap();
            let batch = x.numel() / (cin * time);
            let tout = *out.shape().last().unwrap();
            let mut dx = vec![zero; x.numel()];
            let mut dw = vec![zero; w.numel()];
            let (xd, wd) = (x.data(), w.data());
            for bi in 0..batch {
                for o in 0..cout {
                    for to in 0..tout {
                        let gv = g[(bi * cout + o) * tout + to];
                        if gv == zero {
                            continue;
                        }
                        for c in 0..cin {
                            let xrow = (bi * cin + c) * time;
                            let wrow = (o * cin + c) * k;
                            for kk in 0..k {
                                let pos = (to * stride + kk) as isize - *pad_left as isize;
                                if pos < 0 || pos as usize >= time {
                                    continue;
                                }
                                let xi = xrow + pos as usize;
                                dx[xi] = dx[xi] + gv * wd[wrow + kk];
                                dw[wrow + kk] = dw[wrow + kk] + gv * xd[xi];
                            }
                        }
                    }
                }
            }
            vec![wants[0].then_some(dx), wants[1].then_some(dw)]
        }
        Op::MaxPool1d { argmax } => {
            let mut dx = vec![zero; ins[0].numel()];
            for (&src, &gv) in argmax.iter().zip(g) {
                dx[src] = dx[src] + gv;
            }
            vec![Some(dx)]
        }
    }
}

impl<'g, E: Element> Var<'g, E> {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn graph(&self) -> &'g Graph<E> {
        self.graph
    }

    pub fn value(&self) -> Rc<Tensor<E>> {
        self.graph.value(self.id)
    }

    pub fn shape(&self) -> Vec<usize> {
        self.graph.nodes.borrow()[self.id].value.shape().to_vec()
    }

    fn same_graph(&self, other: &Var<'g, E>) -> Result<()> {
        if std::ptr::eq(self.graph, other.graph) {
            Ok(())
        } else {
            Err(Error::Contract("operands belong to different graphs".into()))
        }
    }

    fn elementwise(self, other: Var<'g, E>, op: Op<E>, f: impl Fn(E, E) -> E) -> Result<Self> {
        self.same_graph(&other)?;
        let (a, b) = (self.value(), other.value());
        if !broadcast_ok(&a, &b) {
            return Err(Error::shape(op.name(), a.shape(), b.shape()));
        }
        let out = binary(&a, &b, f);
        self.graph.push(op, vec![self.id, other.id], out)
    }

    pub fn add(self, other: Var<'g, E>) -> Result<Self> {
        self.elementwise(other, Op::Add, |x, y| x + y)
    }

    pub fn sub(self, other: Var<'g, E>) -> Result<Self> {
        self.elementwise(other, Op::Sub, |x, y| x - y)
    }

    pub fn mul(self, other: Var<'g, E>) -> Result<Self> {
        self.elementwise(other, Op::Mul, |x, y| x * y)
    }

    /// `scale·x + shift`, elementwise.
    pub fn affine(self, scale: E, shift: E) -> Result<Self> {
        let out = self.value().map(|x| scale * x + shift);
        self.graph.push(Op::Affine { scale }, vec![self.id], out)
    }

    /// `1 − x`, elementwise.
    pub fn one_minus(self) -> Result<Self> {
        self.affine(-E::one(), E::one())
    }

    pub fn sigmoid(self) -> Result<Self> {
        let out = self.value().map(|x| {
            // split by sign so exp never overflows
            if x >= E::zero() {
                E::one() / (E::one() + (-x).exp())
            } else {
                let e = x.exp();
                e / (E::one() + e)
            }
        });
        self.graph.push(Op::Sigmoid, vec![self.id], out)
    }

    pub fn tanh(self) -> Result<Self> {
        let out = self.value().map(E::tanh);
        self.graph.push(Op::Tanh, vec![self.id], out)
    }

    pub fn relu(self) -> Result<Self> {
        let out = self.value().map(|x| x.max(E::zero()));
        self.graph.push(Op::Relu, vec![self.id], out)
    }

    pub fn exp(self) -> Result<Self> {
        let out = self.value().map(E::exp);
        self.graph.push(Op::Exp, vec![self.id], out)
    }

    /// Natural log; every entry must be strictly positive.
    pub fn log(self) -> Result<Self> {
        let v = self.value();
        if let Some(bad) = v.data().iter().find(|&&x| x <= E::zero()) {
            return Err(Error::Domain {
                op: "log",
                detail: format!("non-positive input {bad}"),
            });
        }
        let out = v.map(E::ln);
        self.graph.push(Op::Log, vec![self.id], out)
    }

    pub fn sum(self) -> Result<Self> {
        let s = self.value().sum();
        self.graph.push(Op::Sum, vec![self.id], Tensor::scalar(s))
    }

    pub fn mean(self) -> Result<Self> {
        let v = self.value();
        let m = v.sum() / E::from_usize(v.numel()).unwrap();
        self.graph.push(Op::Mean, vec![self.id], Tensor::scalar(m))
    }

    /// Matrix product of two 2-D operands.
    pub fn matmul(self, other: Var<'g, E>) -> Result<Self> {
        self.same_graph(&other)?;
        let (a, b) = (self.value(), other.value());
        let out = a.matmul(&b)?;
        self.graph.push(Op::MatMul, vec![self.id, other.id], out)
    }

    /// `x·Wᵀ (+ b)` for `x: [rows × in]`, `W: [out × in]`, `b: [out]`.
    pub fn linear(self, weight: Var<'g, E>, bias: Option<Var<'g, E>>) -> Result<Self> {
        self.same_graph(&weight)?;
        let (x, w) = (self.value(), weight.value());
        let (rows, inp) = dims2("linear", x.shape())?;
        let (outw, win) = dims2("linear", w.shape())?;
        if inp != win {
            return Err(Error::shape("linear", x.shape(), w.shape()));
        }
        let mut y = vec![E::zero(); rows * outw];
        let mut inputs = vec![self.id, weight.id];
        if let Some(b) = bias {
            self.same_graph(&b)?;
            let bv = b.value();
            if bv.numel() != outw {
                return Err(Error::shape("linear bias", w.shape(), bv.shape()));
            }
            for row in y.chunks_exact_mut(outw) {
                row.copy_from_slice(bv.data());
            }
            inputs.push(b.id);
        }
        E::gemm(rows, inp, outw, x.data(), (inp, 1), w.data(), (1, inp), &mut y, bias.is_some());
        self.graph
            .push(Op::Linear, inputs, Tensor::from_parts(vec![rows, outw], y))
    }

    /// Softmax over the last axis, computed with max subtraction.
    pub fn softmax(self) -> Result<Self> {
        let v = self.value();
        let out = softmax_rows(&v);
        self.graph.push(Op::Softmax, vec![self.id], out)
    }

    /// Mean cross-entropy of `softmax(self)` against integer labels.
    ///
    /// `self` holds logits `[B × K]`; the softmax is fused so the gradient is
    /// `(p − onehot) / B`.
    pub fn cross_entropy_with_logits(self, labels: &[usize]) -> Result<Self> {
        let v = self.value();
        let (b, k) = dims2("cross_entropy", v.shape())?;
        if labels.len() != b {
            return Err(Error::Contract(format!(
                "cross_entropy: {} labels for batch of {b}",
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::Contract(format!(
                "cross_entropy: label {bad} out of range for {k} classes"
            )));
        }
        let probs = softmax_rows(&v);
        let mut loss = E::zero();
        for (row, &label) in labels.iter().enumerate() {
            let logits = v.row(row);
            let max = logits.iter().copied().fold(E::neg_infinity(), E::max);
            let lse = logits.iter().map(|&z| (z - max).exp()).sum::<E>().ln() + max;
            loss = loss + (lse - logits[label]);
        }
        loss = loss / E::from_usize(b).unwrap();
        self.graph.push(
            Op::CrossEntropy {
                labels: labels.to_vec(),
                probs: probs.into_data(),
            },
            vec![self.id],
            Tensor::scalar(loss),
        )
    }

    /// Concatenate 2-D operands `[rows × w_i]` along the last axis.
    pub fn concat(parts: &[Var<'g, E>]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Contract("concat of zero operands".into()))?;
        let values: Vec<_> = parts.iter().map(|p| p.value()).collect();
        let rows = dims2("concat", values[0].shape())?.0;
        let mut widths = Vec::with_capacity(parts.len());
        for (p, v) in parts.iter().zip(&values) {
            first.same_graph(p)?;
            let (r, w) = dims2("concat", v.shape())?;
            if r != rows {
                return Err(Error::shape("concat", values[0].shape(), v.shape()));
            }
            widths.push(w);
        }
        let total: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for v in &values {
                data.extend_from_slice(v.row(r));
            }
        }
        first.graph.push(
            Op::Concat { widths },
            parts.iter().map(|p| p.id).collect(),
            Tensor::from_parts(vec![rows, total], data),
        )
    }

    /// Slice `[B × C × T] → [B × C]` at time index `t`.
    pub fn time_step(self, t: usize) -> Result<Self> {
        let v = self.value();
        let (b, c, time) = dims3("time_step", v.shape())?;
        if t >= time {
            return Err(Error::Contract(format!(
                "time_step {t} out of range for length {time}"
            )));
        }
        let data = (0..b * c).map(|i| v.data()[i * time + t]).collect();
        self.graph.push(
            Op::TimeStep { t },
            vec![self.id],
            Tensor::from_parts(vec![b, c], data),
        )
    }

    /// Add a per-channel bias `[C]` along axis 1 of `[N × C × ...]`.
    pub fn add_bias(self, bias: Var<'g, E>) -> Result<Self> {
        self.same_graph(&bias)?;
        let (x, b) = (self.value(), bias.value());
        if x.shape().len() < 2 || x.shape()[1] != b.numel() {
            return Err(Error::shape("add_bias", x.shape(), b.shape()));
        }
        let channels = b.numel();
        let inner: usize = x.shape()[2..].iter().product();
        let data = x
            .data()
            .iter()
            .enumerate()
            .map(|(i, &v)| v + b.data()[(i / inner) % channels])
            .collect();
        self.graph.push(
            Op::AddBias,
            vec![self.id, bias.id],
            Tensor::from_parts(x.shape().to_vec(), data),
        )
    }

    /// 1-D cross-correlation.
    ///
    /// `self` is `[C_in × T]` or `[B × C_in × T]`, `kernels` is
    /// `[C_out × C_in × K]`; the output keeps the input's rank.
    pub fn conv1d(self, kernels: Var<'g, E>, stride: usize, padding: Padding) -> Result<Self> {
        self.same_graph(&kernels)?;
        let (x, w) = (self.value(), kernels.value());
        let (batch, cin, time) = match *x.shape() {
            [c, t] => (1, c, t),
            [b, c, t] => (b, c, t),
            _ => return Err(Error::shape("conv1d", x.shape(), w.shape())),
        };
        let (cout, wcin, k) = dims3("conv1d", w.shape())?;
        if wcin != cin {
            return Err(Error::shape("conv1d", x.shape(), w.shape()));
        }
        if stride == 0 {
            return Err(Error::Contract("conv1d stride must be positive".into()));
        }
        let tout = padding.output_len(time, k, stride).ok_or_else(|| {
            Error::Contract(format!(
                "conv1d: input length {time} shorter than kernel {k} with valid padding"
            ))
        })?;
        let (pad_left, _) = padding.amounts(time, k, stride);
        let (xd, wd) = (x.data(), w.data());
        let mut y = vec![E::zero(); batch * cout * tout];
        for bi in 0..batch {
            for o in 0..cout {
                let yrow = &mut y[(bi * cout + o) * tout..(bi * cout + o + 1) * tout];
                for c in 0..cin {
                    let xrow = &xd[(bi * cin + c) * time..(bi * cin + c + 1) * time];
                    let wrow = &wd[(o * cin + c) * k..(o * cin + c + 1) * k];
                    for (to, yv) in yrow.iter_mut().enumerate() {
                        let mut acc = E::zero();
                        for (kk, &wv) in wrow.iter().enumerate() {
                            let pos = (to * stride + kk) as isize - pad_left as isize;
                            if pos >= 0 && (pos as usize) < time {
                                acc = acc + wv * xrow[pos as usize];
                            }
                        }
                        *yv = *yv + acc;
                    }
                }
            }
        }
        let shape = if x.shape().len() == 2 {
            vec![cout, tout]
        } else {
            vec![batch, cout, tout]
        };
        self.graph.push(
            Op::Conv1d { stride, pad_left },
            vec![self.id, kernels.id],
            Tensor::from_parts(shape, y),
        )
    }

    /// Non-overlapping max pooling over the last axis of `[B × C × T]`;
    /// a trailing remainder shorter than `size` is dropped.
    pub fn max_pool1d(self, size: usize) -> Result<Self> {
        let x = self.value();
        let (b, c, time) = dims3("max_pool1d", x.shape())?;
        if size == 0 || time < size {
            return Err(Error::Contract(format!(
                "max_pool1d: window {size} does not fit length {time}"
            )));
        }
        let tout = time / size;
        let mut data = Vec::with_capacity(b * c * tout);
        let mut argmax = Vec::with_capacity(b * c * tout);
        for row in 0..b * c {
            for to in 0..tout {
                let start = row * time + to * size;
                let (mut best, mut arg) = (x.data()[start], start);
                for i in start + 1..start + size {
                    if x.data()[i] > best {
                        best = x.data()[i];
                        arg = i;
                    }
                }
                data.push(best);
                argmax.push(arg);
            }
        }
        self.graph.push(
            Op::MaxPool1d { argmax },
            vec![self.id],
            Tensor::from_parts(vec![b, c, tout], data),
        )
    }
}

/// Row-wise softmax over the last axis (plain values, no recording).
pub fn softmax_rows<E: Element>(v: &Tensor<E>) -> Tensor<E> {
    let k = *v.shape().last().unwrap();
    let mut out = Vec::with_capacity(v.numel());
    for row in v.data().chunks_exact(k) {
        let max = row.iter().copied().fold(E::neg_infinity(), E::max);
        let start = out.len();
        out.extend(row.iter().map(|&z| (z - max).exp()));
        let total: E = out[start..].iter().copied().sum();
        out[start..].iter_mut().for_each(|p| *p = *p / total);
    }
    Tensor::from_parts(v.shape().to_vec(), out)
}
