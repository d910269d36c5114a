//! Define-by-run computation graph.
//!
//! Nodes live in an arena and may only reference earlier nodes, so the
//! arena order is a topological order and [`Graph::backward`] is a single
//! reverse sweep that visits every node once. Gradients are accumulated with
//! `+=`, so a value used twice receives the sum of both paths.

use rand::Rng;

use super::{shape_err, NnError, Result};
use crate::scalar::Scalar;

/// Handle to a node of a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Clone)]
enum Op<T> {
    Leaf,
    Conv1d { input: Var, kernel: Var, bias: Var },
    AvgPool1d { input: Var },
    Relu { input: Var },
    Sigmoid { input: Var },
    Tanh { input: Var },
    Linear { input: Var, weight: Var, bias: Var },
    Dropout { input: Var, mask: Vec<T> },
    Add { a: Var, b: Var },
    Mul { a: Var, b: Var },
    Concat { parts: Vec<Var> },
    Reshape { input: Var },
    Sum { input: Var },
    SoftmaxCrossEntropy { logits: Var, target: usize, probs: Vec<T> },
}

impl<T> Op<T> {
    fn parents(&self) -> Vec<Var> {
        match self {
            Op::Leaf => vec![],
            Op::Conv1d { input, kernel, bias } => vec![*input, *kernel, *bias],
            Op::Linear { input, weight, bias } => vec![*input, *weight, *bias],
            Op::AvgPool1d { input }
            | Op::Relu { input }
            | Op::Sigmoid { input }
            | Op::Tanh { input }
            | Op::Dropout { input, .. }
            | Op::Reshape { input }
            | Op::Sum { input } => vec![*input],
            Op::Add { a, b } | Op::Mul { a, b } => vec![*a, *b],
            Op::Concat { parts } => parts.clone(),
            Op::SoftmaxCrossEntropy { logits, .. } => vec![*logits],
        }
    }
}

#[derive(Debug, Clone)]
struct Node<T> {
    shape: Vec<usize>,
    value: Vec<T>,
    grad: Option<Vec<T>>,
    op: Op<T>,
    requires_grad: bool,
}

#[derive(Debug, Clone, Default)]
pub struct Graph<T> {
    nodes: Vec<Node<T>>,
}

/// Numerically stable softmax.
pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total = exps.iter().copied().sum::<T>();
    exps.into_iter().map(|e| e / total).collect()
}

fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

impl<T: Scalar> Graph<T> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, shape: Vec<usize>, value: Vec<T>, op: Op<T>) -> Var {
        debug_assert_eq!(numel(&shape), value.len());
        let requires_grad = op.parents().iter().any(|p| self.nodes[p.0].requires_grad);
        self.nodes.push(Node { shape, value, grad: None, op, requires_grad });
        Var(self.nodes.len() - 1)
    }

    /// Adds an input or parameter node.
    pub fn leaf(&mut self, value: Vec<T>, shape: &[usize], requires_grad: bool) -> Result<Var> {
        if numel(shape) != value.len() {
            return shape_err("leaf", format!("{} values for shape {shape:?}", value.len()));
        }
        self.nodes.push(Node {
            shape: shape.to_vec(),
            value,
            grad: None,
            op: Op::Leaf,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&mut self, value: Vec<T>, shape: &[usize]) -> Result<Var> {
        self.leaf(value, shape, false)
    }

    pub fn value(&self, v: Var) -> &[T] {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    /// Accumulated gradient, `None` when nothing flowed into `v`.
    pub fn grad(&self, v: Var) -> Option<&[T]> {
        self.nodes[v.0].grad.as_deref()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Valid (no padding) stride-1 cross-correlation:
    /// `out[k][i] = bias[k] + sum_c sum_n kernel[k][c][n] * input[c][i + n]`.
    pub fn conv1d(&mut self, input: Var, kernel: Var, bias: Var) -> Result<Var> {
        let (is, ks, bs) = (self.shape(input), self.shape(kernel), self.shape(bias));
        if is.len() != 2 || ks.len() != 3 || bs.len() != 1 {
            return shape_err("conv1d", format!("input {is:?}, kernel {ks:?}, bias {bs:?}"));
        }
        let (c_in, len) = (is[0], is[1]);
        let (c_out, kc, k) = (ks[0], ks[1], ks[2]);
        if kc != c_in || bs[0] != c_out || k == 0 {
            return shape_err("conv1d", format!("input {is:?}, kernel {ks:?}, bias {bs:?}"));
        }
        if len < k {
            return shape_err("conv1d", format!("input length {len} shorter than kernel {k}"));
        }
        let out_len = len - k + 1;
        let x = self.value(input);
        let w = self.value(kernel);
        let b = self.value(bias);
        let mut out = vec![T::zero(); c_out * out_len];
        for o in 0..c_out {
            let row = &mut out[o * out_len..(o + 1) * out_len];
            row.iter_mut().for_each(|v| *v = b[o]);
            for c in 0..c_in {
                let xc = &x[c * len..(c + 1) * len];
                for n in 0..k {
                    let wv = w[(o * c_in + c) * k + n];
                    for (r, &xv) in row.iter_mut().zip(&xc[n..n + out_len]) {
                        *r = *r + wv * xv;
                    }
                }
            }
        }
        Ok(self.push(vec![c_out, out_len], out, Op::Conv1d { input, kernel, bias }))
    }

    /// Average pooling over windows of 3 with stride 2 along the last axis.
    pub fn avgpool1d(&mut self, input: Var) -> Result<Var> {
        let s = self.shape(input);
        if s.len() != 2 || s[1] < 3 {
            return shape_err("avgpool1d", format!("need [C, L>=3], got {s:?}"));
        }
        let (c, len) = (s[0], s[1]);
        let out_len = (len - 3) / 2 + 1;
        let x = self.value(input);
        let third = T::lit(1.0 / 3.0);
        let mut out = Vec::with_capacity(c * out_len);
        for ch in 0..c {
            let xc = &x[ch * len..(ch + 1) * len];
            for i in 0..out_len {
                out.push((xc[2 * i] + xc[2 * i + 1] + xc[2 * i + 2]) * third);
            }
        }
        Ok(self.push(vec![c, out_len], out, Op::AvgPool1d { input }))
    }

    fn unary(&mut self, input: Var, f: impl Fn(T) -> T, op: Op<T>) -> Var {
        let shape = self.shape(input).to_vec();
        let out = self.value(input).iter().map(|&v| f(v)).collect();
        self.push(shape, out, op)
    }

    /// `max(0, x)`; the subgradient at 0 is 0.
    pub fn relu(&mut self, input: Var) -> Var {
        self.unary(input, |v| if v > T::zero() { v } else { T::zero() }, Op::Relu { input })
    }

    pub fn sigmoid(&mut self, input: Var) -> Var {
        self.unary(input, sigmoid, Op::Sigmoid { input })
    }

    pub fn tanh(&mut self, input: Var) -> Var {
        self.unary(input, |v| v.tanh(), Op::Tanh { input })
    }

    /// `weight * input + bias` for a vector input.
    pub fn fully_connected(&mut self, input: Var, weight: Var, bias: Var) -> Result<Var> {
        let (is, ws, bs) = (self.shape(input), self.shape(weight), self.shape(bias));
        if is.len() != 1 || ws.len() != 2 || bs.len() != 1 || ws[1] != is[0] || bs[0] != ws[0] {
            return shape_err(
                "fully_connected",
                format!("input {is:?}, weight {ws:?}, bias {bs:?}"),
            );
        }
        let (o, d) = (ws[0], ws[1]);
        let x = self.value(input);
        let w = self.value(weight);
        let b = self.value(bias);
        let out: Vec<T> = (0..o)
            .map(|r| {
                w[r * d..(r + 1) * d]
                    .iter()
                    .zip(x)
                    .fold(b[r], |acc, (&wv, &xv)| acc + wv * xv)
            })
            .collect();
        Ok(self.push(vec![o], out, Op::Linear { input, weight, bias }))
    }

    /// Inverted dropout: in training each element is zeroed with probability
    /// `p` and survivors are scaled by `1 / (1 - p)`; evaluation is identity.
    pub fn dropout<R: Rng + ?Sized>(&mut self, input: Var, p: f64, mode: Mode, rng: &mut R) -> Result<Var> {
        if !(0.0..1.0).contains(&p) {
            return Err(NnError::Param(format!("dropout probability must be in [0, 1), got {p}")));
        }
        if mode == Mode::Eval || p == 0.0 {
            return Ok(input);
        }
        let scale = T::lit(1.0 / (1.0 - p));
        let n = self.value(input).len();
        let mask: Vec<T> = (0..n)
            .map(|_| if rng.random::<f64>() < p { T::zero() } else { scale })
            .collect();
        let shape = self.shape(input).to_vec();
        let out = self.value(input).iter().zip(&mask).map(|(&v, &m)| v * m).collect();
        Ok(self.push(shape, out, Op::Dropout { input, mask }))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<Vec<usize>> {
        if self.shape(a) != self.shape(b) {
            return shape_err(op, format!("{:?} vs {:?}", self.shape(a), self.shape(b)));
        }
        Ok(self.shape(a).to_vec())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let shape = self.same_shape("add", a, b)?;
        let out = self.value(a).iter().zip(self.value(b)).map(|(&x, &y)| x + y).collect();
        Ok(self.push(shape, out, Op::Add { a, b }))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let shape = self.same_shape("mul", a, b)?;
        let out = self.value(a).iter().zip(self.value(b)).map(|(&x, &y)| x * y).collect();
        Ok(self.push(shape, out, Op::Mul { a, b }))
    }

    /// Joins vectors end to end.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return shape_err("concat", "no inputs");
        }
        let mut out = Vec::new();
        for &p in parts {
            if self.shape(p).len() != 1 {
                return shape_err("concat", format!("expects vectors, got {:?}", self.shape(p)));
            }
            out.extend_from_slice(self.value(p));
        }
        let n = out.len();
        Ok(self.push(vec![n], out, Op::Concat { parts: parts.to_vec() }))
    }

    pub fn reshape(&mut self, input: Var, shape: &[usize]) -> Result<Var> {
        if numel(shape) != self.value(input).len() {
            return shape_err("reshape", format!("{:?} -> {shape:?}", self.shape(input)));
        }
        let value = self.value(input).to_vec();
        Ok(self.push(shape.to_vec(), value, Op::Reshape { input }))
    }

    pub fn flatten(&mut self, input: Var) -> Result<Var> {
        let n = self.value(input).len();
        self.reshape(input, &[n])
    }

    /// Sum of all elements, as a one-element tensor.
    pub fn sum(&mut self, input: Var) -> Var {
        let total = self.value(input).iter().copied().sum::<T>();
        self.push(vec![1], vec![total], Op::Sum { input })
    }

    /// Returns the loss node `-ln softmax(logits)[target]` and the class
    /// probabilities.
    pub fn softmax_cross_entropy(&mut self, logits: Var, target: usize) -> Result<(Var, Vec<T>)> {
        let s = self.shape(logits);
        if s.len() != 1 || s[0] < 2 {
            return shape_err("softmax_cross_entropy", format!("need [C>=2] logits, got {s:?}"));
        }
        if target >= s[0] {
            return Err(NnError::Target { index: target, classes: s[0] });
        }
        let z = self.value(logits);
        let max = z.iter().copied().fold(T::neg_infinity(), T::max);
        let log_total = z.iter().map(|&v| (v - max).exp()).sum::<T>().ln();
        let loss = -(z[target] - max - log_total);
        let probs = softmax(z);
        let v = self.push(
            vec![1],
            vec![loss],
            Op::SoftmaxCrossEntropy { logits, target, probs: probs.clone() },
        );
        Ok((v, probs))
    }

    fn accumulate(&mut self, v: Var, contribution: Vec<T>) {
        let node = &mut self.nodes[v.0];
        if !node.requires_grad {
            return;
        }
        match &mut node.grad {
            Some(g) => g.iter_mut().zip(contribution).for_each(|(a, b)| *a = *a + b),
            None => node.grad = Some(contribution),
        }
    }

    /// Back-propagates from a one-element `loss`, accumulating into every
    /// node that requires a gradient.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.nodes[loss.0].value.len() != 1 {
            return Err(NnError::NonScalarLoss(self.shape(loss).to_vec()));
        }
        if !self.nodes[loss.0].requires_grad {
            return Ok(());
        }
        self.accumulate(loss, vec![T::one()]);
        for i in (0..=loss.0).rev() {
            if !self.nodes[i].requires_grad {
                continue;
            }
            let Some(g) = self.nodes[i].grad.take() else { continue };
            let op = std::mem::replace(&mut self.nodes[i].op, Op::Leaf);
            if let Some(bad) = op.parents().into_iter().find(|p| p.0 >= i) {
                self.nodes[i].op = op;
                self.nodes[i].grad = Some(g);
                return Err(NnError::Graph(format!(
                    "node {i} depends on node {} which is not earlier in topological order",
                    bad.0
                )));
            }
            self.propagate(i, &op, &g);
            self.nodes[i].op = op;
            self.nodes[i].grad = Some(g);
        }
        Ok(())
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn propagate(&mut self, i: usize, op: &Op<T>, g: &[T]) {
        match op {
            Op::Leaf => {}
            Op::Conv1d { input, kernel, bias } => {
                let (c_in, len) = (self.shape(*input)[0], self.shape(*input)[1]);
                let (c_out, k) = (self.shape(*kernel)[0], self.shape(*kernel)[2]);
                let out_len = len - k + 1;
                let x = self.value(*input);
                let w = self.value(*kernel);
                let dx = self.needs(*input).then(|| {
                    let mut dx = vec![T::zero(); c_in * len];
                    for o in 0..c_out {
                        let go = &g[o * out_len..(o + 1) * out_len];
                        for c in 0..c_in {
                            let dxc = &mut dx[c * len..(c + 1) * len];
                            for n in 0..k {
                                let wv = w[(o * c_in + c) * k + n];
                                for (d, &gv) in dxc[n..n + out_len].iter_mut().zip(go) {
                                    *d = *d + wv * gv;
                                }
                            }
                        }
                    }
                    dx
                });
                let dw = self.needs(*kernel).then(|| {
                    let mut dw = vec![T::zero(); c_out * c_in * k];
                    for o in 0..c_out {
                        let go = &g[o * out_len..(o + 1) * out_len];
                        for c in 0..c_in {
                            let xc = &x[c * len..(c + 1) * len];
                            for n in 0..k {
                                dw[(o * c_in + c) * k + n] = go
                                    .iter()
                                    .zip(&xc[n..n + out_len])
                                    .fold(T::zero(), |acc, (&gv, &xv)| acc + gv * xv);
                            }
                        }
                    }
                    dw
                });
                let db = self.needs(*bias).then(|| {
                    (0..c_out)
                        .map(|o| g[o * out_len..(o + 1) * out_len].iter().copied().sum::<T>())
                        .collect::<Vec<T>>()
                });
                if let Some(dx) = dx {
                    self.accumulate(*input, dx);
                }
                if let Some(dw) = dw {
                    self.accumulate(*kernel, dw);
                }
                if let Some(db) = db {
                    self.accumulate(*bias, db);
                }
            }
            Op::AvgPool1d { input } => {
                let (c, len) = (self.shape(*input)[0], self.shape(*input)[1]);
                let out_len = (len - 3) / 2 + 1;
                let third = T::lit(1.0 / 3.0);
                let mut dx = vec![T::zero(); c * len];
                for ch in 0..c {
                    for j in 0..out_len {
                        let gv = g[ch * out_len + j] * third;
                        for t in 0..3 {
                            let idx = ch * len + 2 * j + t;
                            dx[idx] = dx[idx] + gv;
                        }
                    }
                }
                self.accumulate(*input, dx);
            }
            Op::Relu { input } => {
                let x = self.value(*input);
                let dx = x
                    .iter()
                    .zip(g)
                    .map(|(&v, &gv)| if v > T::zero() { gv } else { T::zero() })
                    .collect();
                self.accumulate(*input, dx);
            }
            Op::Sigmoid { input } => {
                let y = &self.nodes[i].value;
                let dx = y.iter().zip(g).map(|(&s, &gv)| gv * s * (T::one() - s)).collect();
                self.accumulate(*input, dx);
            }
            Op::Tanh { input } => {
                let y = &self.nodes[i].value;
                let dx = y.iter().zip(g).map(|(&t, &gv)| gv * (T::one() - t * t)).collect();
                self.accumulate(*input, dx);
            }
            Op::Linear { input, weight, bias } => {
                let (o, d) = (self.shape(*weight)[0], self.shape(*weight)[1]);
                let x = self.value(*input);
                let w = self.value(*weight);
                let dx = self.needs(*input).then(|| {
                    let mut dx = vec![T::zero(); d];
                    for r in 0..o {
                        let gv = g[r];
                        for (dv, &wv) in dx.iter_mut().zip(&w[r * d..(r + 1) * d]) {
                            *dv = *dv + wv * gv;
                        }
                    }
                    dx
                });
                let dw = self.needs(*weight).then(|| {
                    let mut dw = Vec::with_capacity(o * d);
                    for &gv in g.iter().take(o) {
                        dw.extend(x.iter().map(|&xv| gv * xv));
                    }
                    dw
                });
                if let Some(dx) = dx {
                    self.accumulate(*input, dx);
                }
                if let Some(dw) = dw {
                    self.accumulate(*weight, dw);
                }
                self.accumulate(*bias, g.to_vec());
            }
            Op::Dropout { input, mask } => {
                let dx = g.iter().zip(mask).map(|(&gv, &m)| gv * m).collect();
                self.accumulate(*input, dx);
            }
            Op::Add { a, b } => {
                self.accumulate(*a, g.to_vec());
                self.accumulate(*b, g.to_vec());
            }
            Op::Mul { a, b } => {
                let da: Vec<T> = self.value(*b).iter().zip(g).map(|(&y, &gv)| y * gv).collect();
                let db: Vec<T> = self.value(*a).iter().zip(g).map(|(&x, &gv)| x * gv).collect();
                self.accumulate(*a, da);
                self.accumulate(*b, db);
            }
            Op::Concat { parts } => {
                let mut offset = 0;
                for &p in parts {
                    let n = self.value(p).len();
                    self.accumulate(p, g[offset..offset + n].to_vec());
                    offset += n;
                }
            }
            Op::Reshape { input } => self.accumulate(*input, g.to_vec()),
            Op::Sum { input } => {
                let n = self.value(*input).len();
                self.accumulate(*input, vec![g[0]; n]);
            }
            Op::SoftmaxCrossEntropy { logits, target, probs } => {
                let mut d: Vec<T> = probs.iter().map(|&p| p * g[0]).collect();
                d[*target] = d[*target] - g[0];
                self.accumulate(*logits, d);
            }
        }
    }
}
