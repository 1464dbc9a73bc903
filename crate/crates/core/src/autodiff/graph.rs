use rand::Rng as _;

use super::tensor::Tensor;
use crate::error::{NpdError, Result};
use crate::rng::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Scale applied to the negated gradient by [`Graph::grad_reverse`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReversalCoefficient(f64);

impl ReversalCoefficient {
    pub const ONE: ReversalCoefficient = ReversalCoefficient(1.0);
    pub const ZERO: ReversalCoefficient = ReversalCoefficient(0.0);

    pub fn new(lambda_rev: f64) -> Result<Self> {
        if !(lambda_rev >= 0.0 && lambda_rev.is_finite()) {
            return Err(NpdError::Config(format!(
                "reversal coefficient must be finite and >= 0, got {lambda_rev}"
            )));
        }
        Ok(ReversalCoefficient(lambda_rev))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OpTag {
    Leaf,
    Param,
    MatMul,
    Add,
    Mul,
    Tanh,
    Sigmoid,
    Softmax,
    Concat,
    Slice,
    StackRows,
    AddRowBias,
    GatherRows,
    GradReverse,
    Dropout,
    Sum,
    Scale,
    NllPick,
    BinaryNll,
}

#[derive(Debug)]
enum Op {
    Leaf,
    Param(usize),
    MatMul(NodeId, NodeId),
    Add(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Tanh(NodeId),
    Sigmoid(NodeId),
    Softmax(NodeId),
    Concat(NodeId, NodeId),
    Slice(NodeId, usize),
    StackRows(Vec<NodeId>),
    AddRowBias(NodeId, NodeId),
    GatherRows(NodeId, Vec<usize>),
    GradReverse(NodeId, f64),
    Dropout(NodeId, Vec<f64>),
    Sum(NodeId),
    Scale(NodeId, f64),
    NllPick { probs: NodeId, gold: usize, active: bool },
    BinaryNll { p: NodeId, target: f64, active: bool },
}

impl Op {
    fn tag(&self) -> OpTag {
        match self {
            Op::Leaf => OpTag::Leaf,
            Op::Param(_) => OpTag::Param,
            Op::MatMul(..) => OpTag::MatMul,
            Op::Add(..) => OpTag::Add,
            Op::Mul(..) => OpTag::Mul,
            Op::Tanh(_) => OpTag::Tanh,
            Op::Sigmoid(_) => OpTag::Sigmoid,
            Op::Softmax(_) => OpTag::Softmax,
            Op::Concat(..) => OpTag::Concat,
            Op::Slice(..) => OpTag::Slice,
            Op::StackRows(_) => OpTag::StackRows,
            Op::AddRowBias(..) => OpTag::AddRowBias,
            Op::GatherRows(..) => OpTag::GatherRows,
            Op::GradReverse(..) => OpTag::GradReverse,
            Op::Dropout(..) => OpTag::Dropout,
            Op::Sum(_) => OpTag::Sum,
            Op::Scale(..) => OpTag::Scale,
            Op::NllPick { .. } => OpTag::NllPick,
            Op::BinaryNll { .. } => OpTag::BinaryNll,
        }
    }

    fn parents(&self) -> Vec<NodeId> {
        match self {
            Op::Leaf | Op::Param(_) => Vec::new(),
            Op::MatMul(a, b) | Op::Add(a, b) | Op::Mul(a, b) | Op::Concat(a, b) => vec![*a, *b],
            Op::AddRowBias(a, b) => vec![*a, *b],
            Op::Tanh(a)
            | Op::Sigmoid(a)
            | Op::Softmax(a)
            | Op::Sum(a)
            | Op::Slice(a, _)
            | Op::GatherRows(a, _)
            | Op::GradReverse(a, _)
            | Op::Dropout(a, _)
            | Op::Scale(a, _) => vec![*a],
            Op::StackRows(rows) => rows.clone(),
            Op::NllPick { probs, .. } => vec![*probs],
            Op::BinaryNll { p, .. } => vec![*p],
        }
    }
}

struct Node {
    value: Tensor,
    grad: Option<Vec<f64>>,
    requires_grad: bool,
    op: Op,
}

/// A tape of operations recorded in creation order.
///
/// Node ids only ever refer to earlier nodes, so the tape order is a
/// topological order and the graph is acyclic by construction. A graph is
/// built per example and dropped after its gradients are harvested.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
    clamp_events: usize,
}

/// `(m, k, n)` and output shape for the supported matmul operand ranks.
fn matmul_dims(a: &[usize], b: &[usize]) -> Result<(usize, usize, usize, Vec<usize>)> {
    let (m, ka, a_vec) = match a {
        [k] => (1, *k, true),
        [m, k] => (*m, *k, false),
        _ => return Err(NpdError::dim("matmul", format!("lhs must be 1-D or 2-D, got {a:?}"))),
    };
    let (kb, n, b_vec) = match b {
        [k] => (*k, 1, true),
        [k, n] => (*k, *n, false),
        _ => return Err(NpdError::dim("matmul", format!("rhs must be 1-D or 2-D, got {b:?}"))),
    };
    if ka != kb {
        return Err(NpdError::dim(
            "matmul",
            format!("inner dimensions disagree: {a:?} x {b:?}"),
        ));
    }
    let shape = match (a_vec, b_vec) {
        (false, false) => vec![m, n],
        (true, false) => vec![n],
        (false, true) => vec![m],
        (true, true) => Vec::new(),
    };
    Ok((m, ka, n, shape))
}

fn gemm(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == 0.0 {
                continue;
            }
            for (o, &bv) in row.iter_mut().zip(&b[p * n..(p + 1) * n]) {
                *o += aip * bv;
            }
        }
    }
    out
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn softmax_slice(x: &[f64]) -> Vec<f64> {
    let max = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = x.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op) -> NodeId {
        let requires_grad = match &op {
            Op::Leaf => false,
            Op::Param(_) => true,
            other => other.parents().iter().any(|p| self.nodes[p.0].requires_grad),
        };
        self.nodes.push(Node {
            value,
            grad: None,
            requires_grad,
            op,
        });
        NodeId(self.nodes.len() - 1)
    }

    /// A leaf that never receives gradient.
    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.push(value, Op::Leaf)
    }

    /// A leaf that receives gradient; not tied to any parameter slot.
    pub fn variable(&mut self, value: Tensor) -> NodeId {
        let id = self.push(value, Op::Leaf);
        self.nodes[id.0].requires_grad = true;
        id
    }

    /// Binds parameter slot `slot`. The tensor storage is shared, not copied.
    pub fn param(&mut self, slot: usize, value: &Tensor) -> NodeId {
        self.push(value.clone(), Op::Param(slot))
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    pub fn op_tag(&self, id: NodeId) -> OpTag {
        self.nodes[id.0].op.tag()
    }

    pub fn parents(&self, id: NodeId) -> Vec<NodeId> {
        self.nodes[id.0].op.parents()
    }

    /// Gradient of `id`; zeros when backward never reached it.
    pub fn grad(&self, id: NodeId) -> Tensor {
        let node = &self.nodes[id.0];
        match &node.grad {
            Some(g) => Tensor::new(node.value.shape().to_vec(), g.clone())
                .expect("grad buffer matches value shape"),
            None => Tensor::zeros(node.value.shape()),
        }
    }

    /// `(slot, gradient)` for every bound parameter that received gradient.
    pub fn param_grads(&self) -> impl Iterator<Item = (usize, &[f64])> + '_ {
        self.nodes.iter().filter_map(|n| match (&n.op, &n.grad) {
            (Op::Param(slot), Some(g)) => Some((*slot, g.as_slice())),
            _ => None,
        })
    }

    pub fn zero_grads(&mut self) {
        for n in &mut self.nodes {
            n.grad = None;
        }
    }

    /// Number of log-probability clamps applied by the loss ops.
    pub fn clamp_events(&self) -> usize {
        self.clamp_events
    }

    /// First node (in creation order) holding a non-finite value.
    pub fn first_non_finite(&self) -> Option<(NodeId, OpTag)> {
        self.nodes
            .iter()
            .enumerate()
            .find(|(_, n)| !n.value.is_finite())
            .map(|(i, n)| (NodeId(i), n.op.tag()))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (va, vb) = (self.value(a), self.value(b));
        let (m, k, n, shape) = matmul_dims(va.shape(), vb.shape())?;
        let out = gemm(va.data(), vb.data(), m, k, n);
        Ok(self.push(Tensor::new(shape, out)?, Op::MatMul(a, b)))
    }

    fn same_shape(&self, op: &'static str, a: NodeId, b: NodeId) -> Result<()> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(NpdError::dim(op, format!("shapes differ: {sa:?} vs {sb:?}")));
        }
        Ok(())
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape("add", a, b)?;
        let (va, vb) = (self.value(a), self.value(b));
        let data = va.data().iter().zip(vb.data()).map(|(x, y)| x + y).collect();
        let t = Tensor::new(va.shape().to_vec(), data)?;
        Ok(self.push(t, Op::Add(a, b)))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape("mul", a, b)?;
        let (va, vb) = (self.value(a), self.value(b));
        let data = va.data().iter().zip(vb.data()).map(|(x, y)| x * y).collect();
        let t = Tensor::new(va.shape().to_vec(), data)?;
        Ok(self.push(t, Op::Mul(a, b)))
    }

    fn map_unary(&mut self, a: NodeId, f: impl Fn(f64) -> f64, op: Op) -> NodeId {
        let va = self.value(a);
        let data = va.data().iter().map(|&x| f(x)).collect();
        let t = Tensor::new(va.shape().to_vec(), data).expect("same shape");
        self.push(t, op)
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        self.map_unary(a, f64::tanh, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        self.map_unary(a, sigmoid, Op::Sigmoid(a))
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        self.map_unary(a, |x| c * x, Op::Scale(a, c))
    }

    /// Max-subtracted softmax over a vector.
    pub fn softmax(&mut self, logits: NodeId) -> Result<NodeId> {
        let v = self.value(logits);
        if v.ndim() != 1 || v.is_empty() {
            return Err(NpdError::dim(
                "softmax",
                format!("expected a non-empty vector, got shape {:?}", v.shape()),
            ));
        }
        let t = Tensor::vector(softmax_slice(v.data()));
        Ok(self.push(t, Op::Softmax(logits)))
    }

    pub fn concat(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.ndim() != 1 || vb.ndim() != 1 {
            return Err(NpdError::dim(
                "concat",
                format!("both inputs must be vectors, got {:?} and {:?}", va.shape(), vb.shape()),
            ));
        }
        let mut data = va.data().to_vec();
        data.extend_from_slice(vb.data());
        Ok(self.push(Tensor::vector(data), Op::Concat(a, b)))
    }

    /// `len` consecutive elements of the flattened value starting at `start`,
    /// as a vector.
    pub fn slice(&mut self, a: NodeId, start: usize, len: usize) -> Result<NodeId> {
        let va = self.value(a);
        if start + len > va.len() {
            return Err(NpdError::dim(
                "slice",
                format!("range {start}..{} out of bounds for {} elements", start + len, va.len()),
            ));
        }
        let t = Tensor::vector(va.data()[start..start + len].to_vec());
        Ok(self.push(t, Op::Slice(a, start)))
    }

    /// Row `r` of a matrix.
    pub fn row(&mut self, m: NodeId, r: usize) -> Result<NodeId> {
        let shape = self.value(m).shape().to_vec();
        if shape.len() != 2 || r >= shape[0] {
            return Err(NpdError::dim("row", format!("row {r} of shape {shape:?}")));
        }
        self.slice(m, r * shape[1], shape[1])
    }

    /// Stacks equal-length vectors into an `[n x d]` matrix.
    pub fn stack_rows(&mut self, rows: &[NodeId]) -> Result<NodeId> {
        let d = match rows.first() {
            Some(&r) => self.value(r).len(),
            None => return Err(NpdError::dim("stack_rows", "no rows")),
        };
        let mut data = Vec::with_capacity(d * rows.len());
        for &r in rows {
            let v = self.value(r);
            if v.ndim() != 1 || v.len() != d {
                return Err(NpdError::dim(
                    "stack_rows",
                    format!("row shape {:?} differs from [{d}]", v.shape()),
                ));
            }
            data.extend_from_slice(v.data());
        }
        let t = Tensor::matrix(rows.len(), d, data)?;
        Ok(self.push(t, Op::StackRows(rows.to_vec())))
    }

    /// Adds vector `bias` to every row of matrix `m`.
    pub fn add_row_bias(&mut self, m: NodeId, bias: NodeId) -> Result<NodeId> {
        let (vm, vb) = (self.value(m), self.value(bias));
        let cols = match vm.shape() {
            [_, c] if vb.shape() == [*c] => *c,
            _ => {
                return Err(NpdError::dim(
                    "add_row_bias",
                    format!("{:?} + row {:?}", vm.shape(), vb.shape()),
                ))
            }
        };
        let data = vm
            .data()
            .iter()
            .enumerate()
            .map(|(i, x)| x + vb.data()[i % cols])
            .collect();
        let t = Tensor::new(vm.shape().to_vec(), data)?;
        Ok(self.push(t, Op::AddRowBias(m, bias)))
    }

    /// Rows `ids` of matrix `table`, as an `[ids.len() x d]` matrix.
    pub fn gather_rows(&mut self, table: NodeId, ids: &[usize]) -> Result<NodeId> {
        let vt = self.value(table);
        let (rows, d) = match vt.shape() {
            [r, d] => (*r, *d),
            s => return Err(NpdError::dim("gather_rows", format!("table shape {s:?}"))),
        };
        let mut data = Vec::with_capacity(ids.len() * d);
        for &i in ids {
            if i >= rows {
                return Err(NpdError::Contract(format!(
                    "row id {i} out of range for table with {rows} rows"
                )));
            }
            data.extend_from_slice(vt.row(i));
        }
        let t = Tensor::matrix(ids.len(), d, data)?;
        Ok(self.push(t, Op::GatherRows(table, ids.to_vec())))
    }

    /// Identity forward; backward multiplies the incoming gradient by `-lambda_rev`.
    pub fn grad_reverse(&mut self, x: NodeId, c: ReversalCoefficient) -> NodeId {
        let v = self.value(x).clone();
        self.push(v, Op::GradReverse(x, c.value()))
    }

    /// Inverted dropout. Identity in eval mode or at rate 0.
    pub fn dropout(&mut self, x: NodeId, rate: f64, rng: &mut Rng, train: bool) -> Result<NodeId> {
        if !(0.0..1.0).contains(&rate) {
            return Err(NpdError::Config(format!("dropout rate {rate} outside [0, 1)")));
        }
        if !train || rate == 0.0 {
            return Ok(x);
        }
        let keep = 1.0 / (1.0 - rate);
        let v = self.value(x);
        let mask: Vec<f64> = (0..v.len())
            .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
            .collect();
        let data = v.data().iter().zip(&mask).map(|(a, m)| a * m).collect();
        let t = Tensor::new(v.shape().to_vec(), data)?;
        Ok(self.push(t, Op::Dropout(x, mask)))
    }

    pub fn sum(&mut self, x: NodeId) -> NodeId {
        let s = self.value(x).data().iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(x))
    }

    /// `-ln(max(probs[gold], floor))`. Clamped picks pass no gradient.
    pub fn nll_pick(&mut self, probs: NodeId, gold: usize, floor: f64) -> Result<NodeId> {
        let v = self.value(probs);
        if v.ndim() != 1 || gold >= v.len() {
            return Err(NpdError::Contract(format!(
                "gold class {gold} invalid for distribution of shape {:?}",
                v.shape()
            )));
        }
        let p = v.data()[gold];
        let active = p > floor;
        if !active && !p.is_nan() {
            self.clamp_events += 1;
        }
        let loss = if p.is_nan() { f64::NAN } else { -p.max(floor).ln() };
        let t = Tensor::scalar(loss);
        Ok(self.push(t, Op::NllPick { probs, gold, active }))
    }

    /// `-[t ln p + (1-t) ln(1-p)]` with `p` clamped to `[eps, 1-eps]`.
    pub fn binary_nll(&mut self, p: NodeId, target: f64, eps: f64) -> Result<NodeId> {
        let v = self.value(p);
        if !v.is_scalar() {
            return Err(NpdError::Contract(format!(
                "binary_nll expects a scalar probability, got shape {:?}",
                v.shape()
            )));
        }
        let raw = v.item();
        let clamped = raw.clamp(eps, 1.0 - eps);
        let active = clamped == raw;
        if !active {
            self.clamp_events += 1;
        }
        let loss = -(target * clamped.ln() + (1.0 - target) * (1.0 - clamped).ln());
        Ok(self.push(Tensor::scalar(loss), Op::BinaryNll { p, target, active }))
    }

    fn accumulate(&mut self, id: NodeId, f: impl FnOnce(&mut [f64])) {
        let node = &mut self.nodes[id.0];
        if !node.requires_grad {
            return;
        }
        let n = node.value.len();
        f(node.grad.get_or_insert_with(|| vec![0.0; n]))
    }

    /// Reverse-mode sweep from a scalar `loss`. Gradients accumulate into
    /// existing buffers; call [`Graph::zero_grads`] to reset.
    pub fn backward(&mut self, loss: NodeId) -> Result<()> {
        if !self.value(loss).is_scalar() {
            return Err(NpdError::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        self.accumulate(loss, |g| g[0] += 1.0);
        for i in (0..=loss.0).rev() {
            let grad = match self.nodes[i].grad.take() {
                Some(g) if self.nodes[i].requires_grad => g,
                other => {
                    self.nodes[i].grad = other;
                    continue;
                }
            };
            self.propagate(i, &grad);
            self.nodes[i].grad = Some(grad);
        }
        Ok(())
    }

    fn propagate(&mut self, i: usize, g: &[f64]) {
        // Ops hold parent ids < i, so parent values stay readable while the
        // child's gradient is detached.
        let op = std::mem::replace(&mut self.nodes[i].op, Op::Leaf);
        match &op {
            Op::Leaf | Op::Param(_) => {}
            Op::MatMul(a, b) => {
                let (m, k, n, _) =
                    matmul_dims(self.value(*a).shape(), self.value(*b).shape()).expect("checked");
                if self.nodes[a.0].requires_grad {
                    let bv = self.nodes[b.0].value.clone();
                    let bd = bv.data();
                    self.accumulate(*a, |ga| {
                        for r in 0..m {
                            let grow = &g[r * n..(r + 1) * n];
                            for p in 0..k {
                                let brow = &bd[p * n..(p + 1) * n];
                                ga[r * k + p] += grow.iter().zip(brow).map(|(x, y)| x * y).sum::<f64>();
                            }
                        }
                    });
                }
                if self.nodes[b.0].requires_grad {
                    let av = self.nodes[a.0].value.clone();
                    let ad = av.data();
                    self.accumulate(*b, |gb| {
                        for r in 0..m {
                            let grow = &g[r * n..(r + 1) * n];
                            for p in 0..k {
                                let arp = ad[r * k + p];
                                if arp == 0.0 {
                                    continue;
                                }
                                for (o, x) in gb[p * n..(p + 1) * n].iter_mut().zip(grow) {
                                    *o += arp * x;
                                }
                            }
                        }
                    });
                }
            }
            Op::Add(a, b) => {
                for p in [*a, *b] {
                    self.accumulate(p, |gp| gp.iter_mut().zip(g).for_each(|(o, x)| *o += x));
                }
            }
            Op::Mul(a, b) => {
                let (va, vb) = (self.nodes[a.0].value.clone(), self.nodes[b.0].value.clone());
                self.accumulate(*a, |ga| {
                    for ((o, x), y) in ga.iter_mut().zip(g).zip(vb.data()) {
                        *o += x * y;
                    }
                });
                self.accumulate(*b, |gb| {
                    for ((o, x), y) in gb.iter_mut().zip(g).zip(va.data()) {
                        *o += x * y;
                    }
                });
            }
            Op::Tanh(a) => {
                let out = self.nodes[i].value.clone();
                self.accumulate(*a, |ga| {
                    for ((o, x), y) in ga.iter_mut().zip(g).zip(out.data()) {
                        *o += x * (1.0 - y * y);
                    }
                });
            }
            Op::Sigmoid(a) => {
                let out = self.nodes[i].value.clone();
                self.accumulate(*a, |ga| {
                    for ((o, x), y) in ga.iter_mut().zip(g).zip(out.data()) {
                        *o += x * y * (1.0 - y);
                    }
                });
            }
            Op::Softmax(a) => {
                let out = self.nodes[i].value.clone();
                let dot: f64 = g.iter().zip(out.data()).map(|(x, y)| x * y).sum();
                self.accumulate(*a, |ga| {
                    for ((o, x), y) in ga.iter_mut().zip(g).zip(out.data()) {
                        *o += y * (x - dot);
                    }
                });
            }
            Op::Concat(a, b) => {
                let split = self.nodes[a.0].value.len();
                self.accumulate(*a, |ga| {
                    ga.iter_mut().zip(&g[..split]).for_each(|(o, x)| *o += x)
                });
                self.accumulate(*b, |gb| {
                    gb.iter_mut().zip(&g[split..]).for_each(|(o, x)| *o += x)
                });
            }
            Op::Slice(a, start) => {
                let start = *start;
                self.accumulate(*a, |ga| {
                    ga[start..start + g.len()]
                        .iter_mut()
                        .zip(g)
                        .for_each(|(o, x)| *o += x)
                });
            }
            Op::StackRows(rows) => {
                let d = g.len() / rows.len();
                for (r, &row) in rows.iter().enumerate() {
                    self.accumulate(row, |gr| {
                        gr.iter_mut()
                            .zip(&g[r * d..(r + 1) * d])
                            .for_each(|(o, x)| *o += x)
                    });
                }
            }
            Op::AddRowBias(m, bias) => {
                self.accumulate(*m, |gm| gm.iter_mut().zip(g).for_each(|(o, x)| *o += x));
                let cols = self.nodes[bias.0].value.len();
                self.accumulate(*bias, |gb| {
                    for (j, x) in g.iter().enumerate() {
                        gb[j % cols] += x;
                    }
                });
            }
            Op::GatherRows(table, ids) => {
                let d = self.nodes[table.0].value.shape()[1];
                self.accumulate(*table, |gt| {
                    for (r, &id) in ids.iter().enumerate() {
                        for (o, x) in gt[id * d..(id + 1) * d].iter_mut().zip(&g[r * d..(r + 1) * d]) {
                            *o += x;
                        }
                    }
                });
            }
            Op::GradReverse(a, lambda) => {
                let lambda = *lambda;
                self.accumulate(*a, |ga| {
                    ga.iter_mut().zip(g).for_each(|(o, x)| *o += -lambda * x)
                });
            }
            Op::Dropout(a, mask) => {
                self.accumulate(*a, |ga| {
                    for ((o, x), m) in ga.iter_mut().zip(g).zip(mask) {
                        *o += x * m;
                    }
                });
            }
            Op::Sum(a) => {
                let s = g[0];
                self.accumulate(*a, |ga| ga.iter_mut().for_each(|o| *o += s));
            }
            Op::Scale(a, c) => {
                let c = *c;
                self.accumulate(*a, |ga| ga.iter_mut().zip(g).for_each(|(o, x)| *o += c * x));
            }
            Op::NllPick { probs, gold, active } => {
                if *active {
                    let p = self.nodes[probs.0].value.data()[*gold];
                    let gold = *gold;
                    self.accumulate(*probs, |gp| gp[gold] += -g[0] / p);
                }
            }
            Op::BinaryNll { p, target, active } => {
                if *active {
                    let pv = self.nodes[p.0].value.item();
                    let d = -target / pv + (1.0 - target) / (1.0 - pv);
                    self.accumulate(*p, |gp| gp[0] += g[0] * d);
                }
            }
        }
        self.nodes[i].op = op;
    }
}
