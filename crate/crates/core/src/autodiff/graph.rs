use std::cell::{Ref, RefCell};
use std::collections::HashMap;

use super::real::gemm;
use super::{AutodiffError, ParamId, ParamStore, Real, Tensor};

/// Handle to a node on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Unary {
    Neg,
    Exp,
    Sqrt,
    Sin,
    Cos,
    Relu,
    Sigmoid,
    Softplus,
    Tanh,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Binary {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Clone, Debug)]
enum Op<T> {
    Leaf,
    MatMul(usize, usize),
    Binary(Binary, usize, usize),
    Unary(Unary, usize),
    Scale(usize, T),
    Shift(usize),
    Sum(usize),
    Mean(usize),
    SumAxis { input: usize, axis: usize },
    Concat { inputs: Vec<usize>, axis: usize },
    Slice { input: usize, axis: usize, start: usize },
    Cumsum { input: usize, axis: usize, exclusive: bool },
    Broadcast(usize),
    Reshape(usize),
}

struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
    requires_grad: bool,
}

/// Reverse-mode tape. Every operation appends a node; [`Graph::backward`]
/// walks the tape in reverse, so tape order is the topological order.
///
/// A graph lives for one forward/backward pass and is not shared across
/// threads.
pub struct Graph<T: Real> {
    nodes: RefCell<Vec<Node<T>>>,
    params: RefCell<HashMap<ParamId, Var>>,
}

impl<T: Real> Default for Graph<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// Splits `shape` around `axis` into `(outer, axis_len, inner)`.
fn axis_split(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

fn broadcast_shape(a: &[usize], b: &[usize]) -> Option<Vec<usize>> {
    let rank = a.len().max(b.len());
    let mut out = vec![0; rank];
    for i in 0..rank {
        let da = if i + a.len() >= rank { a[i + a.len() - rank] } else { 1 };
        let db = if i + b.len() >= rank { b[i + b.len() - rank] } else { 1 };
        out[i] = match (da, db) {
            (x, y) if x == y => x,
            (1, y) => y,
            (x, 1) => x,
            _ => return None,
        };
    }
    Some(out)
}

/// Strides of `shape` aligned to `out` (right-justified), zero where broadcast.
fn aligned_strides(shape: &[usize], out: &[usize]) -> Vec<usize> {
    let rank = out.len();
    let mut strides = vec![0; rank];
    let mut acc = 1;
    for i in (0..shape.len()).rev() {
        let o = i + rank - shape.len();
        strides[o] = if shape[i] == 1 && out[o] != 1 { 0 } else { acc };
        acc *= shape[i];
    }
    strides
}

/// Calls `f(out_index, a_index, b_index)` for every element of the
/// broadcast output, iterating the last dimension innermost.
fn for_each_broadcast(out: &[usize], sa: &[usize], sb: &[usize], mut f: impl FnMut(usize, usize, usize)) {
    let total: usize = out.iter().product();
    if total == 0 {
        return;
    }
    if out.is_empty() {
        f(0, 0, 0);
        return;
    }
    let rank = out.len();
    let last = out[rank - 1];
    let (la, lb) = (sa[rank - 1], sb[rank - 1]);
    let mut idx = vec![0usize; rank - 1];
    let (mut ba, mut bb) = (0usize, 0usize);
    let mut o = 0;
    loop {
        for j in 0..last {
            f(o, ba + j * la, bb + j * lb);
            o += 1;
        }
        // odometer over leading dims
        let mut d = rank - 1;
        loop {
            if d == 0 {
                return;
            }
            d -= 1;
            idx[d] += 1;
            ba += sa[d];
            bb += sb[d];
            if idx[d] < out[d] {
                break;
            }
            ba -= sa[d] * out[d];
            bb -= sb[d] * out[d];
            idx[d] = 0;
        }
    }
}

/// Sums `grad` (shaped `out`) down to `shape`, undoing a broadcast.
fn reduce_to_shape<T: Real>(grad: &[T], out: &[usize], shape: &[usize]) -> Vec<T> {
    let n: usize = shape.iter().product();
    if out == shape {
        return grad.to_vec();
    }
    let mut result = vec![T::zero(); n];
    let s = aligned_strides(shape, out);
    let zeros = vec![0; out.len()];
    for_each_broadcast(out, &s, &zeros, |o, i, _| result[i] += grad[o]);
    result
}

fn softplus<T: Real>(x: T) -> T {
    // max(x, 0) + ln(1 + e^{-|x|})
    x.max(T::zero()) + (-x.abs()).exp().ln_1p()
}

fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

impl<T: Real> Graph<T> {
    pub fn new() -> Self {
        Self {
            nodes: RefCell::new(Vec::new()),
            params: RefCell::new(HashMap::new()),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, value: Tensor<T>, op: Op<T>, requires_grad: bool) -> Var {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> Ref<'_, Tensor<T>> {
        Ref::map(self.nodes.borrow(), |n| &n[v.0].value)
    }

    pub fn shape(&self, v: Var) -> Vec<usize> {
        self.nodes.borrow()[v.0].value.shape().to_vec()
    }

    /// Leaf that does not participate in differentiation.
    pub fn constant(&self, t: Tensor<T>) -> Var {
        self.push(t, Op::Leaf, false)
    }

    /// Leaf that receives a gradient in [`Graph::backward`].
    pub fn leaf(&self, t: Tensor<T>) -> Var {
        self.push(t, Op::Leaf, true)
    }

    pub fn scalar(&self, v: T) -> Var {
        self.constant(Tensor::scalar(v))
    }

    /// Binds a stored parameter onto the tape. Repeated binds of the same id
    /// return the same node, so gradients from every use are summed.
    pub fn param(&self, store: &ParamStore<T>, id: ParamId) -> Var {
        if let Some(&v) = self.params.borrow().get(&id) {
            return v;
        }
        let t = store.get(id);
        let mut value = Tensor::new(t.shape(), t.data().to_vec()).expect("param shape");
        value.set_requires_grad(false);
        let v = self.push(value, Op::Leaf, true);
        self.params.borrow_mut().insert(id, v);
        v
    }

    /// Binds a parameter as a constant (no gradient flows into it).
    pub fn frozen_param(&self, store: &ParamStore<T>, id: ParamId) -> Var {
        let t = store.get(id);
        self.constant(Tensor::new(t.shape(), t.data().to_vec()).expect("param shape"))
    }

    pub fn matmul(&self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let (value, rg) = {
            let nodes = self.nodes.borrow();
            let (ta, tb) = (&nodes[a.0].value, &nodes[b.0].value);
            let (sa, sb) = (ta.shape(), tb.shape());
            if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
                return Err(AutodiffError::ShapeMismatch {
                    op: "matmul",
                    lhs: sa.to_vec(),
                    rhs: sb.to_vec(),
                });
            }
            let (m, k, n) = (sa[0], sa[1], sb[1]);
            let mut out = vec![T::zero(); m * n];
            gemm(m, k, n, ta.data(), false, tb.data(), false, &mut out, false);
            (
                Tensor::new(&[m, n], out)?,
                nodes[a.0].requires_grad || nodes[b.0].requires_grad,
            )
        };
        Ok(self.push(value, Op::MatMul(a.0, b.0), rg))
    }

    fn binary(&self, kind: Binary, a: Var, b: Var) -> Result<Var, AutodiffError> {
        let (value, rg) = {
            let nodes = self.nodes.borrow();
            let (ta, tb) = (&nodes[a.0].value, &nodes[b.0].value);
            let name = match kind {
                Binary::Add => "add",
                Binary::Sub => "sub",
                Binary::Mul => "mul",
                Binary::Div => "div",
            };
            let out_shape = broadcast_shape(ta.shape(), tb.shape()).ok_or_else(|| AutodiffError::ShapeMismatch {
                op: name,
                lhs: ta.shape().to_vec(),
                rhs: tb.shape().to_vec(),
            })?;
            let f = |x: T, y: T| match kind {
                Binary::Add => x + y,
                Binary::Sub => x - y,
                Binary::Mul => x * y,
                Binary::Div => x / y,
            };
            let out = if ta.shape() == tb.shape() {
                ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect()
            } else {
                let n: usize = out_shape.iter().product();
                let mut out = vec![T::zero(); n];
                let (da, db) = (ta.data(), tb.data());
                let sa = aligned_strides(ta.shape(), &out_shape);
                let sb = aligned_strides(tb.shape(), &out_shape);
                for_each_broadcast(&out_shape, &sa, &sb, |o, i, j| out[o] = f(da[i], db[j]));
                out
            };
            (
                Tensor::new(&out_shape, out)?,
                nodes[a.0].requires_grad || nodes[b.0].requires_grad,
            )
        };
        Ok(self.push(value, Op::Binary(kind, a.0, b.0), rg))
    }

    pub fn add(&self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.binary(Binary::Add, a, b)
    }

    pub fn sub(&self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.binary(Binary::Sub, a, b)
    }

    pub fn mul(&self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.binary(Binary::Mul, a, b)
    }

    pub fn div(&self, a: Var, b: Var) -> Result<Var, AutodiffError> {
        self.binary(Binary::Div, a, b)
    }

    fn unary(&self, kind: Unary, a: Var) -> Var {
        let (value, rg) = {
            let nodes = self.nodes.borrow();
            let t = &nodes[a.0].value;
            let f = |x: T| match kind {
                Unary::Neg => -x,
                Unary::Exp => x.exp(),
                Unary::Sqrt => x.sqrt(),
                Unary::Sin => x.sin(),
                Unary::Cos => x.cos(),
                Unary::Relu => x.max(T::zero()),
                Unary::Sigmoid => sigmoid(x),
                Unary::Softplus => softplus(x),
                Unary::Tanh => x.tanh(),
            };
            let data = t.data().iter().map(|&x| f(x)).collect();
            (
                Tensor::new(t.shape(), data).expect("same shape"),
                nodes[a.0].requires_grad,
            )
        };
        self.push(value, Op::Unary(kind, a.0), rg)
    }

    pub fn neg(&self, a: Var) -> Var {
        self.unary(Unary::Neg, a)
    }
    pub fn exp(&self, a: Var) -> Var {
        self.unary(Unary::Exp, a)
    }
    /// Square root; its gradient at exactly 0 is taken to be 0.
    pub fn sqrt(&self, a: Var) -> Var {
        self.unary(Unary::Sqrt, a)
    }
    pub fn sin(&self, a: Var) -> Var {
        self.unary(Unary::Sin, a)
    }
    pub fn cos(&self, a: Var) -> Var {
        self.unary(Unary::Cos, a)
    }
    pub fn relu(&self, a: Var) -> Var {
        self.unary(Unary::Relu, a)
    }
    pub fn sigmoid(&self, a: Var) -> Var {
        self.unary(Unary::Sigmoid, a)
    }
    pub fn softplus(&self, a: Var) -> Var {
        self.unary(Unary::Softplus, a)
    }
    pub fn tanh(&self, a: Var) -> Var {
        self.unary(Unary::Tanh, a)
    }

    /// Multiplies by a constant.
    pub fn scale(&self, a: Var, c: T) -> Var {
        let (value, rg) = {
            let nodes = self.nodes.borrow();
            let t = &nodes[a.0].value;
            let data = t.data().iter().map(|&x| x * c).collect();
            (
                Tensor::new(t.shape(), data).expect("same shape"),
                nodes[a.0].requires_grad,
            )
        };
        self.push(value, Op::Scale(a.0, c), rg)
    }

    /// Adds a constant.
    pub fn shift(&self, a: Var, c: T) -> Var {
        let (value, rg) = {
            let nodes = self.nodes.borrow();
            let t = &nodes[a.0].value;
            let data = t.data().iter().map(|&x| x + c).collect();
            (
                Tensor::new(t.shape(), data).expect("same shape"),
                nodes[a.0].requires_grad,
            )
        };
        self.push(value, Op::Shift(a.0), rg)
    }

    /// Sum of all elements, as a rank-0 tensor.
    pub fn sum(&self, a: Var) -> Var {
        let (value, rg) = {
            let nodes = self.nodes.borrow();
            let s = nodes[a.0].value.data().iter().copied().sum();
            (Tensor::scalar(s), nodes[a.0].requires_grad)
        };
        self.push(value, Op::Sum(a.0), rg)
    }

    pub fn mean(&self, a: Var) -> Var {
        let (value, rg) = {
            let nodes = self.nodes.borrow();
            let t = &nodes[a.0].value;
            let s: T = t.data().iter().copied().sum();
            (
                Tensor::scalar(s / T::of(t.len().max(1) as f64)),
                nodes[a.0].requires_grad,
            )
        };
        self.push(value, Op::Mean(a.0), rg)
    }

    /// Sums along `axis`, removing it from the shape.
    pub fn sum_axis(&self, a: Var, axis: usize) -> Result<Var, AutodiffError> {
        let (value, rg) = {
            let nodes = self.nodes.borrow();
            let t = &nodes[a.0].value;
            if axis >= t.shape().len() {
                return Err(AutodiffError::InvalidArgument {
                    op: "sum_axis",
                    reason: format!("axis {axis} out of range for shape {:?}", t.shape()),
                });
            }
            let (outer, len, inner) = axis_split(t.shape(), axis);
            let d = t.data();
            let mut out = vec![T::zero(); outer * inner];
            for o in 0..outer {
                for k in 0..len {
                    let src = &d[(o * len + k) * inner..(o * len + k + 1) * inner];
                    let dst = &mut out[o * inner..(o + 1) * inner];
                    for (x, &y) in dst.iter_mut().zip(src) {
                        *x += y;
                    }
                }
            }
            let mut shape = t.shape().to_vec();
            shape.remove(axis);
            (Tensor::new(&shape, out)?, nodes[a.0].requires_grad)
        };
        Ok(self.push(value, Op::SumAxis { input: a.0, axis }, rg))
    }

    pub fn concat(&self, inputs: &[Var], axis: usize) -> Result<Var, AutodiffError> {
        let (value, rg) = {
            let nodes = self.nodes.borrow();
            let first = inputs.first().ok_or(AutodiffError::InvalidArgument {
                op: "concat",
                reason: "no inputs".into(),
            })?;
            let base = nodes[first.0].value.shape().to_vec();
            if axis >= base.len() {
                return Err(AutodiffError::InvalidArgument {
                    op: "concat",
                    reason: format!("axis {axis} out of range for shape {base:?}"),
                });
            }
            let mut total = 0;
            for v in inputs {
                let s = nodes[v.0].value.shape();
                let compatible =
                    s.len() == base.len() && s.iter().zip(&base).enumerate().all(|(i, (x, y))| i == axis || x == y);
                if !compatible {
                    return Err(AutodiffError::ShapeMismatch {
                        op: "concat",
                        lhs: base.clone(),
                        rhs: s.to_vec(),
                    });
                }
                total += s[axis];
            }
            let (outer, _, inner) = axis_split(&base, axis);
            let mut out = Vec::with_capacity(outer * total * inner);
            for o in 0..outer {
                for v in inputs {
                    let t = &nodes[v.0].value;
                    let len = t.shape()[axis];
                    out.extend_from_slice(&t.data()[o * len * inner..(o + 1) * len * inner]);
                }
            }
            let mut shape = base;
            shape[axis] = total;
            (
                Tensor::new(&shape, out)?,
                inputs.iter().any(|v| nodes[v.0].requires_grad),
            )
        };
        Ok(self.push(
            value,
            Op::Concat {
                inputs: inputs.iter().map(|v| v.0).collect(),
                axis,
            },
            rg,
        ))
    }

    /// Elements `start..start+len` along `axis`.
    pub fn slice(&self, a: Var, axis: usize, start: usize, len: usize) -> Result<Var, AutodiffError> {
        let (value, rg) = {
            let nodes = self.nodes.borrow();
            let t = &nodes[a.0].value;
            if axis >= t.shape().len() || start + len > t.shape()[axis] {
                return Err(AutodiffError::InvalidArgument {
                    op: "slice",
                    reason: format!("range {start}..{} on axis {axis} of shape {:?}", start + len, t.shape()),
                });
            }
            let (outer, full, inner) = axis_split(t.shape(), axis);
            let mut out = Vec::with_capacity(outer * len * inner);
            for o in 0..outer {
                let base = (o * full + start) * inner;
                out.extend_from_slice(&t.data()[base..base + len * inner]);
            }
            let mut shape = t.shape().to_vec();
            shape[axis] = len;
            (Tensor::new(&shape, out)?, nodes[a.0].requires_grad)
        };
        Ok(self.push(
            value,
            Op::Slice {
                input: a.0,
                axis,
                start,
            },
            rg,
        ))
    }

    /// Running sum along `axis`. Exclusive mode shifts by one (first = 0).
    pub fn cumsum(&self, a: Var, axis: usize, exclusive: bool) -> Result<Var, AutodiffError> {
        let (value, rg) = {
            let nodes = self.nodes.borrow();
            let t = &nodes[a.0].value;
            if axis >= t.shape().len() {
                return Err(AutodiffError::InvalidArgument {
                    op: "cumsum",
                    reason: format!("axis {axis} out of range for shape {:?}", t.shape()),
                });
            }
            let (outer, len, inner) = axis_split(t.shape(), axis);
            let d = t.data();
            let mut out = vec![T::zero(); d.len()];
            for o in 0..outer {
                for i in 0..inner {
                    let mut acc = T::zero();
                    for k in 0..len {
                        let idx = (o * len + k) * inner + i;
                        if exclusive {
                            out[idx] = acc;
                            acc += d[idx];
                        } else {
                            acc += d[idx];
                            out[idx] = acc;
                        }
                    }
                }
            }
            (Tensor::new(t.shape(), out)?, nodes[a.0].requires_grad)
        };
        Ok(self.push(
            value,
            Op::Cumsum {
                input: a.0,
                axis,
                exclusive,
            },
            rg,
        ))
    }

    pub fn broadcast_to(&self, a: Var, shape: &[usize]) -> Result<Var, AutodiffError> {
        let (value, rg) = {
            let nodes = self.nodes.borrow();
            let t = &nodes[a.0].value;
            match broadcast_shape(t.shape(), shape) {
                Some(s) if s == shape => {}
                _ => {
                    return Err(AutodiffError::ShapeMismatch {
                        op: "broadcast_to",
                        lhs: t.shape().to_vec(),
                        rhs: shape.to_vec(),
                    })
                }
            }
            let n: usize = shape.iter().product();
            let mut out = vec![T::zero(); n];
            let s = aligned_strides(t.shape(), shape);
            let zeros = vec![0; shape.len()];
            let d = t.data();
            for_each_broadcast(shape, &s, &zeros, |o, i, _| out[o] = d[i]);
            (Tensor::new(shape, out)?, nodes[a.0].requires_grad)
        };
        Ok(self.push(value, Op::Broadcast(a.0), rg))
    }

    pub fn reshape(&self, a: Var, shape: &[usize]) -> Result<Var, AutodiffError> {
        let (value, rg) = {
            let nodes = self.nodes.borrow();
            (nodes[a.0].value.reshape(shape)?, nodes[a.0].requires_grad)
        };
        Ok(self.push(value, Op::Reshape(a.0), rg))
    }

    /// `x · w + b` with `x: [n, in]`, `w: [in, out]`, `b: [1, out]`.
    pub fn linear(&self, x: Var, w: Var, b: Var) -> Result<Var, AutodiffError> {
        let y = self.matmul(x, w)?;
        self.add(y, b)
    }

    /// Reverse pass from a one-element `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients<T>, AutodiffError> {
        let nodes = self.nodes.borrow();
        let root = &nodes[loss.0];
        if root.value.len() != 1 {
            return Err(AutodiffError::NonScalarLoss(root.value.shape().to_vec()));
        }
        let mut grads: Vec<Option<Vec<T>>> = vec![None; loss.0 + 1];
        let mut leaves = HashMap::new();
        if !root.requires_grad {
            return Ok(Gradients { leaves });
        }
        grads[loss.0] = Some(vec![T::one()]);

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &nodes[i];
            if !node.requires_grad {
                continue;
            }
            let mut send = |j: usize, contribution: Vec<T>| {
                if !nodes[j].requires_grad {
                    return;
                }
                match &mut grads[j] {
                    Some(acc) => {
                        for (a, b) in acc.iter_mut().zip(contribution) {
                            *a += b;
                        }
                    }
                    slot @ None => *slot = Some(contribution),
                }
            };
            let out_shape = node.value.shape();
            match &node.op {
                Op::Leaf => {
                    leaves.insert(i, Tensor::new(out_shape, g)?);
                }
                Op::MatMul(a, b) => {
                    let (ta, tb) = (&nodes[*a].value, &nodes[*b].value);
                    let (m, k, n) = (ta.shape()[0], ta.shape()[1], tb.shape()[1]);
                    if nodes[*a].requires_grad {
                        let mut da = vec![T::zero(); m * k];
                        gemm(m, n, k, &g, false, tb.data(), true, &mut da, false);
                        send(*a, da);
                    }
                    if nodes[*b].requires_grad {
                        let mut db = vec![T::zero(); k * n];
                        gemm(k, m, n, ta.data(), true, &g, false, &mut db, false);
                        send(*b, db);
                    }
                }
                Op::Binary(kind, a, b) => {
                    let (ta, tb) = (&nodes[*a].value, &nodes[*b].value);
                    let same = ta.shape() == tb.shape();
                    let sa = aligned_strides(ta.shape(), out_shape);
                    let sb = aligned_strides(tb.shape(), out_shape);
                    let (da, db) = (ta.data(), tb.data());
                    let (ra, rb) = (nodes[*a].requires_grad, nodes[*b].requires_grad);
                    match kind {
                        Binary::Add | Binary::Sub => {
                            if ra {
                                send(*a, reduce_to_shape(&g, out_shape, ta.shape()));
                            }
                            if rb {
                                let mut gb = reduce_to_shape(&g, out_shape, tb.shape());
                                if *kind == Binary::Sub {
                                    gb.iter_mut().for_each(|v| *v = -*v);
                                }
                                send(*b, gb);
                            }
                        }
                        Binary::Mul | Binary::Div => {
                            let mut ga = vec![T::zero(); da.len()];
                            let mut gb = vec![T::zero(); db.len()];
                            let div = *kind == Binary::Div;
                            let mut step = |o: usize, i: usize, j: usize| {
                                let (x, y) = (da[i], db[j]);
                                if div {
                                    ga[i] += g[o] / y;
                                    gb[j] -= g[o] * x / (y * y);
                                } else {
                                    ga[i] += g[o] * y;
                                    gb[j] += g[o] * x;
                                }
                            };
                            if same {
                                for o in 0..g.len() {
                                    step(o, o, o);
                                }
                            } else {
                                for_each_broadcast(out_shape, &sa, &sb, step);
                            }
                            if ra {
                                send(*a, ga);
                            }
                            if rb {
                                send(*b, gb);
                            }
                        }
                    }
                }
                Op::Unary(kind, a) => {
                    let x = nodes[*a].value.data();
                    let y = node.value.data();
                    let one = T::one();
                    let ga: Vec<T> = (0..g.len())
                        .map(|k| {
                            let d = match kind {
                                Unary::Neg => -one,
                                Unary::Exp => y[k],
                                Unary::Sqrt => {
                                    // √ is not differentiable at 0; use the zero subgradient
                                    if y[k] > T::zero() {
                                        T::of(0.5) / y[k]
                                    } else {
                                        T::zero()
                                    }
                                }
                                Unary::Sin => x[k].cos(),
                                Unary::Cos => -x[k].sin(),
                                Unary::Relu => {
                                    if x[k] > T::zero() {
                                        one
                                    } else {
                                        T::zero()
                                    }
                                }
                                Unary::Sigmoid => y[k] * (one - y[k]),
                                Unary::Softplus => sigmoid(x[k]),
                                Unary::Tanh => one - y[k] * y[k],
                            };
                            g[k] * d
                        })
                        .collect();
                    send(*a, ga);
                }
                Op::Scale(a, c) => send(*a, g.iter().map(|&v| v * *c).collect()),
                Op::Shift(a) => send(*a, g),
                Op::Sum(a) => send(*a, vec![g[0]; nodes[*a].value.len()]),
                Op::Mean(a) => {
                    let n = nodes[*a].value.len();
                    send(*a, vec![g[0] / T::of(n.max(1) as f64); n]);
                }
                Op::SumAxis { input, axis } => {
                    let in_shape = nodes[*input].value.shape();
                    let (outer, len, inner) = axis_split(in_shape, *axis);
                    let mut ga = vec![T::zero(); outer * len * inner];
                    for o in 0..outer {
                        let src = &g[o * inner..(o + 1) * inner];
                        for k in 0..len {
                            ga[(o * len + k) * inner..(o * len + k + 1) * inner].copy_from_slice(src);
                        }
                    }
                    send(*input, ga);
                }
                Op::Concat { inputs, axis } => {
                    let (outer, total, inner) = axis_split(out_shape, *axis);
                    let mut offset = 0;
                    for &j in inputs {
                        let len = nodes[j].value.shape()[*axis];
                        if nodes[j].requires_grad {
                            let mut gj = Vec::with_capacity(outer * len * inner);
                            for o in 0..outer {
                                let base = (o * total + offset) * inner;
                                gj.extend_from_slice(&g[base..base + len * inner]);
                            }
                            send(j, gj);
                        }
                        offset += len;
                    }
                }
                Op::Slice { input, axis, start } => {
                    let in_shape = nodes[*input].value.shape();
                    let (outer, full, inner) = axis_split(in_shape, *axis);
                    let len = out_shape[*axis];
                    let mut ga = vec![T::zero(); outer * full * inner];
                    for o in 0..outer {
                        let base = (o * full + start) * inner;
                        ga[base..base + len * inner].copy_from_slice(&g[o * len * inner..(o + 1) * len * inner]);
                    }
                    send(*input, ga);
                }
                Op::Cumsum { input, axis, exclusive } => {
                    let (outer, len, inner) = axis_split(out_shape, *axis);
                    let mut ga = vec![T::zero(); g.len()];
                    for o in 0..outer {
                        for i in 0..inner {
                            let mut acc = T::zero();
                            for k in (0..len).rev() {
                                let idx = (o * len + k) * inner + i;
                                if *exclusive {
                                    ga[idx] = acc;
                                    acc += g[idx];
                                } else {
                                    acc += g[idx];
                                    ga[idx] = acc;
                                }
                            }
                        }
                    }
                    send(*input, ga);
                }
                Op::Broadcast(a) => {
                    send(*a, reduce_to_shape(&g, out_shape, nodes[*a].value.shape()));
                }
                Op::Reshape(a) => send(*a, g),
            }
        }
        Ok(Gradients { leaves })
    }

    /// Runs [`Graph::backward`] and adds every bound parameter's gradient
    /// into its accumulator in `store`.
    pub fn backward_into(&self, loss: Var, store: &mut ParamStore<T>) -> Result<Gradients<T>, AutodiffError> {
        let grads = self.backward(loss)?;
        let params = self.params.borrow();
        let mut bound: Vec<_> = params.iter().collect();
        bound.sort_by_key(|(id, _)| **id);
        for (id, var) in bound {
            if let Some(g) = grads.wrt(*var) {
                store.get_mut(*id).accumulate_grad(g.data());
            }
        }
        Ok(grads)
    }
}

/// Leaf gradients from one backward pass.
#[derive(Debug, Default)]
pub struct Gradients<T> {
    leaves: HashMap<usize, Tensor<T>>,
}

impl<T: Real> Gradients<T> {
    /// Gradient w.r.t. a leaf; `None` when the leaf was unreachable.
    pub fn wrt(&self, v: Var) -> Option<&Tensor<T>> {
        self.leaves.get(&v.0)
    }
}
