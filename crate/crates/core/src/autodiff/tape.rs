//! Define-by-run reverse-mode tape.
//!
//! Every recorded node only references strictly smaller ids, so the backward
//! sweep is a single pass in decreasing id order.

use std::sync::atomic::{AtomicU64, Ordering};

use super::tensor::{matmul_into, Tensor};
use crate::error::{Error, Result};
use crate::scalar::Real;

static NEXT_TAPE_ID: AtomicU64 = AtomicU64::new(1);

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var {
    tape: u64,
    id: usize,
}

impl Var {
    pub fn id(self) -> usize {
        self.id
    }
}

#[derive(Clone, Debug)]
enum Op<T> {
    Leaf,
    Constant,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    MatMul(usize, usize),
    Concat { inputs: Vec<usize>, axis: usize },
    Slice { input: usize, axis: usize, start: usize },
    Sum(usize),
    Mean(usize),
    Tanh(usize),
    Relu(usize),
    Softmax(usize),
    Square(usize),
    Sqrt(usize),
    Scale(usize, T),
    Reshape(usize),
    Transpose(usize),
    GatherRows(usize, Vec<usize>),
}

impl<T> Op<T> {
    fn inputs(&self) -> Vec<usize> {
        match self {
            Op::Leaf | Op::Constant => vec![],
            Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::MatMul(a, b) => vec![*a, *b],
            Op::Concat { inputs, .. } => inputs.clone(),
            Op::Slice { input, .. } => vec![*input],
            Op::Sum(a)
            | Op::Mean(a)
            | Op::Tanh(a)
            | Op::Relu(a)
            | Op::Softmax(a)
            | Op::Square(a)
            | Op::Sqrt(a)
            | Op::Scale(a, _)
            | Op::Reshape(a)
            | Op::Transpose(a)
            | Op::GatherRows(a, _) => vec![*a],
        }
    }
}

#[derive(Clone, Debug)]
struct Node<T> {
    op: Op<T>,
    value: Tensor<T>,
    needs_grad: bool,
}

/// Append-only computation record for one forward pass.
#[derive(Debug)]
pub struct Tape<T> {
    id: u64,
    nodes: Vec<Node<T>>,
}

impl<T: Real> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Self {
            id: NEXT_TAPE_ID.fetch_add(1, Ordering::Relaxed),
            nodes: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn check(&self, v: Var) -> Result<usize> {
        if v.tape != self.id || v.id >= self.nodes.len() {
            return Err(Error::NotOnTape(v.id));
        }
        Ok(v.id)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        assert_eq!(v.tape, self.id, "variable belongs to another tape");
        &self.nodes[v.id].value
    }

    fn push(&mut self, op: Op<T>, value: Tensor<T>, name: &'static str) -> Result<Var> {
        if !value.all_finite() {
            return Err(Error::NonFinite { op: name });
        }
        let needs_grad = match &op {
            Op::Leaf => true,
            Op::Constant => false,
            other => other.inputs().iter().any(|&i| self.nodes[i].needs_grad),
        };
        let id = self.nodes.len();
        self.nodes.push(Node { op, value, needs_grad });
        Ok(Var { tape: self.id, id })
    }

    /// Differentiable input.
    pub fn leaf(&mut self, value: Tensor<T>) -> Result<Var> {
        self.push(Op::Leaf, value, "leaf")
    }

    /// Input that never receives a gradient.
    pub fn constant(&mut self, value: Tensor<T>) -> Result<Var> {
        self.push(Op::Constant, value, "constant")
    }

    fn binary(
        &mut self,
        a: Var,
        b: Var,
        name: &'static str,
        f: impl Fn(&Tensor<T>, &Tensor<T>) -> Result<Tensor<T>>,
        op: impl Fn(usize, usize) -> Op<T>,
    ) -> Result<Var> {
        let (ia, ib) = (self.check(a)?, self.check(b)?);
        let value = f(&self.nodes[ia].value, &self.nodes[ib].value)?;
        self.push(op(ia, ib), value, name)
    }

    fn unary(
        &mut self,
        a: Var,
        name: &'static str,
        f: impl Fn(&Tensor<T>) -> Result<Tensor<T>>,
        op: impl Fn(usize) -> Op<T>,
    ) -> Result<Var> {
        let ia = self.check(a)?;
        let value = f(&self.nodes[ia].value)?;
        self.push(op(ia), value, name)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "add", Tensor::add, Op::Add)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "sub", Tensor::sub, Op::Sub)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "mul", Tensor::mul, Op::Mul)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "matmul", Tensor::matmul, Op::MatMul)
    }

    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        let ids = parts.iter().map(|&p| self.check(p)).collect::<Result<Vec<_>>>()?;
        let refs: Vec<&Tensor<T>> = ids.iter().map(|&i| &self.nodes[i].value).collect();
        let value = Tensor::concat(&refs, axis)?;
        self.push(Op::Concat { inputs: ids, axis }, value, "concat")
    }

    pub fn slice(&mut self, a: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        self.unary(
            a,
            "slice",
            |t| t.slice(axis, start, len),
            |input| Op::Slice { input, axis, start },
        )
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        self.unary(a, "sum", |t| Ok(t.sum()), Op::Sum)
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        self.unary(a, "mean", Tensor::mean, Op::Mean)
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.unary(a, "tanh", |t| Ok(t.tanh()), Op::Tanh)
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.unary(a, "relu", |t| Ok(t.relu()), Op::Relu)
    }

    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        self.unary(a, "softmax", Tensor::softmax, Op::Softmax)
    }

    pub fn square(&mut self, a: Var) -> Result<Var> {
        self.unary(a, "square", |t| Ok(t.square()), Op::Square)
    }

    pub fn sqrt(&mut self, a: Var) -> Result<Var> {
        self.unary(a, "sqrt", |t| Ok(t.sqrt()), Op::Sqrt)
    }

    pub fn scale(&mut self, a: Var, c: T) -> Result<Var> {
        self.unary(a, "scale", |t| Ok(t.scale(c)), |i| Op::Scale(i, c))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        self.unary(a, "reshape", |t| t.reshape(shape), Op::Reshape)
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        self.unary(a, "transpose", Tensor::transpose, Op::Transpose)
    }

    pub fn gather_rows(&mut self, a: Var, rows: &[usize]) -> Result<Var> {
        self.unary(a, "gather_rows", |t| t.gather_rows(rows), |i| Op::GatherRows(i, rows.to_vec()))
    }

    /// Reverse sweep from a scalar `root`.
    ///
    /// Returns gradients for every leaf; leaves that do not influence the
    /// root receive zeros.
    pub fn backward(&self, root: Var) -> Result<Gradients<T>> {
        let root_id = self.check(root)?;
        let root_value = &self.nodes[root_id].value;
        if !root_value.is_scalar() {
            return Err(Error::RootNotScalar(root_value.shape().to_vec()));
        }
        let mut grads: Vec<Option<Tensor<T>>> = vec![None; root_id + 1];
        grads[root_id] = Some(Tensor::filled(root_value.shape(), T::one()));

        for id in (0..=root_id).rev() {
            let node = &self.nodes[id];
            if !node.needs_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = grads[id].take() else { continue };
            self.propagate(node, &g, &mut grads);
        }

        let leaves = self
            .nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| matches!(n.op, Op::Leaf))
            .map(|(id, n)| {
                let g = grads
                    .get_mut(id)
                    .and_then(Option::take)
                    .unwrap_or_else(|| Tensor::zeros(n.value.shape()));
                (id, g)
            })
            .collect();
        Ok(Gradients { tape: self.id, leaves })
    }

    fn propagate(&self, node: &Node<T>, g: &Tensor<T>, grads: &mut [Option<Tensor<T>>]) {
        let val = |i: usize| &self.nodes[i].value;
        let wants = |i: usize| self.nodes[i].needs_grad;
        match &node.op {
            Op::Leaf | Op::Constant => {}
            Op::Add(a, b) => {
                if wants(*a) {
                    accumulate(grads, *a, g.clone());
                }
                if wants(*b) {
                    accumulate(grads, *b, g.clone());
                }
            }
            Op::Sub(a, b) => {
                if wants(*a) {
                    accumulate(grads, *a, g.clone());
                }
                if wants(*b) {
                    accumulate(grads, *b, g.scale(-T::one()));
                }
            }
            Op::Mul(a, b) => {
                if wants(*a) {
                    accumulate(grads, *a, g.mul(val(*b)).expect("recorded shapes agree"));
                }
                if wants(*b) {
                    accumulate(grads, *b, g.mul(val(*a)).expect("recorded shapes agree"));
                }
            }
            Op::MatMul(a, b) => {
                let (av, bv) = (val(*a), val(*b));
                let (m, k) = (av.shape()[0], av.shape()[1]);
                let n = bv.shape()[1];
                if wants(*a) {
                    // dA = G · Bᵀ
                    let mut out = vec![T::zero(); m * k];
                    let gd = g.data();
                    let bd = bv.data();
                    for i in 0..m {
                        for p in 0..k {
                            let mut acc = T::zero();
                            for j in 0..n {
                                acc += gd[i * n + j] * bd[p * n + j];
                            }
                            out[i * k + p] = acc;
                        }
                    }
                    accumulate(grads, *a, Tensor::matrix(m, k, out).expect("shape"));
                }
                if wants(*b) {
                    // dB = Aᵀ · G
                    let at = av.transpose().expect("2-D");
                    let mut out = vec![T::zero(); k * n];
                    matmul_into(at.data(), g.data(), &mut out, k, m, n);
                    accumulate(grads, *b, Tensor::matrix(k, n, out).expect("shape"));
                }
            }
            Op::Concat { inputs, axis } => {
                let mut start = 0;
                for &i in inputs {
                    let len = val(i).shape()[*axis];
                    if wants(i) {
                        accumulate(grads, i, g.slice(*axis, start, len).expect("recorded shapes agree"));
                    }
                    start += len;
                }
            }
            Op::Slice { input, axis, start } => {
                if wants(*input) {
                    let shape = val(*input).shape();
                    let outer: usize = shape[..*axis].iter().product();
                    let inner: usize = shape[axis + 1..].iter().product();
                    let len = g.shape()[*axis];
                    let mut full = Tensor::zeros(shape);
                    let stride = shape[*axis] * inner;
                    let fd = full.data_mut();
                    for o in 0..outer {
                        let dst = o * stride + start * inner;
                        let src = o * len * inner;
                        fd[dst..dst + len * inner].copy_from_slice(&g.data()[src..src + len * inner]);
                    }
                    accumulate(grads, *input, full);
                }
            }
            Op::Sum(a) => {
                let gs = g.data()[0];
                accumulate(grads, *a, Tensor::filled(val(*a).shape(), gs));
            }
            Op::Mean(a) => {
                let n = T::from_usize(val(*a).numel()).unwrap();
                accumulate(grads, *a, Tensor::filled(val(*a).shape(), g.data()[0] / n));
            }
            Op::Tanh(a) => {
                let y = &node.value;
                let d = zip(g, y, |gi, yi| gi * (T::one() - yi * yi));
                accumulate(grads, *a, d);
            }
            Op::Relu(a) => {
                let d = zip(g, val(*a), |gi, xi| if xi > T::zero() { gi } else { T::zero() });
                accumulate(grads, *a, d);
            }
            Op::Softmax(a) => {
                let y = &node.value;
                let width = *y.shape().last().unwrap();
                let mut out = Vec::with_capacity(y.numel());
                for (gr, yr) in g.data().chunks(width).zip(y.data().chunks(width)) {
                    let dot: T = gr.iter().zip(yr).map(|(&gi, &yi)| gi * yi).sum();
                    out.extend(gr.iter().zip(yr).map(|(&gi, &yi)| yi * (gi - dot)));
                }
                accumulate(grads, *a, Tensor::new(y.shape().to_vec(), out).unwrap());
            }
            Op::Square(a) => {
                let two = T::lit(2.0);
                accumulate(grads, *a, zip(g, val(*a), |gi, xi| two * xi * gi));
            }
            Op::Sqrt(a) => {
                let two = T::lit(2.0);
                accumulate(grads, *a, zip(g, &node.value, |gi, yi| gi / (two * yi)));
            }
            Op::Scale(a, c) => accumulate(grads, *a, g.scale(*c)),
            Op::Reshape(a) => {
                accumulate(grads, *a, g.reshape(val(*a).shape()).expect("same numel"));
            }
            Op::Transpose(a) => accumulate(grads, *a, g.transpose().expect("2-D")),
            Op::GatherRows(a, rows) => {
                let src = val(*a);
                let c = src.shape()[1];
                let mut full = Tensor::zeros(src.shape());
                let fd = full.data_mut();
                for (r, &i) in rows.iter().enumerate() {
                    for j in 0..c {
                        fd[i * c + j] += g.data()[r * c + j];
                    }
                }
                accumulate(grads, *a, full);
            }
        }
    }
}

fn zip<T: Real>(a: &Tensor<T>, b: &Tensor<T>, f: impl Fn(T, T) -> T) -> Tensor<T> {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::new(b.shape().to_vec(), data).expect("recorded shapes agree")
}

fn accumulate<T: Real>(grads: &mut [Option<Tensor<T>>], id: usize, g: Tensor<T>) {
    match &mut grads[id] {
        Some(existing) => {
            for (e, v) in existing.data_mut().iter_mut().zip(g.data()) {
                *e += *v;
            }
        }
        slot @ None => *slot = Some(g),
    }
}

/// Gradients of a scalar root with respect to the leaves of one tape.
#[derive(Clone, Debug)]
pub struct Gradients<T> {
    tape: u64,
    leaves: Vec<(usize, Tensor<T>)>,
}

impl<T: Real> Gradients<T> {
    pub fn wrt(&self, v: Var) -> Result<&Tensor<T>> {
        if v.tape != self.tape {
            return Err(Error::NotOnTape(v.id));
        }
        self.leaves
            .iter()
            .find(|(id, _)| *id == v.id)
            .map(|(_, g)| g)
            .ok_or(Error::NotOnTape(v.id))
    }

    /// `(node id, gradient)` pairs in ascending id order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, &Tensor<T>)> {
        self.leaves.iter().map(|(id, g)| (*id, g))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_derivative() {
        let mut tape = Tape::<f64>::new();
        let x = tape.leaf(Tensor::scalar(3.0)).unwrap();
        let y = tape.mul(x, x).unwrap();
        let g = tape.backward(y).unwrap();
        assert_eq!(g.wrt(x).unwrap().data(), &[6.0]);
    }

    #[test]
    fn sum_gradient_is_ones() {
        let mut tape = Tape::<f64>::new();
        let x = tape.leaf(Tensor::vector(vec![1., -2., 3., 0.5, 7.])).unwrap();
        let s = tape.sum(x).unwrap();
        let g = tape.backward(s).unwrap();
        assert_eq!(g.wrt(x).unwrap().data(), &[1.0; 5]);
    }

    #[test]
    fn unused_leaf_gets_zero_gradient() {
        let mut tape = Tape::<f64>::new();
        let x = tape.leaf(Tensor::vector(vec![1., 2.])).unwrap();
        let unused = tape.leaf(Tensor::vector(vec![3., 4., 5.])).unwrap();
        let s = tape.sum(x).unwrap();
        let g = tape.backward(s).unwrap();
        assert_eq!(g.wrt(unused).unwrap().data(), &[0.0; 3]);
    }

    #[test]
    fn root_must_be_scalar() {
        let mut tape = Tape::<f64>::new();
        let x = tape.leaf(Tensor::vector(vec![1., 2.])).unwrap();
        assert!(matches!(tape.backward(x), Err(Error::RootNotScalar(_))));
    }

    #[test]
    fn root_from_other_tape_is_rejected() {
        let mut a = Tape::<f64>::new();
        let mut b = Tape::<f64>::new();
        let _ = a.leaf(Tensor::scalar(1.0)).unwrap();
        let y = b.leaf(Tensor::scalar(1.0)).unwrap();
        let _ = b.leaf(Tensor::scalar(2.0)).unwrap();
        assert!(matches!(a.backward(y), Err(Error::NotOnTape(_))));
    }

    #[test]
    fn non_finite_result_is_reported() {
        let mut tape = Tape::<f64>::new();
        let x = tape.leaf(Tensor::vector(vec![-1.0])).unwrap();
        let err = tape.sqrt(x).unwrap_err();
        assert!(matches!(err, Error::NonFinite { op: "sqrt" }));
    }

    #[test]
    fn constants_receive_no_gradient_work() {
        let mut tape = Tape::<f64>::new();
        let c = tape.constant(Tensor::vector(vec![2.0, 3.0])).unwrap();
        let x = tape.leaf(Tensor::vector(vec![1.0, 1.0])).unwrap();
        let y = tape.mul(c, x).unwrap();
        let s = tape.sum(y).unwrap();
        let g = tape.backward(s).unwrap();
        assert_eq!(g.wrt(x).unwrap().data(), &[2.0, 3.0]);
        assert!(g.wrt(c).is_err());
    }
}
