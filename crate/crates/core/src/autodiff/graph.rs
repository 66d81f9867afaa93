//! Dynamic reverse-mode tape.
//!
//! Every primitive appends a node holding its value and the ids of its
//! inputs. Node ids are assigned in creation order, so walking the tape
//! backwards visits nodes in reverse topological order.

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Handle to a node on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    MatMul(Var, Var),
    Tanh(Var),
    Exp(Var),
    Square(Var),
    Sum(Var),
    Mean(Var),
    SumCols(Var),
    Scale(Var, f64),
    Concat(Vec<Var>),
    Clamp(Var, f64, f64),
    Minimum(Var, Var),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
    grad: Option<Vec<f64>>,
}

/// How the right operand of an elementwise op lines up with the left one.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Broadcast {
    Same,
    /// rhs is a row vector `[n]` repeated over the rows of a `[m, n]` lhs.
    Row,
}

#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
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

    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.push(value, Op::Leaf, requires_grad)
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Accumulated gradient of a leaf, if any backward pass reached it.
    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.nodes[v.0].grad.as_deref()
    }

    pub fn zero_grad(&mut self) {
        for n in &mut self.nodes {
            n.grad = None;
        }
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
            grad: None,
        });
        Var(self.nodes.len() - 1)
    }

    fn record(&mut self, name: &'static str, value: Tensor, op: Op, inputs: &[Var]) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite(name));
        }
        let rg = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        Ok(self.push(value, op, rg))
    }

    fn broadcast(&self, name: &'static str, a: Var, b: Var) -> Result<Broadcast> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa == sb {
            Ok(Broadcast::Same)
        } else if sa.len() == 2 && sb.len() == 1 && sa[1] == sb[0] {
            Ok(Broadcast::Row)
        } else {
            Err(Error::ShapeMismatch {
                op: name,
                lhs: sa.to_vec(),
                rhs: sb.to_vec(),
            })
        }
    }

    fn zip_with(&mut self, name: &'static str, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, op: Op) -> Result<Var> {
        let mode = self.broadcast(name, a, b)?;
        let (ta, tb) = (self.value(a), self.value(b));
        let data: Vec<f64> = match mode {
            Broadcast::Same => ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect(),
            Broadcast::Row => {
                let n = tb.len();
                ta.data()
                    .iter()
                    .enumerate()
                    .map(|(i, &x)| f(x, tb.data()[i % n]))
                    .collect()
            }
        };
        let value = Tensor::new(ta.shape().to_vec(), data)?;
        self.record(name, value, op, &[a, b])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.zip_with("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    /// Elementwise minimum; the gradient goes to the smaller operand (lhs on ties).
    pub fn minimum(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::ShapeMismatch {
                op: "minimum",
                lhs: self.shape(a).to_vec(),
                rhs: self.shape(b).to_vec(),
            });
        }
        self.zip_with("minimum", a, b, f64::min, Op::Minimum(a, b))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(Error::ShapeMismatch {
                op: "matmul",
                lhs: sa,
                rhs: sb,
            });
        }
        let (m, k, n) = (sa[0], sa[1], sb[1]);
        let mut out = vec![0.0; m * n];
        matmul_into(self.value(a).data(), self.value(b).data(), &mut out, m, k, n);
        let value = Tensor::new(vec![m, n], out)?;
        self.record("matmul", value, Op::MatMul(a, b), &[a, b])
    }

    fn map(&mut self, name: &'static str, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Result<Var> {
        let t = self.value(a);
        let value = Tensor::new(t.shape().to_vec(), t.data().iter().map(|&x| f(x)).collect())?;
        self.record(name, value, op, &[a])
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.map("tanh", a, f64::tanh, Op::Tanh(a))
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        self.map("exp", a, f64::exp, Op::Exp(a))
    }

    pub fn square(&mut self, a: Var) -> Result<Var> {
        self.map("square", a, |x| x * x, Op::Square(a))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        self.map("scale", a, |x| c * x, Op::Scale(a, c))
    }

    /// Clamps into `[lo, hi]`; zero gradient where the clamp is active.
    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Result<Var> {
        if lo > hi {
            return Err(Error::InvalidArgument(format!("clamp bounds {lo} > {hi}")));
        }
        self.map("clamp", a, |x| x.clamp(lo, hi), Op::Clamp(a, lo, hi))
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let s = self.value(a).data().iter().sum();
        self.record("sum", Tensor::scalar(s), Op::Sum(a), &[a])
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        let s = t.data().iter().sum::<f64>() / t.len() as f64;
        self.record("mean", Tensor::scalar(s), Op::Mean(a), &[a])
    }

    /// Row sums of a `[m, n]` matrix, giving `[m]`.
    pub fn sum_cols(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        if t.shape().len() != 2 {
            return Err(Error::ShapeMismatch {
                op: "sum_cols",
                lhs: t.shape().to_vec(),
                rhs: vec![],
            });
        }
        let (m, n) = (t.shape()[0], t.shape()[1]);
        let data = (0..m).map(|i| t.data()[i * n..(i + 1) * n].iter().sum()).collect();
        let value = Tensor::new(vec![m], data)?;
        self.record("sum_cols", value, Op::SumCols(a), &[a])
    }

    /// Concatenates along the last axis. Inputs must agree on all other axes.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidArgument("concat of zero tensors".into()))?;
        let s0 = self.shape(*first).to_vec();
        let rows = if s0.len() == 2 { s0[0] } else { 1 };
        let mut widths = Vec::with_capacity(parts.len());
        for p in parts {
            let s = self.shape(*p);
            let ok = s.len() == s0.len() && (s.len() == 1 || s[0] == rows);
            if !ok || s.len() > 2 {
                return Err(Error::ShapeMismatch {
                    op: "concat",
                    lhs: s0,
                    rhs: s.to_vec(),
                });
            }
            widths.push(*s.last().unwrap());
        }
        let total: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for (p, &w) in parts.iter().zip(&widths) {
                data.extend_from_slice(&self.value(*p).data()[r * w..(r + 1) * w]);
            }
        }
        let shape = if s0.len() == 2 { vec![rows, total] } else { vec![total] };
        let value = Tensor::new(shape, data)?;
        self.record("concat", value, Op::Concat(parts.to_vec()), parts)
    }

    /// Reverse pass from a scalar root. Leaf gradients accumulate across calls
    /// until [`Graph::zero_grad`].
    pub fn backward(&mut self, root: Var) -> Result<()> {
        let root_shape = self.shape(root);
        if root_shape.iter().product::<usize>() != 1 {
            return Err(Error::NonScalarRoot(root_shape.to_vec()));
        }
        if !self.nodes[root.0].requires_grad {
            return Ok(());
        }
        let mut adj: Vec<Option<Vec<f64>>> = vec![None; root.0 + 1];
        adj[root.0] = Some(vec![1.0]);

        for id in (0..=root.0).rev() {
            let Some(g) = adj[id].take() else { continue };
            let node = &self.nodes[id];
            if !node.requires_grad {
                continue;
            }
            match node.op.clone() {
                Op::Leaf => {
                    let slot = &mut self.nodes[id].grad;
                    match slot {
                        Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b),
                        None => *slot = Some(g),
                    }
                }
                Op::Add(a, b) => {
                    self.accumulate(&mut adj, a, &g);
                    let gb = self.reduce_broadcast(a, b, g);
                    self.accumulate(&mut adj, b, &gb);
                }
                Op::Sub(a, b) => {
                    self.accumulate(&mut adj, a, &g);
                    let neg: Vec<f64> = g.iter().map(|x| -x).collect();
                    let gb = self.reduce_broadcast(a, b, neg);
                    self.accumulate(&mut adj, b, &gb);
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (self.value(a).data(), self.value(b).data());
                    let nb = vb.len();
                    let ga: Vec<f64> = g.iter().enumerate().map(|(i, x)| x * vb[i % nb]).collect();
                    let gb_full: Vec<f64> = g.iter().zip(va).map(|(x, y)| x * y).collect();
                    self.accumulate(&mut adj, a, &ga);
                    let gb = self.reduce_broadcast(a, b, gb_full);
                    self.accumulate(&mut adj, b, &gb);
                }
                Op::Minimum(a, b) => {
                    let (va, vb) = (self.value(a).data(), self.value(b).data());
                    let mut ga = vec![0.0; g.len()];
                    let mut gb = vec![0.0; g.len()];
                    for i in 0..g.len() {
                        if va[i] <= vb[i] {
                            ga[i] = g[i];
                        } else {
                            gb[i] = g[i];
                        }
                    }
                    self.accumulate(&mut adj, a, &ga);
                    self.accumulate(&mut adj, b, &gb);
                }
                Op::MatMul(a, b) => {
                    let (sa, sb) = (self.shape(a), self.shape(b));
                    let (m, k, n) = (sa[0], sa[1], sb[1]);
                    let (va, vb) = (self.value(a).data(), self.value(b).data());
                    // dA = G · Bᵀ, dB = Aᵀ · G
                    let mut ga = vec![0.0; m * k];
                    for i in 0..m {
                        let grow = &g[i * n..(i + 1) * n];
                        for p in 0..k {
                            let brow = &vb[p * n..(p + 1) * n];
                            ga[i * k + p] = grow.iter().zip(brow).map(|(x, y)| x * y).sum();
                        }
                    }
                    let mut gb = vec![0.0; k * n];
                    for i in 0..m {
                        let grow = &g[i * n..(i + 1) * n];
                        for p in 0..k {
                            let aip = va[i * k + p];
                            if aip == 0.0 {
                                continue;
                            }
                            let dst = &mut gb[p * n..(p + 1) * n];
                            dst.iter_mut().zip(grow).for_each(|(d, x)| *d += aip * x);
                        }
                    }
                    self.accumulate(&mut adj, a, &ga);
                    self.accumulate(&mut adj, b, &gb);
                }
                Op::Tanh(a) => {
                    let y = node.value.data();
                    let ga: Vec<f64> = g.iter().zip(y).map(|(x, y)| x * (1.0 - y * y)).collect();
                    self.accumulate(&mut adj, a, &ga);
                }
                Op::Exp(a) => {
                    let y = node.value.data();
                    let ga: Vec<f64> = g.iter().zip(y).map(|(x, y)| x * y).collect();
                    self.accumulate(&mut adj, a, &ga);
                }
                Op::Square(a) => {
                    let x = self.value(a).data();
                    let ga: Vec<f64> = g.iter().zip(x).map(|(g, x)| 2.0 * x * g).collect();
                    self.accumulate(&mut adj, a, &ga);
                }
                Op::Scale(a, c) => {
                    let ga: Vec<f64> = g.iter().map(|x| c * x).collect();
                    self.accumulate(&mut adj, a, &ga);
                }
                Op::Clamp(a, lo, hi) => {
                    let x = self.value(a).data();
                    let ga: Vec<f64> = g
                        .iter()
                        .zip(x)
                        .map(|(g, &x)| if x < lo || x > hi { 0.0 } else { *g })
                        .collect();
                    self.accumulate(&mut adj, a, &ga);
                }
                Op::Sum(a) => {
                    let n = self.value(a).len();
                    self.accumulate(&mut adj, a, &vec![g[0]; n]);
                }
                Op::Mean(a) => {
                    let n = self.value(a).len();
                    self.accumulate(&mut adj, a, &vec![g[0] / n as f64; n]);
                }
                Op::SumCols(a) => {
                    let n = self.shape(a)[1];
                    let ga: Vec<f64> = g.iter().flat_map(|&x| std::iter::repeat_n(x, n)).collect();
                    self.accumulate(&mut adj, a, &ga);
                }
                Op::Concat(parts) => {
                    let total = *node.value.shape().last().unwrap();
                    let rows = node.value.len() / total;
                    let mut offset = 0;
                    for p in parts {
                        let w = *self.shape(p).last().unwrap();
                        let mut gp = Vec::with_capacity(rows * w);
                        for r in 0..rows {
                            gp.extend_from_slice(&g[r * total + offset..r * total + offset + w]);
                        }
                        self.accumulate(&mut adj, p, &gp);
                        offset += w;
                    }
                }
            }
        }
        Ok(())
    }

    fn accumulate(&self, adj: &mut [Option<Vec<f64>>], v: Var, g: &[f64]) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        match &mut adj[v.0] {
            Some(acc) => acc.iter_mut().zip(g).for_each(|(a, b)| *a += b),
            slot @ None => *slot = Some(g.to_vec()),
        }
    }

    /// Folds a full-size gradient back onto a row-broadcast rhs.
    fn reduce_broadcast(&self, a: Var, b: Var, g: Vec<f64>) -> Vec<f64> {
        if self.shape(a) == self.shape(b) {
            return g;
        }
        let n = self.value(b).len();
        let mut out = vec![0.0; n];
        for (i, x) in g.iter().enumerate() {
            out[i % n] += x;
        }
        out
    }
}

/// `out[m×n] = a[m×k] · b[k×n]`, all row-major.
pub(crate) fn matmul_into(a: &[f64], b: &[f64], out: &mut [f64], m: usize, k: usize, n: usize) {
    out.iter_mut().for_each(|x| *x = 0.0);
    for i in 0..m {
        let orow = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            orow.iter_mut().zip(brow).for_each(|(o, x)| *o += aip * x);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vec1(g: &mut Graph, v: &[f64], rg: bool) -> Var {
        g.leaf(Tensor::vector(v.to_vec()), rg)
    }

    #[test]
    fn add_elementwise() {
        let mut g = Graph::new();
        let a = vec1(&mut g, &[1.0, 2.0], false);
        let b = vec1(&mut g, &[3.0, 4.0], false);
        let c = g.add(a, b).unwrap();
        assert_eq!(g.value(c).data(), &[4.0, 6.0]);
    }

    #[test]
    fn tanh_of_zero() {
        let mut g = Graph::new();
        let a = vec1(&mut g, &[0.0], false);
        let c = g.tanh(a).unwrap();
        assert_eq!(g.value(c).data(), &[0.0]);
    }

    #[test]
    fn matmul_ones_gives_row_sums() {
        let mut g = Graph::new();
        let a = g.leaf(Tensor::full(vec![2, 3], 1.0), false);
        let b = g.leaf(Tensor::full(vec![3, 1], 1.0), false);
        let c = g.matmul(a, b).unwrap();
        assert_eq!(g.shape(c), &[2, 1]);
        assert_eq!(g.value(c).data(), &[3.0, 3.0]);
    }

    #[test]
    fn shape_mismatch_names_op() {
        let mut g = Graph::new();
        let a = g.leaf(Tensor::full(vec![2, 3], 1.0), false);
        let b = g.leaf(Tensor::full(vec![2, 3], 1.0), false);
        let err = g.matmul(a, b).unwrap_err().to_string();
        assert!(err.contains("matmul") && err.contains("[2, 3]"), "{err}");
        let c = vec1(&mut g, &[1.0, 2.0], false);
        assert!(matches!(g.add(a, c), Err(Error::ShapeMismatch { op: "add", .. })));
    }

    #[test]
    fn grad_of_sum_of_squares() {
        let mut g = Graph::new();
        let x = vec1(&mut g, &[1.0, 2.0], true);
        let sq = g.square(x).unwrap();
        let s = g.sum(sq).unwrap();
        g.backward(s).unwrap();
        assert_eq!(g.grad(x).unwrap(), &[2.0, 4.0]);
    }

    #[test]
    fn grad_of_mean() {
        let mut g = Graph::new();
        let x = vec1(&mut g, &[1.0, -2.0, 3.0, 0.5], true);
        let m = g.mean(x).unwrap();
        g.backward(m).unwrap();
        assert_eq!(g.grad(x).unwrap(), &[0.25; 4]);
    }

    #[test]
    fn backward_accumulates_until_reset() {
        let mut g = Graph::new();
        let x = vec1(&mut g, &[1.0, 2.0], true);
        let s = g.sum(x).unwrap();
        g.backward(s).unwrap();
        g.backward(s).unwrap();
        assert_eq!(g.grad(x).unwrap(), &[2.0, 2.0]);
        g.zero_grad();
        assert!(g.grad(x).is_none());
    }

    #[test]
    fn non_scalar_root_rejected() {
        let mut g = Graph::new();
        let x = vec1(&mut g, &[1.0, 2.0], true);
        assert!(matches!(g.backward(x), Err(Error::NonScalarRoot(_))));
    }

    #[test]
    fn non_finite_is_an_error() {
        let mut g = Graph::new();
        let x = vec1(&mut g, &[800.0], false);
        assert!(matches!(g.exp(x), Err(Error::NonFinite("exp"))));
    }

    #[test]
    fn row_broadcast_add_reduces_gradient() {
        let mut g = Graph::new();
        let m = g.leaf(Tensor::new(vec![3, 2], vec![1.0; 6]).unwrap(), false);
        let b = vec1(&mut g, &[0.5, -0.5], true);
        let y = g.add(m, b).unwrap();
        let s = g.sum(y).unwrap();
        g.backward(s).unwrap();
        assert_eq!(g.grad(b).unwrap(), &[3.0, 3.0]);
    }

    #[test]
    fn concat_routes_gradient_slices() {
        let mut g = Graph::new();
        let a = g.leaf(Tensor::new(vec![2, 1], vec![1.0, 2.0]).unwrap(), true);
        let b = g.leaf(Tensor::new(vec![2, 2], vec![3.0, 4.0, 5.0, 6.0]).unwrap(), true);
        let c = g.concat(&[a, b]).unwrap();
        assert_eq!(g.value(c).data(), &[1.0, 3.0, 4.0, 2.0, 5.0, 6.0]);
        let w = g.constant(Tensor::new(vec![2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap());
        let p = g.mul(c, w).unwrap();
        let s = g.sum(p).unwrap();
        g.backward(s).unwrap();
        assert_eq!(g.grad(a).unwrap(), &[1.0, 4.0]);
        assert_eq!(g.grad(b).unwrap(), &[2.0, 3.0, 5.0, 6.0]);
    }

    #[test]
    fn clamp_and_minimum_gradients() {
        let mut g = Graph::new();
        let x = vec1(&mut g, &[-2.0, 0.5, 2.0], true);
        let c = g.clamp(x, -1.0, 1.0).unwrap();
        let y = vec1(&mut g, &[0.0, 1.0, 0.0], false);
        let m = g.minimum(c, y).unwrap();
        assert_eq!(g.value(m).data(), &[-1.0, 0.5, 0.0]);
        let s = g.sum(m).unwrap();
        g.backward(s).unwrap();
        assert_eq!(g.grad(x).unwrap(), &[0.0, 1.0, 0.0]);
    }
}
