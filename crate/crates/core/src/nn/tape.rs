//! Reverse-mode automatic differentiation over matrices.
//!
//! A [`Tape`] records every operation applied to its [`Var`]s. Calling
//! [`Tape::backward`] on a scalar node sweeps the record in reverse and
//! returns the gradient of that scalar with respect to every node.

use std::cell::RefCell;
use std::sync::Arc;

use crate::error::{Error, Result};

use super::matrix::{dot, Matrix};

/// Per-node neighborhoods in compressed-row form. Edge `k` in row `i`
/// connects `i` to `targets[k]`; every row includes `i` itself.
#[derive(Debug, Clone, PartialEq)]
pub struct Neighborhoods {
    offsets: Vec<usize>,
    targets: Vec<usize>,
}

impl Neighborhoods {
    /// Builds neighborhoods from neighbor lists, adding a self-loop to every
    /// node that lacks one.
    pub fn from_lists(lists: &[Vec<usize>]) -> Result<Self> {
        let n = lists.len();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut targets = Vec::new();
        offsets.push(0);
        for (i, list) in lists.iter().enumerate() {
            let start = targets.len();
            targets.push(i);
            for &j in list {
                if j >= n {
                    return Err(Error::Dimension(format!(
                        "neighbor {j} out of range for {n} nodes"
                    )));
                }
                if !targets[start..].contains(&j) {
                    targets.push(j);
                }
            }
            offsets.push(targets.len());
        }
        Ok(Self { offsets, targets })
    }

    /// From a dense boolean adjacency (self-loops added).
    pub fn from_dense(adj: &[Vec<bool>]) -> Result<Self> {
        let lists: Vec<Vec<usize>> = adj
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|(_, &b)| b)
                    .map(|(j, _)| j)
                    .collect()
            })
            .collect();
        Self::from_lists(&lists)
    }

    pub fn node_count(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn edge_count(&self) -> usize {
        self.targets.len()
    }

    /// Edge index range of node `i`.
    pub fn range(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.targets[self.range(i)]
    }

    pub fn target(&self, k: usize) -> usize {
        self.targets[k]
    }

    /// Same neighborhoods with nodes relabeled by `perm[old] = new`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.node_count();
        let mut lists = vec![Vec::new(); n];
        for i in 0..n {
            lists[perm[i]] = self.neighbors(i).iter().map(|&j| perm[j]).collect();
        }
        Self::from_lists(&lists).expect("permutation keeps indices in range")
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(usize, usize),
    MatMulT(usize, usize),
    Add(usize, usize),
    Sub(usize, usize),
    AddRow(usize, usize),
    Scale(usize, f64),
    Square(usize),
    LeakyRelu(usize, f64),
    Elu(usize),
    RowSoftmax(usize),
    ConcatCols(usize, usize),
    MeanRows(usize),
    Sum(usize),
    SelectRow(usize, usize),
    SliceRows(usize, usize),
    EdgeScores(usize, usize, Arc<Neighborhoods>),
    SegmentSoftmax(usize, Arc<Neighborhoods>),
    EdgeAggregate(usize, usize, Arc<Neighborhoods>),
}

struct Node {
    value: Matrix,
    op: Op,
}

/// Operation record for one forward pass.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    idx: usize,
}

/// Gradients of a scalar root with respect to every node of a tape.
pub struct Gradients {
    grads: Vec<Option<Matrix>>,
    shapes: Vec<(usize, usize)>,
}

impl Gradients {
    /// Gradient for `var`; zero when the root does not depend on it.
    pub fn get(&self, var: Var<'_>) -> Matrix {
        self.grads[var.idx].clone().unwrap_or_else(|| {
            let (r, c) = self.shapes[var.idx];
            Matrix::zeros(r, c)
        })
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn leaf(&self, value: Matrix) -> Var<'_> {
        self.push(value, Op::Leaf)
    }

    fn push(&self, value: Matrix, op: Op) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { value, op });
        Var {
            tape: self,
            idx: nodes.len() - 1,
        }
    }

    fn value_of(&self, idx: usize) -> std::cell::Ref<'_, Matrix> {
        std::cell::Ref::map(self.nodes.borrow(), |n| &n[idx].value)
    }

    /// Reverse sweep from a 1x1 root.
    pub fn backward(&self, root: Var<'_>) -> Result<Gradients> {
        let nodes = self.nodes.borrow();
        let shapes: Vec<_> = nodes.iter().map(|n| n.value.shape()).collect();
        if shapes[root.idx] != (1, 1) {
            return Err(Error::Contract(format!(
                "backward needs a scalar root, got shape {:?}",
                shapes[root.idx]
            )));
        }
        let mut grads: Vec<Option<Matrix>> = vec![None; nodes.len()];
        grads[root.idx] = Some(Matrix::scalar(1.0));

        for idx in (0..=root.idx).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &nodes[idx];
            let val = |i: usize| &nodes[i].value;
            match &node.op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    accumulate(&mut grads, *a, g.matmul_t(val(*b))?);
                    accumulate(&mut grads, *b, val(*a).t_matmul(&g)?);
                }
                Op::MatMulT(a, b) => {
                    // y = a b^T: da = g b, db = g^T a
                    accumulate(&mut grads, *a, g.matmul(val(*b))?);
                    accumulate(&mut grads, *b, g.t_matmul(val(*a))?);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, g.clone());
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, g.map(|v| -v));
                }
                Op::AddRow(a, b) => {
                    let mut gb = Matrix::zeros(1, g.cols());
                    for r in 0..g.rows() {
                        for (o, v) in gb.data_mut().iter_mut().zip(g.row(r)) {
                            *o += v;
                        }
                    }
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, gb);
                }
                Op::Scale(a, s) => accumulate(&mut grads, *a, g.map(|v| v * s)),
                Op::Square(a) => {
                    let x = val(*a);
                    accumulate(&mut grads, *a, zip_map(&g, x, |gv, xv| 2.0 * xv * gv));
                }
                Op::LeakyRelu(a, slope) => {
                    let x = val(*a);
                    accumulate(
                        &mut grads,
                        *a,
                        zip_map(&g, x, |gv, xv| if xv > 0.0 { gv } else { gv * slope }),
                    );
                }
                Op::Elu(a) => {
                    let x = val(*a);
                    accumulate(
                        &mut grads,
                        *a,
                        zip_map(&g, x, |gv, xv| if xv > 0.0 { gv } else { gv * xv.exp() }),
                    );
                }
                Op::RowSoftmax(a) => {
                    let y = &node.value;
                    let mut ga = Matrix::zeros(y.rows(), y.cols());
                    for r in 0..y.rows() {
                        let yr = y.row(r);
                        let gr = g.row(r);
                        let s = dot(yr, gr);
                        for (o, (yv, gv)) in ga.row_mut(r).iter_mut().zip(yr.iter().zip(gr)) {
                            *o = yv * (gv - s);
                        }
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::ConcatCols(a, b) => {
                    let ca = val(*a).cols();
                    let cb = val(*b).cols();
                    let mut ga = Matrix::zeros(g.rows(), ca);
                    let mut gb = Matrix::zeros(g.rows(), cb);
                    for r in 0..g.rows() {
                        ga.row_mut(r).copy_from_slice(&g.row(r)[..ca]);
                        gb.row_mut(r).copy_from_slice(&g.row(r)[ca..]);
                    }
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::MeanRows(a) => {
                    let x = val(*a);
                    let n = x.rows() as f64;
                    let mut ga = Matrix::zeros(x.rows(), x.cols());
                    for r in 0..x.rows() {
                        for (o, v) in ga.row_mut(r).iter_mut().zip(g.row(0)) {
                            *o = v / n;
                        }
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::Sum(a) => {
                    let x = val(*a);
                    let gv = g.item();
                    accumulate(&mut grads, *a, x.map(|_| gv));
                }
                Op::SelectRow(a, r) => {
                    let x = val(*a);
                    let mut ga = Matrix::zeros(x.rows(), x.cols());
                    ga.row_mut(*r).copy_from_slice(g.row(0));
                    accumulate(&mut grads, *a, ga);
                }
                Op::SliceRows(a, start) => {
                    let x = val(*a);
                    let mut ga = Matrix::zeros(x.rows(), x.cols());
                    for r in 0..g.rows() {
                        ga.row_mut(start + r).copy_from_slice(g.row(r));
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::EdgeScores(src, dst, nbh) => {
                    let n = nbh.node_count();
                    let mut gs = Matrix::zeros(n, 1);
                    let mut gd = Matrix::zeros(n, 1);
                    for i in 0..n {
                        for k in nbh.range(i) {
                            gs.data_mut()[i] += g.data()[k];
                            gd.data_mut()[nbh.target(k)] += g.data()[k];
                        }
                    }
                    accumulate(&mut grads, *src, gs);
                    accumulate(&mut grads, *dst, gd);
                }
                Op::SegmentSoftmax(a, nbh) => {
                    let y = node.value.data();
                    let mut ga = Matrix::zeros(y.len(), 1);
                    for i in 0..nbh.node_count() {
                        let range = nbh.range(i);
                        let s = dot(&y[range.clone()], &g.data()[range.clone()]);
                        for k in range {
                            ga.data_mut()[k] = y[k] * (g.data()[k] - s);
                        }
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::EdgeAggregate(alpha, h, nbh) => {
                    let al = val(*alpha).data();
                    let hv = val(*h);
                    let mut galpha = Matrix::zeros(al.len(), 1);
                    let mut gh = Matrix::zeros(hv.rows(), hv.cols());
                    for i in 0..nbh.node_count() {
                        let gi = g.row(i);
                        for k in nbh.range(i) {
                            let j = nbh.target(k);
                            galpha.data_mut()[k] = dot(gi, hv.row(j));
                            for (o, v) in gh.row_mut(j).iter_mut().zip(gi) {
                                *o += al[k] * v;
                            }
                        }
                    }
                    accumulate(&mut grads, *alpha, galpha);
                    accumulate(&mut grads, *h, gh);
                }
            }
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads, shapes })
    }
}

fn accumulate(grads: &mut [Option<Matrix>], idx: usize, g: Matrix) {
    match &mut grads[idx] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

fn zip_map(a: &Matrix, b: &Matrix, f: impl Fn(f64, f64) -> f64) -> Matrix {
    let data = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| f(x, y))
        .collect();
    Matrix::from_vec(a.rows(), a.cols(), data).expect("same shape")
}

fn same_shape(op: &str, a: &Matrix, b: &Matrix) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::Dimension(format!(
            "{op}: {:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

pub fn leaky_relu(v: f64, slope: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        slope * v
    }
}

pub fn elu(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        v.exp_m1()
    }
}

/// Numerically stable softmax of one row.
pub fn softmax_slice(row: &[f64], out: &mut [f64]) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &v) in out.iter_mut().zip(row) {
        *o = (v - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

impl<'t> Var<'t> {
    pub fn value(&self) -> Matrix {
        self.tape.value_of(self.idx).clone()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.tape.value_of(self.idx).shape()
    }

    /// Value of a 1x1 node.
    pub fn item(&self) -> f64 {
        self.tape.value_of(self.idx).item()
    }

    fn unary(self, op: Op, f: impl FnOnce(&Matrix) -> Matrix) -> Var<'t> {
        let v = f(&self.tape.value_of(self.idx));
        self.tape.push(v, op)
    }

    pub fn matmul(self, rhs: Var<'t>) -> Result<Var<'t>> {
        let v = self
            .tape
            .value_of(self.idx)
            .matmul(&self.tape.value_of(rhs.idx))?;
        Ok(self.tape.push(v, Op::MatMul(self.idx, rhs.idx)))
    }

    /// `self * rhs^T`.
    pub fn matmul_t(self, rhs: Var<'t>) -> Result<Var<'t>> {
        let v = self
            .tape
            .value_of(self.idx)
            .matmul_t(&self.tape.value_of(rhs.idx))?;
        Ok(self.tape.push(v, Op::MatMulT(self.idx, rhs.idx)))
    }

    pub fn add(self, rhs: Var<'t>) -> Result<Var<'t>> {
        let v = {
            let a = self.tape.value_of(self.idx);
            let b = self.tape.value_of(rhs.idx);
            same_shape("add", &a, &b)?;
            zip_map(&a, &b, |x, y| x + y)
        };
        Ok(self.tape.push(v, Op::Add(self.idx, rhs.idx)))
    }

    pub fn sub(self, rhs: Var<'t>) -> Result<Var<'t>> {
        let v = {
            let a = self.tape.value_of(self.idx);
            let b = self.tape.value_of(rhs.idx);
            same_shape("sub", &a, &b)?;
            zip_map(&a, &b, |x, y| x - y)
        };
        Ok(self.tape.push(v, Op::Sub(self.idx, rhs.idx)))
    }

    /// Adds a 1xC row to every row.
    pub fn add_row(self, row: Var<'t>) -> Result<Var<'t>> {
        let v = {
            let a = self.tape.value_of(self.idx);
            let b = self.tape.value_of(row.idx);
            if b.rows() != 1 || b.cols() != a.cols() {
                return Err(Error::Dimension(format!(
                    "add_row: {:?} + {:?}",
                    a.shape(),
                    b.shape()
                )));
            }
            let mut out = a.clone();
            for r in 0..out.rows() {
                for (o, v) in out.row_mut(r).iter_mut().zip(b.data()) {
                    *o += v;
                }
            }
            out
        };
        Ok(self.tape.push(v, Op::AddRow(self.idx, row.idx)))
    }

    pub fn scale(self, s: f64) -> Var<'t> {
        self.unary(Op::Scale(self.idx, s), |m| m.map(|v| v * s))
    }

    pub fn square(self) -> Var<'t> {
        self.unary(Op::Square(self.idx), |m| m.map(|v| v * v))
    }

    pub fn leaky_relu(self, slope: f64) -> Var<'t> {
        self.unary(Op::LeakyRelu(self.idx, slope), |m| {
            m.map(|v| leaky_relu(v, slope))
        })
    }

    pub fn elu(self) -> Var<'t> {
        self.unary(Op::Elu(self.idx), |m| m.map(elu))
    }

    pub fn row_softmax(self) -> Var<'t> {
        self.unary(Op::RowSoftmax(self.idx), |m| {
            let mut out = Matrix::zeros(m.rows(), m.cols());
            for r in 0..m.rows() {
                softmax_slice(m.row(r), out.row_mut(r));
            }
            out
        })
    }

    pub fn concat_cols(self, rhs: Var<'t>) -> Result<Var<'t>> {
        let v = {
            let a = self.tape.value_of(self.idx);
            let b = self.tape.value_of(rhs.idx);
            if a.rows() != b.rows() {
                return Err(Error::Dimension(format!(
                    "concat: {} rows vs {} rows",
                    a.rows(),
                    b.rows()
                )));
            }
            let mut out = Matrix::zeros(a.rows(), a.cols() + b.cols());
            for r in 0..a.rows() {
                out.row_mut(r)[..a.cols()].copy_from_slice(a.row(r));
                out.row_mut(r)[a.cols()..].copy_from_slice(b.row(r));
            }
            out
        };
        Ok(self.tape.push(v, Op::ConcatCols(self.idx, rhs.idx)))
    }

    pub fn mean_rows(self) -> Var<'t> {
        self.unary(Op::MeanRows(self.idx), |m| {
            let mut out = Matrix::zeros(1, m.cols());
            for r in 0..m.rows() {
                for (o, v) in out.data_mut().iter_mut().zip(m.row(r)) {
                    *o += v;
                }
            }
            let n = m.rows() as f64;
            out.map(|v| v / n)
        })
    }

    pub fn sum(self) -> Var<'t> {
        self.unary(Op::Sum(self.idx), |m| Matrix::scalar(m.data().iter().sum()))
    }

    pub fn select_row(self, r: usize) -> Result<Var<'t>> {
        let v = {
            let m = self.tape.value_of(self.idx);
            if r >= m.rows() {
                return Err(Error::Lookup(format!("row {r} of {} rows", m.rows())));
            }
            Matrix::from_vec(1, m.cols(), m.row(r).to_vec())?
        };
        Ok(self.tape.push(v, Op::SelectRow(self.idx, r)))
    }

    pub fn slice_rows(self, start: usize, len: usize) -> Result<Var<'t>> {
        let v = {
            let m = self.tape.value_of(self.idx);
            if start + len > m.rows() {
                return Err(Error::Dimension(format!(
                    "rows {start}..{} of {}",
                    start + len,
                    m.rows()
                )));
            }
            Matrix::from_vec(
                len,
                m.cols(),
                m.data()[start * m.cols()..(start + len) * m.cols()].to_vec(),
            )?
        };
        Ok(self.tape.push(v, Op::SliceRows(self.idx, start)))
    }

    /// `e_k = src[i] + dst[j]` for every edge `k = (i, j)`; `self` is `src`.
    pub fn edge_scores(self, dst: Var<'t>, nbh: &Arc<Neighborhoods>) -> Result<Var<'t>> {
        let v = {
            let s = self.tape.value_of(self.idx);
            let d = self.tape.value_of(dst.idx);
            let n = nbh.node_count();
            if s.shape() != (n, 1) || d.shape() != (n, 1) {
                return Err(Error::Dimension(format!(
                    "edge_scores over {n} nodes: {:?}, {:?}",
                    s.shape(),
                    d.shape()
                )));
            }
            let mut out = Matrix::zeros(nbh.edge_count(), 1);
            for i in 0..n {
                for k in nbh.range(i) {
                    out.data_mut()[k] = s.data()[i] + d.data()[nbh.target(k)];
                }
            }
            out
        };
        Ok(self
            .tape
            .push(v, Op::EdgeScores(self.idx, dst.idx, Arc::clone(nbh))))
    }

    /// Softmax of edge values within each node's neighborhood.
    pub fn segment_softmax(self, nbh: &Arc<Neighborhoods>) -> Result<Var<'t>> {
        let v = {
            let e = self.tape.value_of(self.idx);
            if e.shape() != (nbh.edge_count(), 1) {
                return Err(Error::Dimension(format!(
                    "segment_softmax over {} edges: {:?}",
                    nbh.edge_count(),
                    e.shape()
                )));
            }
            let mut out = Matrix::zeros(e.rows(), 1);
            for i in 0..nbh.node_count() {
                let r = nbh.range(i);
                softmax_slice(&e.data()[r.clone()], &mut out.data_mut()[r]);
            }
            out
        };
        Ok(self
            .tape
            .push(v, Op::SegmentSoftmax(self.idx, Arc::clone(nbh))))
    }

    /// `out_i = sum over edges k=(i,j) of alpha_k * h_j`; `self` is `alpha`.
    pub fn edge_aggregate(self, h: Var<'t>, nbh: &Arc<Neighborhoods>) -> Result<Var<'t>> {
        let v = {
            let al = self.tape.value_of(self.idx);
            let hv = self.tape.value_of(h.idx);
            if al.shape() != (nbh.edge_count(), 1) || hv.rows() != nbh.node_count() {
                return Err(Error::Dimension(format!(
                    "edge_aggregate: alpha {:?}, features {:?}, {} nodes",
                    al.shape(),
                    hv.shape(),
                    nbh.node_count()
                )));
            }
            let mut out = Matrix::zeros(hv.rows(), hv.cols());
            for i in 0..nbh.node_count() {
                for k in nbh.range(i) {
                    let a = al.data()[k];
                    let hj = hv.row(nbh.target(k));
                    for (o, v) in out.row_mut(i).iter_mut().zip(hj) {
                        *o += a * v;
                    }
                }
            }
            out
        };
        Ok(self
            .tape
            .push(v, Op::EdgeAggregate(self.idx, h.idx, Arc::clone(nbh))))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_gradient() {
        let tape = Tape::new();
        let x = tape.leaf(Matrix::scalar(3.0));
        let y = x.square();
        let g = tape.backward(y).unwrap();
        assert_eq!(y.item(), 9.0);
        assert_eq!(g.get(x).item(), 6.0);
    }

    #[test]
    fn sum_of_two() {
        let tape = Tape::new();
        let a = tape.leaf(Matrix::scalar(1.5));
        let b = tape.leaf(Matrix::scalar(-4.0));
        let y = a.add(b).unwrap();
        let g = tape.backward(y).unwrap();
        assert_eq!(g.get(a).item(), 1.0);
        assert_eq!(g.get(b).item(), 1.0);
    }

    #[test]
    fn reused_node_accumulates() {
        // y = x*x via matmul of 1x1s, plus x: dy/dx = 2x + 1
        let tape = Tape::new();
        let x = tape.leaf(Matrix::scalar(2.0));
        let y = x.matmul(x).unwrap().add(x).unwrap();
        let g = tape.backward(y).unwrap();
        assert_eq!(g.get(x).item(), 5.0);
    }

    #[test]
    fn non_scalar_root_rejected() {
        let tape = Tape::new();
        let x = tape.leaf(Matrix::zeros(2, 1));
        assert!(matches!(tape.backward(x), Err(Error::Contract(_))));
    }

    #[test]
    fn unused_leaf_gets_zero() {
        let tape = Tape::new();
        let x = tape.leaf(Matrix::scalar(2.0));
        let unused = tape.leaf(Matrix::zeros(2, 3));
        let g = tape.backward(x.square()).unwrap();
        assert_eq!(g.get(unused), Matrix::zeros(2, 3));
    }

    fn fd_check(build: impl Fn(&Tape, Matrix) -> Var<'_>, at: Matrix) {
        let tape = Tape::new();
        let y = build(&tape, at.clone());
        let x = Var {
            tape: &tape,
            idx: 0,
        };
        let g = tape.backward(y).unwrap().get(x);
        let eps = 1e-6;
        for i in 0..at.len() {
            let mut plus = at.clone();
            plus.data_mut()[i] += eps;
            let mut minus = at.clone();
            minus.data_mut()[i] -= eps;
            let tp = Tape::new();
            let fp = build(&tp, plus).item();
            let tm = Tape::new();
            let fm = build(&tm, minus).item();
            let fd = (fp - fm) / (2.0 * eps);
            assert!(
                (fd - g.data()[i]).abs() < 1e-6 * (1.0 + fd.abs()),
                "entry {i}: fd {fd} vs {}",
                g.data()[i]
            );
        }
    }

    fn sample(rows: usize, cols: usize) -> Matrix {
        let data = (0..rows * cols)
            .map(|i| ((i * 37 % 11) as f64 - 5.0) / 7.0)
            .collect();
        Matrix::from_vec(rows, cols, data).unwrap()
    }

    #[test]
    fn elementwise_ops_match_finite_differences() {
        fd_check(
            |t, m| t.leaf(m).elu().leaky_relu(0.2).square().sum(),
            sample(3, 4),
        );
        fd_check(|t, m| t.leaf(m).row_softmax().square().sum(), sample(3, 4));
        fd_check(|t, m| t.leaf(m).mean_rows().square().sum(), sample(3, 4));
    }

    #[test]
    fn structural_ops_match_finite_differences() {
        fd_check(
            |t, m| {
                let x = t.leaf(m);
                let w = t.leaf(sample(4, 2));
                let b = t.leaf(sample(1, 2));
                let y = x.matmul(w).unwrap().add_row(b).unwrap();
                let z = y
                    .concat_cols(x)
                    .unwrap()
                    .matmul_t(t.leaf(sample(1, 6)))
                    .unwrap();
                z.slice_rows(1, 2).unwrap().square().sum().scale(0.5)
            },
            sample(3, 4),
        );
        fd_check(
            |t, m| {
                let x = t.leaf(m);
                x.select_row(2)
                    .unwrap()
                    .sub(x.select_row(0).unwrap())
                    .unwrap()
                    .square()
                    .sum()
            },
            sample(3, 4),
        );
    }

    #[test]
    fn sparse_attention_ops_match_finite_differences() {
        let nbh = Arc::new(Neighborhoods::from_lists(&[vec![1, 2], vec![0], vec![0, 1]]).unwrap());
        fd_check(
            |t, m| {
                let h = t.leaf(m);
                let src = h.matmul(t.leaf(sample(2, 1))).unwrap();
                let dst = h.matmul(t.leaf(sample(2, 1).map(|v| -v))).unwrap();
                let e = src.edge_scores(dst, &nbh).unwrap().leaky_relu(0.2);
                let alpha = e.segment_softmax(&nbh).unwrap();
                alpha.edge_aggregate(h, &nbh).unwrap().elu().square().sum()
            },
            sample(3, 2),
        );
    }

    #[test]
    fn neighborhoods_add_self_loops() {
        let n = Neighborhoods::from_lists(&[vec![1], vec![0, 1], vec![]]).unwrap();
        assert_eq!(n.neighbors(0), &[0, 1]);
        assert_eq!(n.neighbors(1), &[1, 0]);
        assert_eq!(n.neighbors(2), &[2]);
        assert!(Neighborhoods::from_lists(&[vec![3]]).is_err());
    }
}
