//! Reverse-mode differentiation over matrix-valued nodes.
//!
//! Every operation evaluates eagerly and appends a node recording its
//! inputs; [`Tape::backward`] walks the nodes in reverse and pushes the
//! adjoints of parameter leaves into a [`ParamStore`].

use std::collections::HashMap;

use super::matrix::Matrix;
use super::params::{ParamId, ParamStore};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Constant,
    Param(ParamId),
    MatMul(Var, Var),
    Add(Var, Var),
    /// `a (n x c) + b (1 x c)` broadcast over rows.
    AddRow(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Tanh(Var),
    Relu(Var),
    Exp(Var),
    Square(Var),
    Clamp(Var, f64, f64),
    Minimum(Var, Var),
    SumCols(Var),
    SumAll(Var),
    MeanAll(Var),
    MeanRows(Var),
    /// `1 x c` (or `1 x 1`) repeated to the node's shape.
    Broadcast(Var),
    ConcatCols(Vec<Var>),
    StackRows(Vec<Var>),
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    value: Matrix,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: HashMap<ParamId, Var>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, op: Op, value: Matrix) -> Var {
        self.nodes.push(Node { op, value });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push(Op::Constant, value)
    }

    /// Leaf bound to a stored parameter. Repeated requests reuse one node.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> Var {
        if let Some(&v) = self.params.get(&id) {
            return v;
        }
        let v = self.push(Op::Param(id), store.value(id).clone());
        self.params.insert(id, v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).matmul(self.value(b));
        self.push(Op::MatMul(a, b), value)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).zip_map(self.value(b), |x, y| x + y);
        self.push(Op::Add(a, b), value)
    }

    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let (va, vr) = (self.value(a), self.value(row));
        assert!(vr.rows == 1 && vr.cols == va.cols, "row broadcast {:?} onto {:?}", vr.shape(), va.shape());
        let mut value = va.clone();
        for r in 0..value.rows {
            for (x, &b) in value.data[r * va.cols..(r + 1) * va.cols].iter_mut().zip(&vr.data) {
                *x += b;
            }
        }
        self.push(Op::AddRow(a, row), value)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).zip_map(self.value(b), |x, y| x - y);
        self.push(Op::Sub(a, b), value)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).zip_map(self.value(b), |x, y| x * y);
        self.push(Op::Mul(a, b), value)
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let value = self.value(a).map(|x| x * s);
        self.push(Op::Scale(a, s), value)
    }

    pub fn add_scalar(&mut self, a: Var, s: f64) -> Var {
        let value = self.value(a).map(|x| x + s);
        self.push(Op::AddScalar(a), value)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).map(f64::tanh);
        self.push(Op::Tanh(a), value)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| x.max(0.0));
        self.push(Op::Relu(a), value)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let value = self.value(a).map(f64::exp);
        self.push(Op::Exp(a), value)
    }

    pub fn square(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| x * x);
        self.push(Op::Square(a), value)
    }

    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        let value = self.value(a).map(|x| x.clamp(lo, hi));
        self.push(Op::Clamp(a, lo, hi), value)
    }

    pub fn minimum(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).zip_map(self.value(b), f64::min);
        self.push(Op::Minimum(a, b), value)
    }

    /// Row sums, `n x c -> n x 1`.
    pub fn sum_cols(&mut self, a: Var) -> Var {
        let va = self.value(a);
        let data = (0..va.rows).map(|r| va.row(r).iter().sum()).collect();
        let value = Matrix::column_vector(data);
        self.push(Op::SumCols(a), value)
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let value = Matrix::filled(1, 1, self.value(a).sum());
        self.push(Op::SumAll(a), value)
    }

    pub fn mean_all(&mut self, a: Var) -> Var {
        let va = self.value(a);
        let value = Matrix::filled(1, 1, va.sum() / va.len() as f64);
        self.push(Op::MeanAll(a), value)
    }

    /// Column means, `n x c -> 1 x c`.
    pub fn mean_rows(&mut self, a: Var) -> Var {
        let va = self.value(a);
        let mut data = vec![0.0; va.cols];
        for r in 0..va.rows {
            for (d, &x) in data.iter_mut().zip(va.row(r)) {
                *d += x;
            }
        }
        let n = va.rows as f64;
        data.iter_mut().for_each(|d| *d /= n);
        self.push(Op::MeanRows(a), Matrix::row_vector(data))
    }

    /// Repeats a `1 x c` row (or a `1 x 1` scalar) to `rows x cols`.
    pub fn broadcast(&mut self, a: Var, rows: usize, cols: usize) -> Var {
        let va = self.value(a);
        assert!(va.rows == 1 && (va.cols == cols || va.cols == 1), "cannot broadcast {:?} to {rows}x{cols}", va.shape());
        let mut value = Matrix::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                value.data[r * cols + c] = if va.cols == 1 { va.data[0] } else { va.data[c] };
            }
        }
        self.push(Op::Broadcast(a), value)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let rows = self.value(parts[0]).rows;
        let cols: usize = parts.iter().map(|&p| self.value(p).cols).sum();
        let mut value = Matrix::zeros(rows, cols);
        let mut offset = 0;
        for &p in parts {
            let vp = self.value(p);
            assert_eq!(vp.rows, rows);
            for r in 0..rows {
                value.data[r * cols + offset..r * cols + offset + vp.cols].copy_from_slice(vp.row(r));
            }
            offset += vp.cols;
        }
        self.push(Op::ConcatCols(parts.to_vec()), value)
    }

    pub fn stack_rows(&mut self, parts: &[Var]) -> Var {
        let cols = self.value(parts[0]).cols;
        let mut data = Vec::new();
        for &p in parts {
            let vp = self.value(p);
            assert_eq!(vp.cols, cols);
            data.extend_from_slice(&vp.data);
        }
        let rows = data.len() / cols;
        self.push(Op::StackRows(parts.to_vec()), Matrix::from_vec(rows, cols, data))
    }

    /// Back-propagates from the scalar `loss` and adds parameter gradients to
    /// `store`.
    pub fn backward(&self, loss: Var, store: &mut ParamStore) -> Result<()> {
        let grads = self.gradients(loss)?;
        for (i, node) in self.nodes.iter().enumerate() {
            if let (Op::Param(id), Some(g)) = (&node.op, &grads[i]) {
                store.accumulate_grad(*id, g);
            }
        }
        Ok(())
    }

    /// Adjoints of every node with respect to the scalar `loss`.
    fn gradients(&self, loss: Var) -> Result<Vec<Option<Matrix>>> {
        let lv = self.value(loss);
        if lv.len() != 1 {
            return Err(Error::shape(format!("loss must be a scalar, got {:?}", lv.shape())));
        }
        if !lv.is_finite() {
            return Err(Error::NonFinite(format!("loss value {}", lv.data[0])));
        }
        let mut grads: Vec<Option<Matrix>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Matrix::filled(1, 1, 1.0));

        fn acc(grads: &mut [Option<Matrix>], v: Var, g: Matrix) {
            match &mut grads[v.0] {
                Some(existing) => existing.add_assign(&g),
                slot @ None => *slot = Some(g),
            }
        }

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Constant => {}
                Op::Param(_) => {
                    grads[i] = Some(g);
                    continue;
                }
                Op::MatMul(a, b) => {
                    let ga = g.matmul_t(self.value(*b));
                    let gb = self.value(*a).t_matmul(&g);
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *b, g.clone());
                    acc(&mut grads, *a, g);
                }
                Op::AddRow(a, row) => {
                    let mut gr = vec![0.0; g.cols];
                    for r in 0..g.rows {
                        for (s, &x) in gr.iter_mut().zip(g.row(r)) {
                            *s += x;
                        }
                    }
                    acc(&mut grads, *row, Matrix::row_vector(gr));
                    acc(&mut grads, *a, g);
                }
                Op::Sub(a, b) => {
                    acc(&mut grads, *b, g.map(|x| -x));
                    acc(&mut grads, *a, g);
                }
                Op::Mul(a, b) => {
                    let ga = g.zip_map(self.value(*b), |x, y| x * y);
                    let gb = g.zip_map(self.value(*a), |x, y| x * y);
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::Scale(a, s) => acc(&mut grads, *a, g.map(|x| x * s)),
                Op::AddScalar(a) => acc(&mut grads, *a, g),
                Op::Tanh(a) => acc(&mut grads, *a, g.zip_map(&node.value, |x, t| x * (1.0 - t * t))),
                Op::Relu(a) => acc(
                    &mut grads,
                    *a,
                    g.zip_map(self.value(*a), |x, z| if z > 0.0 { x } else { 0.0 }),
                ),
                Op::Exp(a) => acc(&mut grads, *a, g.zip_map(&node.value, |x, e| x * e)),
                Op::Square(a) => acc(&mut grads, *a, g.zip_map(self.value(*a), |x, z| 2.0 * x * z)),
                Op::Clamp(a, lo, hi) => acc(
                    &mut grads,
                    *a,
                    g.zip_map(self.value(*a), |x, z| if z > *lo && z < *hi { x } else { 0.0 }),
                ),
                Op::Minimum(a, b) => {
                    let (va, vb) = (self.value(*a), self.value(*b));
                    let mut ga = g.clone();
                    let mut gb = g;
                    for j in 0..ga.data.len() {
                        if va.data[j] <= vb.data[j] {
                            gb.data[j] = 0.0;
                        } else {
                            ga.data[j] = 0.0;
                        }
                    }
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::SumCols(a) => {
                    let va = self.value(*a);
                    let mut ga = Matrix::zeros(va.rows, va.cols);
                    for r in 0..va.rows {
                        ga.data[r * va.cols..(r + 1) * va.cols].iter_mut().for_each(|x| *x = g.data[r]);
                    }
                    acc(&mut grads, *a, ga);
                }
                Op::SumAll(a) => {
                    let va = self.value(*a);
                    acc(&mut grads, *a, Matrix::filled(va.rows, va.cols, g.data[0]));
                }
                Op::MeanAll(a) => {
                    let va = self.value(*a);
                    acc(&mut grads, *a, Matrix::filled(va.rows, va.cols, g.data[0] / va.len() as f64));
                }
                Op::MeanRows(a) => {
                    let va = self.value(*a);
                    let n = va.rows as f64;
                    let mut ga = Matrix::zeros(va.rows, va.cols);
                    for r in 0..va.rows {
                        for (x, &y) in ga.data[r * va.cols..(r + 1) * va.cols].iter_mut().zip(&g.data) {
                            *x = y / n;
                        }
                    }
                    acc(&mut grads, *a, ga);
                }
                Op::Broadcast(a) => {
                    let va = self.value(*a);
                    let ga = if va.cols == 1 {
                        Matrix::filled(1, 1, g.sum())
                    } else {
                        let mut s = vec![0.0; g.cols];
                        for r in 0..g.rows {
                            for (x, &y) in s.iter_mut().zip(g.row(r)) {
                                *x += y;
                            }
                        }
                        Matrix::row_vector(s)
                    };
                    acc(&mut grads, *a, ga);
                }
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let cols = self.value(p).cols;
                        let mut gp = Matrix::zeros(g.rows, cols);
                        for r in 0..g.rows {
                            gp.data[r * cols..(r + 1) * cols]
                                .copy_from_slice(&g.data[r * g.cols + offset..r * g.cols + offset + cols]);
                        }
                        offset += cols;
                        acc(&mut grads, p, gp);
                    }
                }
                Op::StackRows(parts) => {
                    let mut row = 0;
                    for &p in parts {
                        let rows = self.value(p).rows;
                        let data = g.data[row * g.cols..(row + rows) * g.cols].to_vec();
                        row += rows;
                        acc(&mut grads, p, Matrix::from_vec(rows, g.cols, data));
                    }
                }
            }
        }
        for g in grads.iter().flatten() {
            if !g.is_finite() {
                return Err(Error::NonFinite("gradient".into()));
            }
        }
        Ok(grads)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_gradient() {
        let mut store = ParamStore::new();
        let w = store.add("w", Matrix::filled(1, 1, 3.0));
        let mut tape = Tape::new();
        let wv = tape.param(&store, w);
        let loss = tape.square(wv);
        let loss = tape.sum_all(loss);
        tape.backward(loss, &mut store).unwrap();
        assert_eq!(store.block(w).grad().data, vec![6.0]);
    }

    #[test]
    fn zero_loss_gives_zero_gradients() {
        let mut store = ParamStore::new();
        let w = store.add("w", Matrix::from_vec(2, 2, vec![1.0, -2.0, 0.5, 3.0]));
        let mut tape = Tape::new();
        let wv = tape.param(&store, w);
        let loss = tape.scale(wv, 0.0);
        let loss = tape.sum_all(loss);
        assert_eq!(tape.value(loss).scalar(), 0.0);
        tape.backward(loss, &mut store).unwrap();
        assert!(store.block(w).grad().data.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn non_finite_loss_is_rejected() {
        let mut store = ParamStore::new();
        let w = store.add("w", Matrix::filled(1, 1, 1000.0));
        let mut tape = Tape::new();
        let wv = tape.param(&store, w);
        let e = tape.exp(wv);
        let loss = tape.sum_all(e);
        assert!(matches!(tape.backward(loss, &mut store), Err(Error::NonFinite(_))));
    }

    #[test]
    fn shared_parameter_accumulates() {
        let mut store = ParamStore::new();
        let w = store.add("w", Matrix::filled(1, 1, 2.0));
        let mut tape = Tape::new();
        let a = tape.param(&store, w);
        let b = tape.param(&store, w);
        assert_eq!(a, b);
        let prod = tape.mul(a, b);
        let loss = tape.add(prod, a);
        tape.backward(loss, &mut store).unwrap();
        // d/dw (w^2 + w) = 2w + 1
        assert_eq!(store.block(w).grad().data, vec![5.0]);
    }
}
