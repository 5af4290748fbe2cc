//! Reverse-mode automatic differentiation over a flat operation tape.
//!
//! Networks here are rebuilt per input graph (node counts vary), so the tape
//! is cheap, append-only and discarded after each forward/backward pair.
//! Values are matrices; scalars are 1x1. Shape violations are programming
//! errors and panic.

use super::mat::Mat;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VarId(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(VarId, VarId),
    Add(VarId, VarId),
    Sub(VarId, VarId),
    Mul(VarId, VarId),
    Scale(VarId, f64),
    LeakyRelu(VarId, f64),
    SoftmaxRow(VarId),
    ConcatCols(Vec<VarId>),
    ConcatRows(Vec<VarId>),
    Transpose(VarId),
    MeanCols(VarId),
    Log1pExp(VarId),
    SumAll(VarId),
}

struct Node {
    value: Mat,
    op: Op,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    fn push(&mut self, value: Mat, op: Op) -> VarId {
        self.nodes.push(Node { value, op });
        VarId(self.nodes.len() - 1)
    }

    pub fn value(&self, id: VarId) -> &Mat {
        &self.nodes[id.0].value
    }

    pub fn scalar(&self, id: VarId) -> f64 {
        self.value(id).as_scalar()
    }

    /// Insert an input or parameter value.
    pub fn leaf(&mut self, m: Mat) -> VarId {
        self.push(m, Op::Leaf)
    }

    pub fn matmul(&mut self, a: VarId, b: VarId) -> VarId {
        let v = self.value(a).matmul(self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    pub fn add(&mut self, a: VarId, b: VarId) -> VarId {
        let v = self.value(a).add(self.value(b));
        self.push(v, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: VarId, b: VarId) -> VarId {
        let v = self.value(a).sub(self.value(b));
        self.push(v, Op::Sub(a, b))
    }

    /// Elementwise product of same-shape matrices.
    pub fn mul(&mut self, a: VarId, b: VarId) -> VarId {
        let (ma, mb) = (self.value(a), self.value(b));
        assert_eq!((ma.rows(), ma.cols()), (mb.rows(), mb.cols()));
        let data = ma
            .data()
            .iter()
            .zip(mb.data())
            .map(|(x, y)| x * y)
            .collect();
        let v = Mat::from_vec(ma.rows(), ma.cols(), data);
        self.push(v, Op::Mul(a, b))
    }

    pub fn scale(&mut self, a: VarId, factor: f64) -> VarId {
        let v = self.value(a).scale(factor);
        self.push(v, Op::Scale(a, factor))
    }

    pub fn leaky_relu(&mut self, a: VarId, slope: f64) -> VarId {
        let ma = self.value(a);
        let data = ma
            .data()
            .iter()
            .map(|&x| if x > 0.0 { x } else { slope * x })
            .collect();
        let v = Mat::from_vec(ma.rows(), ma.cols(), data);
        self.push(v, Op::LeakyRelu(a, slope))
    }

    /// Numerically stable softmax along a 1xN row.
    pub fn softmax_row(&mut self, a: VarId) -> VarId {
        let ma = self.value(a);
        assert_eq!(ma.rows(), 1, "softmax_row expects a row vector");
        let max = ma.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = ma.data().iter().map(|&x| (x - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        let v = Mat::from_vec(1, ma.cols(), exps.into_iter().map(|e| e / sum).collect());
        self.push(v, Op::SoftmaxRow(a))
    }

    /// Horizontal concatenation of equal-height matrices.
    pub fn concat_cols(&mut self, parts: &[VarId]) -> VarId {
        assert!(!parts.is_empty());
        let rows = self.value(parts[0]).rows();
        let total: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut out = Mat::zeros(rows, total);
        let mut offset = 0;
        for &p in parts {
            let m = self.value(p);
            assert_eq!(m.rows(), rows);
            for r in 0..rows {
                for c in 0..m.cols() {
                    out.set(r, offset + c, m.at(r, c));
                }
            }
            offset += m.cols();
        }
        self.push(out, Op::ConcatCols(parts.to_vec()))
    }

    /// Vertical concatenation of equal-width matrices.
    pub fn concat_rows(&mut self, parts: &[VarId]) -> VarId {
        assert!(!parts.is_empty());
        let cols = self.value(parts[0]).cols();
        let total: usize = parts.iter().map(|&p| self.value(p).rows()).sum();
        let mut out = Mat::zeros(total, cols);
        let mut offset = 0;
        for &p in parts {
            let m = self.value(p);
            assert_eq!(m.cols(), cols);
            for r in 0..m.rows() {
                for c in 0..cols {
                    out.set(offset + r, c, m.at(r, c));
                }
            }
            offset += m.rows();
        }
        self.push(out, Op::ConcatRows(parts.to_vec()))
    }

    pub fn transpose(&mut self, a: VarId) -> VarId {
        let v = self.value(a).transpose();
        self.push(v, Op::Transpose(a))
    }

    /// Mean over columns: RxC -> Rx1.
    pub fn mean_cols(&mut self, a: VarId) -> VarId {
        let ma = self.value(a);
        let mut out = Mat::zeros(ma.rows(), 1);
        for r in 0..ma.rows() {
            let mut acc = 0.0;
            for c in 0..ma.cols() {
                acc += ma.at(r, c);
            }
            out.set(r, 0, acc / ma.cols() as f64);
        }
        self.push(out, Op::MeanCols(a))
    }

    /// Elementwise `ln(1 + exp(x))`, stable for large positive inputs.
    pub fn log1p_exp(&mut self, a: VarId) -> VarId {
        let ma = self.value(a);
        let data = ma.data().iter().map(|&x| log1p_exp(x)).collect();
        let v = Mat::from_vec(ma.rows(), ma.cols(), data);
        self.push(v, Op::Log1pExp(a))
    }

    /// Sum of all entries as a 1x1 matrix.
    pub fn sum_all(&mut self, a: VarId) -> VarId {
        let v = Mat::scalar(self.value(a).data().iter().sum());
        self.push(v, Op::SumAll(a))
    }

    /// Gradient of a scalar output with respect to every tape value.
    pub fn backward(&self, output: VarId) -> Gradients {
        assert_eq!(
            (self.value(output).rows(), self.value(output).cols()),
            (1, 1),
            "backward needs a scalar output"
        );
        let mut grads: Vec<Mat> = self
            .nodes
            .iter()
            .map(|n| Mat::zeros(n.value.rows(), n.value.cols()))
            .collect();
        grads[output.0] = Mat::scalar(1.0);

        for idx in (0..=output.0).rev() {
            let grad = grads[idx].clone();
            if grad.max_abs() == 0.0 {
                continue;
            }
            match &self.nodes[idx].op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let da = grad.matmul(&self.value(*b).transpose());
                    let db = self.value(*a).transpose().matmul(&grad);
                    grads[a.0].add_assign(&da);
                    grads[b.0].add_assign(&db);
                }
                Op::Add(a, b) => {
                    grads[a.0].add_assign(&grad);
                    grads[b.0].add_assign(&grad);
                }
                Op::Sub(a, b) => {
                    grads[a.0].add_assign(&grad);
                    grads[b.0].add_assign(&grad.scale(-1.0));
                }
                Op::Mul(a, b) => {
                    let va = self.value(*a).clone();
                    let vb = self.value(*b).clone();
                    let mut da = grad.clone();
                    for (g, y) in da.data_mut().iter_mut().zip(vb.data()) {
                        *g *= *y;
                    }
                    let mut db = grad.clone();
                    for (g, x) in db.data_mut().iter_mut().zip(va.data()) {
                        *g *= *x;
                    }
                    grads[a.0].add_assign(&da);
                    grads[b.0].add_assign(&db);
                }
                Op::Scale(a, f) => {
                    grads[a.0].add_assign(&grad.scale(*f));
                }
                Op::LeakyRelu(a, slope) => {
                    let mut da = grad.clone();
                    for (g, x) in da.data_mut().iter_mut().zip(self.value(*a).data()) {
                        if *x <= 0.0 {
                            *g *= slope;
                        }
                    }
                    grads[a.0].add_assign(&da);
                }
                Op::SoftmaxRow(a) => {
                    let y = &self.nodes[idx].value;
                    let dot: f64 = grad
                        .data()
                        .iter()
                        .zip(y.data())
                        .map(|(g, v)| g * v)
                        .sum();
                    let mut da = Mat::zeros(1, y.cols());
                    for c in 0..y.cols() {
                        da.set(0, c, y.at(0, c) * (grad.at(0, c) - dot));
                    }
                    grads[a.0].add_assign(&da);
                }
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let (rows, cols) = (self.value(p).rows(), self.value(p).cols());
                        let mut dp = Mat::zeros(rows, cols);
                        for r in 0..rows {
                            for c in 0..cols {
                                dp.set(r, c, grad.at(r, offset + c));
                            }
                        }
                        grads[p.0].add_assign(&dp);
                        offset += cols;
                    }
                }
                Op::ConcatRows(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let (rows, cols) = (self.value(p).rows(), self.value(p).cols());
                        let mut dp = Mat::zeros(rows, cols);
                        for r in 0..rows {
                            for c in 0..cols {
                                dp.set(r, c, grad.at(offset + r, c));
                            }
                        }
                        grads[p.0].add_assign(&dp);
                        offset += rows;
                    }
                }
                Op::Transpose(a) => {
                    grads[a.0].add_assign(&grad.transpose());
                }
                Op::MeanCols(a) => {
                    let cols = self.value(*a).cols();
                    let mut da = Mat::zeros(self.value(*a).rows(), cols);
                    for r in 0..da.rows() {
                        for c in 0..cols {
                            da.set(r, c, grad.at(r, 0) / cols as f64);
                        }
                    }
                    grads[a.0].add_assign(&da);
                }
                Op::Log1pExp(a) => {
                    let mut da = grad.clone();
                    for (g, x) in da.data_mut().iter_mut().zip(self.value(*a).data()) {
                        *g *= sigmoid(*x);
                    }
                    grads[a.0].add_assign(&da);
                }
                Op::SumAll(a) => {
                    let g = grad.as_scalar();
                    let (rows, cols) = (self.value(*a).rows(), self.value(*a).cols());
                    let da = Mat::from_vec(rows, cols, vec![g; rows * cols]);
                    grads[a.0].add_assign(&da);
                }
            }
        }
        Gradients { grads }
    }
}

pub struct Gradients {
    grads: Vec<Mat>,
}

impl Gradients {
    pub fn of(&self, id: VarId) -> &Mat {
        &self.grads[id.0]
    }
}

pub fn log1p_exp(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
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
