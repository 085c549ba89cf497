//! Tape-based reverse-mode differentiation over [`Tensor`] values.
//!
//! Every primitive appends one node holding its output value and enough of
//! its inputs to run the backward rule later. Nodes are appended in
//! evaluation order, so the tape is topologically sorted by construction and
//! [`Tape::backward`] is a single reverse sweep.
//!
//! Shape rules are 2D unless stated otherwise: a `[1]` tensor is a scalar,
//! a `[1, n]` tensor is a row vector.

use crate::tensor::{matmul_nt_raw, matmul_raw, matmul_tn_raw};
use crate::{NumError, Params, Result, Tensor};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Primitive kinds recorded on the tape.
#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    AddRow(Var, Var),
    MulCol(Var, Var),
    ScaleBy(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Relu(Var),
    Tanh(Var),
    Sigmoid(Var),
    Softplus(Var),
    Exp(Var),
    Ln(Var),
    Sqrt(Var),
    Square(Var),
    Sum(Var),
    Mean(Var),
    SumRows(Var),
    SumCols(Var),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    GatherRows(Var, Vec<usize>),
    ScatterRows(Var, Vec<usize>),
    PickCols(Var, Vec<usize>),
    LogSumExpRows(Var),
    SoftmaxRows(Var),
    Reshape(Var),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::MatMul(..) => "matmul",
            Op::Transpose(_) => "transpose",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Div(..) => "div",
            Op::AddRow(..) => "add_row",
            Op::MulCol(..) => "mul_col",
            Op::ScaleBy(..) => "scale_by",
            Op::Scale(..) => "scale",
            Op::AddScalar(_) => "add_scalar",
            Op::Relu(_) => "relu",
            Op::Tanh(_) => "tanh",
            Op::Sigmoid(_) => "sigmoid",
            Op::Softplus(_) => "softplus",
            Op::Exp(_) => "exp",
            Op::Ln(_) => "ln",
            Op::Sqrt(_) => "sqrt",
            Op::Square(_) => "square",
            Op::Sum(_) => "sum",
            Op::Mean(_) => "mean",
            Op::SumRows(_) => "sum_rows",
            Op::SumCols(_) => "sum_cols",
            Op::ConcatCols(_) => "concat_cols",
            Op::ConcatRows(_) => "concat_rows",
            Op::GatherRows(..) => "gather_rows",
            Op::ScatterRows(..) => "scatter_rows",
            Op::PickCols(..) => "pick_cols",
            Op::LogSumExpRows(_) => "log_sum_exp_rows",
            Op::SoftmaxRows(_) => "softmax_rows",
            Op::Reshape(_) => "reshape",
        }
    }
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Recorded computation. Single-threaded; build one per forward pass.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Parameters of a [`Params`] set bound as leaves on one tape.
#[derive(Debug, Clone)]
pub struct Bound {
    vars: Vec<Var>,
}

impl Bound {
    pub fn var(&self, id: crate::ParamId) -> Var {
        self.vars[id.index()]
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }
}

impl std::ops::Index<crate::ParamId> for Bound {
    type Output = Var;
    fn index(&self, id: crate::ParamId) -> &Var {
        &self.vars[id.index()]
    }
}

fn require_2d(op: &'static str, t: &Tensor) -> Result<(usize, usize)> {
    match t.shape() {
        [r, c] => Ok((*r, *c)),
        other => Err(NumError::ShapeMismatch {
            op,
            lhs: other.to_vec(),
            rhs: vec![],
        }),
    }
}

fn same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(NumError::ShapeMismatch {
            op,
            lhs: a.shape().to_vec(),
            rhs: b.shape().to_vec(),
        });
    }
    Ok(())
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Constant input; receives no gradient.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.nodes.push(Node {
            value: t,
            op: Op::Leaf,
            requires_grad: false,
        });
        Var(self.nodes.len() - 1)
    }

    /// Differentiable leaf.
    pub fn leaf(&mut self, t: Tensor) -> Var {
        self.nodes.push(Node {
            value: t,
            op: Op::Leaf,
            requires_grad: true,
        });
        Var(self.nodes.len() - 1)
    }

    /// Binds every tensor of `params` as a differentiable leaf.
    pub fn bind(&mut self, params: &Params) -> Bound {
        let vars = params.tensors().iter().map(|t| self.leaf(t.clone())).collect();
        Bound { vars }
    }

    /// Binds `params` as constants (frozen networks).
    pub fn bind_frozen(&mut self, params: &Params) -> Bound {
        let vars = params
            .tensors()
            .iter()
            .map(|t| self.constant(t.clone()))
            .collect();
        Bound { vars }
    }

    fn push(&mut self, op: Op, shape: Vec<usize>, data: Vec<f64>) -> Result<Var> {
        if data.iter().any(|v| !v.is_finite()) {
            return Err(NumError::NonFinite { op: op.name() });
        }
        let requires_grad = self.inputs_require_grad(&op);
        self.nodes.push(Node {
            value: Tensor::from_parts(shape, data),
            op,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    fn inputs_require_grad(&self, op: &Op) -> bool {
        let rg = |v: &Var| self.nodes[v.0].requires_grad;
        match op {
            Op::Leaf => false,
            Op::MatMul(a, b)
            | Op::Add(a, b)
            | Op::Sub(a, b)
            | Op::Mul(a, b)
            | Op::Div(a, b)
            | Op::AddRow(a, b)
            | Op::MulCol(a, b)
            | Op::ScaleBy(a, b) => rg(a) || rg(b),
            Op::ConcatCols(vs) | Op::ConcatRows(vs) => vs.iter().any(rg),
            Op::Transpose(a)
            | Op::Scale(a, _)
            | Op::AddScalar(a)
            | Op::Relu(a)
            | Op::Tanh(a)
            | Op::Sigmoid(a)
            | Op::Softplus(a)
            | Op::Exp(a)
            | Op::Ln(a)
            | Op::Sqrt(a)
            | Op::Square(a)
            | Op::Sum(a)
            | Op::Mean(a)
            | Op::SumRows(a)
            | Op::SumCols(a)
            | Op::GatherRows(a, _)
            | Op::ScatterRows(a, _)
            | Op::PickCols(a, _)
            | Op::LogSumExpRows(a)
            | Op::SoftmaxRows(a)
            | Op::Reshape(a) => rg(a),
        }
    }

    fn unary(&mut self, a: Var, op: Op, f: impl Fn(f64) -> f64) -> Result<Var> {
        let t = self.value(a);
        let shape = t.shape().to_vec();
        let data = t.data().iter().map(|&x| f(x)).collect();
        self.push(op, shape, data)
    }

    fn binary_same(
        &mut self,
        a: Var,
        b: Var,
        op: Op,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        same_shape(op.name(), ta, tb)?;
        let shape = ta.shape().to_vec();
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect();
        self.push(op, shape, data)
    }

    /// `[m,k] · [k,n] → [m,n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = require_2d("matmul", self.value(a))?;
        let (k2, n) = require_2d("matmul", self.value(b))?;
        if k != k2 {
            return Err(NumError::ShapeMismatch {
                op: "matmul",
                lhs: vec![m, k],
                rhs: vec![k2, n],
            });
        }
        let data = matmul_raw(self.value(a).data(), self.value(b).data(), m, k, n);
        self.push(Op::MatMul(a, b), vec![m, n], data)
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let (m, n) = require_2d("transpose", self.value(a))?;
        let src = self.value(a).data();
        let mut data = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                data[j * m + i] = src[i * n + j];
            }
        }
        self.push(Op::Transpose(a), vec![n, m], data)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_same(a, b, Op::Add(a, b), |x, y| x + y)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_same(a, b, Op::Sub(a, b), |x, y| x - y)
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_same(a, b, Op::Mul(a, b), |x, y| x * y)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary_same(a, b, Op::Div(a, b), |x, y| x / y)
    }

    /// Broadcast `[1,n]` row onto every row of `[m,n]`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (m, n) = require_2d("add_row", self.value(a))?;
        let rt = self.value(row);
        if rt.shape() != [1, n] {
            return Err(NumError::ShapeMismatch {
                op: "add_row",
                lhs: vec![m, n],
                rhs: rt.shape().to_vec(),
            });
        }
        let r = rt.data();
        let data = self
            .value(a)
            .data()
            .iter()
            .enumerate()
            .map(|(idx, &x)| x + r[idx % n])
            .collect();
        self.push(Op::AddRow(a, row), vec![m, n], data)
    }

    /// Scale row `i` of `[m,n]` by `col[i]` where `col` is `[m,1]`.
    pub fn mul_col(&mut self, a: Var, col: Var) -> Result<Var> {
        let (m, n) = require_2d("mul_col", self.value(a))?;
        let ct = self.value(col);
        if ct.shape() != [m, 1] {
            return Err(NumError::ShapeMismatch {
                op: "mul_col",
                lhs: vec![m, n],
                rhs: ct.shape().to_vec(),
            });
        }
        let c = ct.data();
        let data = self
            .value(a)
            .data()
            .iter()
            .enumerate()
            .map(|(idx, &x)| x * c[idx / n])
            .collect();
        self.push(Op::MulCol(a, col), vec![m, n], data)
    }

    /// Multiply every element by a learnable `[1]` scalar.
    pub fn scale_by(&mut self, a: Var, s: Var) -> Result<Var> {
        let st = self.value(s);
        if st.len() != 1 {
            return Err(NumError::ShapeMismatch {
                op: "scale_by",
                lhs: self.value(a).shape().to_vec(),
                rhs: st.shape().to_vec(),
            });
        }
        let sv = st.data()[0];
        self.unary(a, Op::ScaleBy(a, s), |x| x * sv)
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        self.unary(a, Op::Scale(a, c), |x| x * c)
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Result<Var> {
        self.unary(a, Op::AddScalar(a), |x| x + c)
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.unary(a, Op::Relu(a), |x| x.max(0.0))
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.unary(a, Op::Tanh(a), f64::tanh)
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        self.unary(a, Op::Sigmoid(a), sigmoid)
    }

    /// `ln(1 + eˣ)`, evaluated without overflow.
    pub fn softplus(&mut self, a: Var) -> Result<Var> {
        self.unary(a, Op::Softplus(a), softplus)
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        self.unary(a, Op::Exp(a), f64::exp)
    }

    pub fn ln(&mut self, a: Var) -> Result<Var> {
        self.unary(a, Op::Ln(a), f64::ln)
    }

    pub fn sqrt(&mut self, a: Var) -> Result<Var> {
        if self.value(a).data().iter().any(|&x| x <= 0.0) {
            // derivative undefined at 0
            return Err(NumError::NonFinite { op: "sqrt" });
        }
        self.unary(a, Op::Sqrt(a), f64::sqrt)
    }

    pub fn square(&mut self, a: Var) -> Result<Var> {
        self.unary(a, Op::Square(a), |x| x * x)
    }

    /// Sum of all elements, shape `[1]`.
    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let s = self.value(a).data().iter().sum();
        self.push(Op::Sum(a), vec![1], vec![s])
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        let s = t.data().iter().sum::<f64>() / t.len() as f64;
        self.push(Op::Mean(a), vec![1], vec![s])
    }

    /// `[m,n] → [1,n]`, summing over rows.
    pub fn sum_rows(&mut self, a: Var) -> Result<Var> {
        let (m, n) = require_2d("sum_rows", self.value(a))?;
        let src = self.value(a).data();
        let mut out = vec![0.0; n];
        for i in 0..m {
            for (o, &x) in out.iter_mut().zip(&src[i * n..(i + 1) * n]) {
                *o += x;
            }
        }
        self.push(Op::SumRows(a), vec![1, n], out)
    }

    /// `[m,n] → [1,n]`, averaging over rows.
    pub fn mean_rows(&mut self, a: Var) -> Result<Var> {
        let m = self.value(a).rows();
        let s = self.sum_rows(a)?;
        self.scale(s, 1.0 / m as f64)
    }

    /// `[m,n] → [m,1]`, summing within each row.
    pub fn sum_cols(&mut self, a: Var) -> Result<Var> {
        let (m, n) = require_2d("sum_cols", self.value(a))?;
        let src = self.value(a).data();
        let out = (0..m).map(|i| src[i * n..(i + 1) * n].iter().sum()).collect();
        self.push(Op::SumCols(a), vec![m, 1], out)
    }

    /// Horizontal concatenation of 2D tensors with equal row counts.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(NumError::InvalidArgument("concat of zero tensors".into()));
        }
        let (m, _) = require_2d("concat_cols", self.value(parts[0]))?;
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let (mp, np) = require_2d("concat_cols", self.value(p))?;
            if mp != m {
                return Err(NumError::ShapeMismatch {
                    op: "concat_cols",
                    lhs: self.value(parts[0]).shape().to_vec(),
                    rhs: vec![mp, np],
                });
            }
            widths.push(np);
        }
        let total: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(m * total);
        for i in 0..m {
            for (&p, &w) in parts.iter().zip(&widths) {
                data.extend_from_slice(&self.value(p).data()[i * w..(i + 1) * w]);
            }
        }
        self.push(Op::ConcatCols(parts.to_vec()), vec![m, total], data)
    }

    /// Vertical concatenation of 2D tensors with equal column counts.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(NumError::InvalidArgument("concat of zero tensors".into()));
        }
        let (_, n) = require_2d("concat_rows", self.value(parts[0]))?;
        let mut rows = 0;
        let mut data = Vec::new();
        for &p in parts {
            let (mp, np) = require_2d("concat_rows", self.value(p))?;
            if np != n {
                return Err(NumError::ShapeMismatch {
                    op: "concat_rows",
                    lhs: self.value(parts[0]).shape().to_vec(),
                    rhs: vec![mp, np],
                });
            }
            rows += mp;
            data.extend_from_slice(self.value(p).data());
        }
        self.push(Op::ConcatRows(parts.to_vec()), vec![rows, n], data)
    }

    /// Row selection (embedding lookup); indices may repeat.
    pub fn gather_rows(&mut self, a: Var, idx: &[usize]) -> Result<Var> {
        let (m, n) = require_2d("gather_rows", self.value(a))?;
        if idx.is_empty() {
            return Err(NumError::InvalidArgument("gather of zero rows".into()));
        }
        if let Some(&bad) = idx.iter().find(|&&i| i >= m) {
            return Err(NumError::IndexOutOfRange {
                op: "gather_rows",
                index: bad,
                len: m,
            });
        }
        let src = self.value(a).data();
        let mut data = Vec::with_capacity(idx.len() * n);
        for &i in idx {
            data.extend_from_slice(&src[i * n..(i + 1) * n]);
        }
        self.push(Op::GatherRows(a, idx.to_vec()), vec![idx.len(), n], data)
    }

    /// Segment sum: row `r` of `a` is added into output row `idx[r]`;
    /// output has `rows` rows.
    pub fn scatter_rows(&mut self, a: Var, idx: &[usize], rows: usize) -> Result<Var> {
        let (m, n) = require_2d("scatter_rows", self.value(a))?;
        if idx.len() != m {
            return Err(NumError::ShapeMismatch {
                op: "scatter_rows",
                lhs: vec![m, n],
                rhs: vec![idx.len()],
            });
        }
        if rows == 0 {
            return Err(NumError::InvalidArgument("scatter into zero rows".into()));
        }
        if let Some(&bad) = idx.iter().find(|&&i| i >= rows) {
            return Err(NumError::IndexOutOfRange {
                op: "scatter_rows",
                index: bad,
                len: rows,
            });
        }
        let src = self.value(a).data();
        let mut data = vec![0.0; rows * n];
        for (r, &i) in idx.iter().enumerate() {
            for j in 0..n {
                data[i * n + j] += src[r * n + j];
            }
        }
        self.push(Op::ScatterRows(a, idx.to_vec()), vec![rows, n], data)
    }

    /// `out[i] = a[i, cols[i]]`, shape `[m,1]`.
    pub fn pick_cols(&mut self, a: Var, cols: &[usize]) -> Result<Var> {
        let (m, n) = require_2d("pick_cols", self.value(a))?;
        if cols.len() != m {
            return Err(NumError::ShapeMismatch {
                op: "pick_cols",
                lhs: vec![m, n],
                rhs: vec![cols.len()],
            });
        }
        if let Some(&bad) = cols.iter().find(|&&c| c >= n) {
            return Err(NumError::IndexOutOfRange {
                op: "pick_cols",
                index: bad,
                len: n,
            });
        }
        let src = self.value(a).data();
        let data = cols.iter().enumerate().map(|(i, &c)| src[i * n + c]).collect();
        self.push(Op::PickCols(a, cols.to_vec()), vec![m, 1], data)
    }

    /// Row-wise `ln Σⱼ exp(a[i,j])`, shape `[m,1]`.
    pub fn log_sum_exp_rows(&mut self, a: Var) -> Result<Var> {
        let (m, n) = require_2d("log_sum_exp_rows", self.value(a))?;
        let src = self.value(a).data();
        let data = (0..m)
            .map(|i| {
                let row = &src[i * n..(i + 1) * n];
                let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                mx + row.iter().map(|&x| (x - mx).exp()).sum::<f64>().ln()
            })
            .collect();
        self.push(Op::LogSumExpRows(a), vec![m, 1], data)
    }

    pub fn softmax_rows(&mut self, a: Var) -> Result<Var> {
        let (m, n) = require_2d("softmax_rows", self.value(a))?;
        let src = self.value(a).data();
        let mut data = Vec::with_capacity(m * n);
        for i in 0..m {
            let row = &src[i * n..(i + 1) * n];
            let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = row.iter().map(|&x| (x - mx).exp()).collect();
            let z: f64 = exps.iter().sum();
            data.extend(exps.into_iter().map(|e| e / z));
        }
        self.push(Op::SoftmaxRows(a), vec![m, n], data)
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let t = self.value(a).reshaped(shape.to_vec())?;
        let data = t.into_data();
        self.push(Op::Reshape(a), shape.to_vec(), data)
    }

    /// `x · W + b` for `x: [m,k]`, `W: [k,n]`, `b: [1,n]`.
    pub fn affine(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let h = self.matmul(x, w)?;
        self.add_row(h, b)
    }

    /// Reverse sweep from a one-element `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let lt = self.value(loss);
        if lt.len() != 1 {
            return Err(NumError::NotScalar(lt.shape().to_vec()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);
        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else {
                continue;
            };
            self.propagate(idx, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn propagate(&self, idx: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[idx];
        let out = node.value.data();
        let val = |v: &Var| self.nodes[v.0].value.data();
        let needs = |v: &Var| self.nodes[v.0].requires_grad;
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let ta = &self.nodes[a.0].value;
                let (m, k) = (ta.rows(), ta.cols());
                let n = self.nodes[b.0].value.cols();
                if needs(a) {
                    let ga = matmul_nt_raw(g, val(b), m, n, k);
                    accumulate(grads, *a, &ga);
                }
                if needs(b) {
                    let gb = matmul_tn_raw(val(a), g, m, k, n);
                    accumulate(grads, *b, &gb);
                }
            }
            Op::Transpose(a) => {
                let (m, n) = (node.value.rows(), node.value.cols());
                let mut ga = vec![0.0; m * n];
                for i in 0..m {
                    for j in 0..n {
                        ga[j * m + i] = g[i * n + j];
                    }
                }
                accumulate(grads, *a, &ga);
            }
            Op::Add(a, b) => {
                if needs(a) {
                    accumulate(grads, *a, g);
                }
                if needs(b) {
                    accumulate(grads, *b, g);
                }
            }
            Op::Sub(a, b) => {
                if needs(a) {
                    accumulate(grads, *a, g);
                }
                if needs(b) {
                    let gb: Vec<f64> = g.iter().map(|x| -x).collect();
                    accumulate(grads, *b, &gb);
                }
            }
            Op::Mul(a, b) => {
                if needs(a) {
                    let ga: Vec<f64> = g.iter().zip(val(b)).map(|(x, y)| x * y).collect();
                    accumulate(grads, *a, &ga);
                }
                if needs(b) {
                    let gb: Vec<f64> = g.iter().zip(val(a)).map(|(x, y)| x * y).collect();
                    accumulate(grads, *b, &gb);
                }
            }
            Op::Div(a, b) => {
                let (va, vb) = (val(a), val(b));
                if needs(a) {
                    let ga: Vec<f64> = g.iter().zip(vb).map(|(x, y)| x / y).collect();
                    accumulate(grads, *a, &ga);
                }
                if needs(b) {
                    let gb: Vec<f64> = g
                        .iter()
                        .zip(va.iter().zip(vb))
                        .map(|(x, (p, q))| -x * p / (q * q))
                        .collect();
                    accumulate(grads, *b, &gb);
                }
            }
            Op::AddRow(a, row) => {
                if needs(a) {
                    accumulate(grads, *a, g);
                }
                if needs(row) {
                    let n = node.value.cols();
                    let mut gr = vec![0.0; n];
                    for (i, x) in g.iter().enumerate() {
                        gr[i % n] += x;
                    }
                    accumulate(grads, *row, &gr);
                }
            }
            Op::MulCol(a, col) => {
                let n = node.value.cols();
                let c = val(col);
                if needs(a) {
                    let ga: Vec<f64> = g.iter().enumerate().map(|(i, x)| x * c[i / n]).collect();
                    accumulate(grads, *a, &ga);
                }
                if needs(col) {
                    let va = val(a);
                    let mut gc = vec![0.0; c.len()];
                    for (i, x) in g.iter().enumerate() {
                        gc[i / n] += x * va[i];
                    }
                    accumulate(grads, *col, &gc);
                }
            }
            Op::ScaleBy(a, s) => {
                let sv = val(s)[0];
                if needs(a) {
                    let ga: Vec<f64> = g.iter().map(|x| x * sv).collect();
                    accumulate(grads, *a, &ga);
                }
                if needs(s) {
                    let gs: f64 = g.iter().zip(val(a)).map(|(x, y)| x * y).sum();
                    accumulate(grads, *s, &[gs]);
                }
            }
            Op::Scale(a, c) => {
                let ga: Vec<f64> = g.iter().map(|x| x * c).collect();
                accumulate(grads, *a, &ga);
            }
            Op::AddScalar(a) | Op::Reshape(a) => accumulate(grads, *a, g),
            Op::Relu(a) => {
                let ga: Vec<f64> = g
                    .iter()
                    .zip(val(a))
                    .map(|(x, &v)| if v > 0.0 { *x } else { 0.0 })
                    .collect();
                accumulate(grads, *a, &ga);
            }
            Op::Tanh(a) => {
                let ga: Vec<f64> = g.iter().zip(out).map(|(x, y)| x * (1.0 - y * y)).collect();
                accumulate(grads, *a, &ga);
            }
            Op::Sigmoid(a) => {
                let ga: Vec<f64> = g.iter().zip(out).map(|(x, y)| x * y * (1.0 - y)).collect();
                accumulate(grads, *a, &ga);
            }
            Op::Softplus(a) => {
                let ga: Vec<f64> = g
                    .iter()
                    .zip(val(a))
                    .map(|(x, &v)| x * sigmoid(v))
                    .collect();
                accumulate(grads, *a, &ga);
            }
            Op::Exp(a) => {
                let ga: Vec<f64> = g.iter().zip(out).map(|(x, y)| x * y).collect();
                accumulate(grads, *a, &ga);
            }
            Op::Ln(a) => {
                let ga: Vec<f64> = g.iter().zip(val(a)).map(|(x, v)| x / v).collect();
                accumulate(grads, *a, &ga);
            }
            Op::Sqrt(a) => {
                let ga: Vec<f64> = g.iter().zip(out).map(|(x, y)| x * 0.5 / y).collect();
                accumulate(grads, *a, &ga);
            }
            Op::Square(a) => {
                let ga: Vec<f64> = g.iter().zip(val(a)).map(|(x, v)| 2.0 * x * v).collect();
                accumulate(grads, *a, &ga);
            }
            Op::Sum(a) => {
                let ga = vec![g[0]; self.nodes[a.0].value.len()];
                accumulate(grads, *a, &ga);
            }
            Op::Mean(a) => {
                let n = self.nodes[a.0].value.len();
                let ga = vec![g[0] / n as f64; n];
                accumulate(grads, *a, &ga);
            }
            Op::SumRows(a) => {
                let ta = &self.nodes[a.0].value;
                let n = ta.cols();
                let ga: Vec<f64> = (0..ta.len()).map(|i| g[i % n]).collect();
                accumulate(grads, *a, &ga);
            }
            Op::SumCols(a) => {
                let ta = &self.nodes[a.0].value;
                let n = ta.cols();
                let ga: Vec<f64> = (0..ta.len()).map(|i| g[i / n]).collect();
                accumulate(grads, *a, &ga);
            }
            Op::ConcatCols(parts) => {
                let total = node.value.cols();
                let m = node.value.rows();
                let mut offset = 0;
                for p in parts {
                    let w = self.nodes[p.0].value.cols();
                    if needs(p) {
                        let mut gp = Vec::with_capacity(m * w);
                        for i in 0..m {
                            gp.extend_from_slice(&g[i * total + offset..i * total + offset + w]);
                        }
                        accumulate(grads, *p, &gp);
                    }
                    offset += w;
                }
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for p in parts {
                    let len = self.nodes[p.0].value.len();
                    if needs(p) {
                        accumulate(grads, *p, &g[offset..offset + len]);
                    }
                    offset += len;
                }
            }
            Op::GatherRows(a, idx) => {
                let ta = &self.nodes[a.0].value;
                let n = ta.cols();
                let mut ga = vec![0.0; ta.len()];
                for (r, &i) in idx.iter().enumerate() {
                    for j in 0..n {
                        ga[i * n + j] += g[r * n + j];
                    }
                }
                accumulate(grads, *a, &ga);
            }
            Op::ScatterRows(a, idx) => {
                let n = node.value.cols();
                let mut ga = Vec::with_capacity(idx.len() * n);
                for &i in idx {
                    ga.extend_from_slice(&g[i * n..(i + 1) * n]);
                }
                accumulate(grads, *a, &ga);
            }
            Op::PickCols(a, cols) => {
                let ta = &self.nodes[a.0].value;
                let n = ta.cols();
                let mut ga = vec![0.0; ta.len()];
                for (i, &c) in cols.iter().enumerate() {
                    ga[i * n + c] += g[i];
                }
                accumulate(grads, *a, &ga);
            }
            Op::LogSumExpRows(a) => {
                let ta = &self.nodes[a.0].value;
                let n = ta.cols();
                let src = ta.data();
                let ga: Vec<f64> = (0..ta.len())
                    .map(|k| {
                        let i = k / n;
                        g[i] * (src[k] - out[i]).exp()
                    })
                    .collect();
                accumulate(grads, *a, &ga);
            }
            Op::SoftmaxRows(a) => {
                let n = node.value.cols();
                let m = node.value.rows();
                let mut ga = vec![0.0; m * n];
                for i in 0..m {
                    let y = &out[i * n..(i + 1) * n];
                    let gr = &g[i * n..(i + 1) * n];
                    let dot: f64 = y.iter().zip(gr).map(|(a, b)| a * b).sum();
                    for j in 0..n {
                        ga[i * n + j] = y[j] * (gr[j] - dot);
                    }
                }
                accumulate(grads, *a, &ga);
            }
        }
    }
}

fn accumulate(grads: &mut [Option<Vec<f64>>], v: Var, g: &[f64]) {
    match &mut grads[v.0] {
        Some(existing) => {
            for (e, x) in existing.iter_mut().zip(g) {
                *e += x;
            }
        }
        slot @ None => *slot = Some(g.to_vec()),
    }
}

/// Result of [`Tape::backward`]: one gradient per node that lies on a path
/// to the loss.
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
}

impl Gradients {
    /// Gradient with respect to `v`; zeros when `v` does not affect the loss.
    pub fn get(&self, tape: &Tape, v: Var) -> Vec<f64> {
        match self.grads.get(v.0).and_then(|g| g.as_ref()) {
            Some(g) => g.clone(),
            None => vec![0.0; tape.value(v).len()],
        }
    }

    /// Per-parameter gradients for a bound parameter set, in parameter order.
    pub fn for_params(&self, tape: &Tape, bound: &Bound) -> Vec<Vec<f64>> {
        bound.vars.iter().map(|&v| self.get(tape, v)).collect()
    }
}
