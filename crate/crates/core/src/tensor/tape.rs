//! Reverse-mode automatic differentiation over dense matrices.
//!
//! A [`Tape`] records every operation as a node holding its value, a gradient
//! accumulator and the rule needed to push gradients to its parents. Nodes
//! are appended in evaluation order, so walking the tape backwards is a valid
//! topological order and the graph is acyclic by construction.
//!
//! A tape is single-threaded (`RefCell` inside); build one per thread.

use std::cell::{Ref, RefCell};
use std::f64::consts::LN_2;

use crate::error::{CumiError, Result};
use crate::tensor::eig::sym_eig;
use crate::tensor::Matrix;

/// Eigenvalues below this count as zero in [`SpectralFn::Power`]: they add
/// nothing to the sum and receive no gradient.
pub const EIGEN_FLOOR: f64 = 1e-12;

/// Handle to a node on a [`Tape`]. Only meaningful for the tape that issued it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Scalar function applied to each eigenvalue by [`Tape::spectral_scalar`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpectralFn {
    /// `f(λ) = λ`, no flooring.
    Identity,
    /// `f(λ) = λ^p` for `λ ≥ EIGEN_FLOOR`, zero below.
    Power(f64),
}

impl SpectralFn {
    fn eval(self, lambda: f64) -> f64 {
        match self {
            SpectralFn::Identity => lambda,
            SpectralFn::Power(p) => {
                if lambda < EIGEN_FLOOR {
                    0.0
                } else {
                    lambda.powf(p)
                }
            }
        }
    }

    /// Derivative of `eval`.
    fn derivative(self, lambda: f64) -> f64 {
        match self {
            SpectralFn::Identity => 1.0,
            SpectralFn::Power(p) => {
                if lambda < EIGEN_FLOOR {
                    0.0
                } else {
                    p * lambda.powf(p - 1.0)
                }
            }
        }
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Hadamard(Var, Var),
    AddRow(Var, Var),
    Relu(Var),
    Scale(Var, f64),
    Sum(Var),
    Mean(Var),
    Log2(Var),
    HCat(Vec<Var>),
    TraceNormalize(Var),
    GaussianGram {
        x: Var,
        sigma: f64,
        kernel: Matrix,
    },
    Spectral {
        a: Var,
        vectors: Matrix,
        weights: Vec<f64>,
    },
    SoftmaxCrossEntropy {
        logits: Var,
        probs: Matrix,
        labels: Vec<usize>,
    },
}

impl Op {
    fn parents(&self) -> Vec<Var> {
        match self {
            Op::Leaf => vec![],
            Op::MatMul(a, b)
            | Op::Add(a, b)
            | Op::Sub(a, b)
            | Op::Hadamard(a, b)
            | Op::AddRow(a, b) => {
                vec![*a, *b]
            }
            Op::Relu(a)
            | Op::Scale(a, _)
            | Op::Sum(a)
            | Op::Mean(a)
            | Op::Log2(a)
            | Op::TraceNormalize(a) => {
                vec![*a]
            }
            Op::HCat(parts) => parts.clone(),
            Op::GaussianGram { x, .. } => vec![*x],
            Op::Spectral { a, .. } => vec![*a],
            Op::SoftmaxCrossEntropy { logits, .. } => vec![*logits],
        }
    }
}

#[derive(Debug)]
struct Node {
    value: Matrix,
    grad: Matrix,
    op: Op,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
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

    fn push(&self, value: Matrix, op: Op) -> Var {
        let grad = Matrix::zeros(value.rows(), value.cols());
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { value, grad, op });
        Var(nodes.len() - 1)
    }

    /// Records an input (parameter or data). Gradients accumulate on it like on any node.
    pub fn leaf(&self, value: Matrix) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> Ref<'_, Matrix> {
        Ref::map(self.nodes.borrow(), |n| &n[v.0].value)
    }

    /// Value of a 1x1 node.
    pub fn scalar(&self, v: Var) -> f64 {
        self.value(v).item()
    }

    pub fn grad(&self, v: Var) -> Matrix {
        self.nodes.borrow()[v.0].grad.clone()
    }

    /// Ordered parents of `v`.
    pub fn parents(&self, v: Var) -> Vec<Var> {
        self.nodes.borrow()[v.0].op.parents()
    }

    pub fn zero_grad(&self) {
        for n in self.nodes.borrow_mut().iter_mut() {
            n.grad.as_mut_slice().fill(0.0);
        }
    }

    fn shapes(&self, a: Var, b: Var) -> ((usize, usize), (usize, usize)) {
        let nodes = self.nodes.borrow();
        (nodes[a.0].value.shape(), nodes[b.0].value.shape())
    }

    pub fn matmul(&self, a: Var, b: Var) -> Result<Var> {
        let value = {
            let nodes = self.nodes.borrow();
            nodes[a.0].value.matmul(&nodes[b.0].value)?
        };
        Ok(self.push(value, Op::MatMul(a, b)))
    }

    pub fn add(&self, a: Var, b: Var) -> Result<Var> {
        let value = {
            let nodes = self.nodes.borrow();
            nodes[a.0].value.add(&nodes[b.0].value)?
        };
        Ok(self.push(value, Op::Add(a, b)))
    }

    pub fn sub(&self, a: Var, b: Var) -> Result<Var> {
        let value = {
            let nodes = self.nodes.borrow();
            nodes[a.0].value.sub(&nodes[b.0].value)?
        };
        Ok(self.push(value, Op::Sub(a, b)))
    }

    pub fn hadamard(&self, a: Var, b: Var) -> Result<Var> {
        let value = {
            let nodes = self.nodes.borrow();
            nodes[a.0].value.hadamard(&nodes[b.0].value)?
        };
        Ok(self.push(value, Op::Hadamard(a, b)))
    }

    /// Adds a `1 x k` row to every row of an `n x k` matrix (bias broadcast).
    pub fn add_row(&self, x: Var, row: Var) -> Result<Var> {
        let ((n, k), (r, c)) = self.shapes(x, row);
        if r != 1 || c != k {
            return Err(CumiError::dim(
                "add_row",
                format!("{n}x{k} plus row {r}x{c}"),
            ));
        }
        let value = {
            let nodes = self.nodes.borrow();
            let b = nodes[row.0].value.as_slice();
            let mut out = nodes[x.0].value.clone();
            for chunk in out.as_mut_slice().chunks_mut(k.max(1)) {
                for (o, bv) in chunk.iter_mut().zip(b) {
                    *o += bv;
                }
            }
            out
        };
        Ok(self.push(value, Op::AddRow(x, row)))
    }

    pub fn relu(&self, a: Var) -> Var {
        let value = self.value(a).map(|v| v.max(0.0));
        self.push(value, Op::Relu(a))
    }

    pub fn scale(&self, a: Var, c: f64) -> Var {
        let value = self.value(a).scale(c);
        self.push(value, Op::Scale(a, c))
    }

    pub fn sum(&self, a: Var) -> Var {
        let value = Matrix::scalar(self.value(a).sum());
        self.push(value, Op::Sum(a))
    }

    pub fn mean(&self, a: Var) -> Var {
        let value = Matrix::scalar(self.value(a).mean());
        self.push(value, Op::Mean(a))
    }

    /// Elementwise base-2 logarithm; every entry must be positive.
    pub fn log2(&self, a: Var) -> Result<Var> {
        let value = {
            let v = self.value(a);
            if let Some(bad) = v.as_slice().iter().find(|x| **x <= 0.0 || !x.is_finite()) {
                return Err(CumiError::Numeric(format!("log2 of {bad}")));
            }
            v.map(f64::log2)
        };
        Ok(self.push(value, Op::Log2(a)))
    }

    /// Column concatenation `[a | b | ...]`.
    pub fn hcat(&self, parts: &[Var]) -> Result<Var> {
        let value = {
            let nodes = self.nodes.borrow();
            let mats: Vec<&Matrix> = parts.iter().map(|p| &nodes[p.0].value).collect();
            Matrix::hcat(&mats)?
        };
        Ok(self.push(value, Op::HCat(parts.to_vec())))
    }

    /// `A / tr(A)`.
    pub fn trace_normalize(&self, a: Var) -> Result<Var> {
        let value = {
            let v = self.value(a);
            if !v.is_square() {
                return Err(CumiError::dim(
                    "trace_normalize",
                    format!("{}x{} is not square", v.rows(), v.cols()),
                ));
            }
            let t = v.trace();
            if !(t.abs() > 0.0) || !t.is_finite() {
                return Err(CumiError::Numeric(format!("trace {t} cannot normalize")));
            }
            v.scale(1.0 / t)
        };
        Ok(self.push(value, Op::TraceNormalize(a)))
    }

    /// Trace-normalized Gaussian Gram matrix of the rows of `x` with a fixed
    /// bandwidth. `sigma` is a constant: no gradient flows into it.
    pub fn gaussian_gram(&self, x: Var, sigma: f64) -> Result<Var> {
        let kernel = {
            let v = self.value(x);
            crate::info::kernel::gaussian_kernel(&v, sigma)?
        };
        let n = kernel.rows();
        let value = kernel.scale(1.0 / n as f64);
        Ok(self.push(value, Op::GaussianGram { x, sigma, kernel }))
    }

    /// `Σ_m f(λ_m(A))` for symmetric `A`, as a 1x1 node. The backward rule is
    /// `U diag(f'(λ)) Uᵀ`, which holds for repeated eigenvalues too.
    pub fn spectral_scalar(&self, a: Var, f: SpectralFn) -> Result<Var> {
        let eig = {
            let v = self.value(a);
            sym_eig(&v)?
        };
        let mut total = 0.0;
        let mut weights = Vec::with_capacity(eig.values.len());
        for (m, &l) in eig.values.iter().enumerate() {
            total += f.eval(l);
            let d = f.derivative(l);
            if !d.is_finite() {
                return Err(CumiError::Numeric(format!(
                    "spectral derivative undefined at eigenvalue #{m} ({l:e})"
                )));
            }
            weights.push(d);
        }
        if !total.is_finite() {
            return Err(CumiError::Numeric("non-finite spectral sum".into()));
        }
        Ok(self.push(
            Matrix::scalar(total),
            Op::Spectral {
                a,
                vectors: eig.vectors,
                weights,
            },
        ))
    }

    /// Mean softmax cross-entropy of `logits` (`n x k`) against class indices.
    pub fn softmax_cross_entropy(&self, logits: Var, labels: &[usize]) -> Result<Var> {
        let (probs, loss) = {
            let z = self.value(logits);
            let (n, k) = z.shape();
            if labels.len() != n {
                return Err(CumiError::dim(
                    "softmax_cross_entropy",
                    format!("{n} rows but {} labels", labels.len()),
                ));
            }
            if let Some(&bad) = labels.iter().find(|&&y| y >= k) {
                return Err(CumiError::Contract(format!(
                    "label {bad} out of range for {k} classes"
                )));
            }
            let mut probs = Matrix::zeros(n, k);
            let mut loss = 0.0;
            for (r, &y) in labels.iter().enumerate() {
                let row = z.row(r);
                let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let denom: f64 = row.iter().map(|v| (v - max).exp()).sum();
                for (c, v) in row.iter().enumerate() {
                    probs.set(r, c, (v - max).exp() / denom);
                }
                loss += denom.ln() - (row[y] - max);
            }
            (probs, loss / n.max(1) as f64)
        };
        Ok(self.push(
            Matrix::scalar(loss),
            Op::SoftmaxCrossEntropy {
                logits,
                probs,
                labels: labels.to_vec(),
            },
        ))
    }

    /// Mean squared difference of two equal-shape nodes.
    pub fn mse(&self, a: Var, b: Var) -> Result<Var> {
        let d = self.sub(a, b)?;
        let sq = self.hadamard(d, d)?;
        Ok(self.mean(sq))
    }

    /// Accumulates `∂loss/∂node` into every node reachable from `loss`.
    /// Calling it twice without [`Tape::zero_grad`] doubles the gradients.
    pub fn backward(&self, loss: Var) -> Result<()> {
        let mut nodes = self.nodes.borrow_mut();
        if nodes[loss.0].value.shape() != (1, 1) {
            let (r, c) = nodes[loss.0].value.shape();
            return Err(CumiError::Contract(format!(
                "backward needs a 1x1 loss, got {r}x{c}"
            )));
        }
        let mut local: Vec<Option<Matrix>> = (0..=loss.0).map(|_| None).collect();
        local[loss.0] = Some(Matrix::scalar(1.0));

        for i in (0..=loss.0).rev() {
            let Some(g) = local[i].take() else { continue };
            backprop(&nodes, i, &g, &mut local);
            nodes[i].grad.axpy(1.0, &g);
        }
        Ok(())
    }
}

fn accumulate(local: &mut [Option<Matrix>], v: Var, g: Matrix) {
    match &mut local[v.0] {
        Some(acc) => acc.axpy(1.0, &g),
        slot @ None => *slot = Some(g),
    }
}

fn backprop(nodes: &[Node], i: usize, g: &Matrix, local: &mut [Option<Matrix>]) {
    let val = |v: Var| &nodes[v.0].value;
    match &nodes[i].op {
        Op::Leaf => {}
        Op::MatMul(a, b) => {
            let ga = g.matmul(&val(*b).transpose()).expect("matmul grad shape");
            let gb = val(*a).transpose().matmul(g).expect("matmul grad shape");
            accumulate(local, *a, ga);
            accumulate(local, *b, gb);
        }
        Op::Add(a, b) => {
            accumulate(local, *a, g.clone());
            accumulate(local, *b, g.clone());
        }
        Op::Sub(a, b) => {
            accumulate(local, *a, g.clone());
            accumulate(local, *b, g.scale(-1.0));
        }
        Op::Hadamard(a, b) => {
            let ga = g.hadamard(val(*b)).expect("hadamard grad shape");
            let gb = g.hadamard(val(*a)).expect("hadamard grad shape");
            accumulate(local, *a, ga);
            accumulate(local, *b, gb);
        }
        Op::AddRow(x, row) => {
            let k = g.cols();
            let mut gr = Matrix::zeros(1, k);
            for r in 0..g.rows() {
                for (acc, v) in gr.as_mut_slice().iter_mut().zip(g.row(r)) {
                    *acc += v;
                }
            }
            accumulate(local, *x, g.clone());
            accumulate(local, *row, gr);
        }
        Op::Relu(a) => {
            let x = val(*a);
            let data = g
                .as_slice()
                .iter()
                .zip(x.as_slice())
                .map(|(gv, xv)| if *xv > 0.0 { *gv } else { 0.0 })
                .collect();
            accumulate(
                local,
                *a,
                Matrix::from_vec_unchecked(g.rows(), g.cols(), data),
            );
        }
        Op::Scale(a, c) => accumulate(local, *a, g.scale(*c)),
        Op::Sum(a) => {
            let (r, c) = val(*a).shape();
            accumulate(local, *a, Matrix::filled(r, c, g.item()));
        }
        Op::Mean(a) => {
            let (r, c) = val(*a).shape();
            let n = (r * c).max(1) as f64;
            accumulate(local, *a, Matrix::filled(r, c, g.item() / n));
        }
        Op::Log2(a) => {
            let x = val(*a);
            let data = g
                .as_slice()
                .iter()
                .zip(x.as_slice())
                .map(|(gv, xv)| gv / (xv * LN_2))
                .collect();
            accumulate(
                local,
                *a,
                Matrix::from_vec_unchecked(g.rows(), g.cols(), data),
            );
        }
        Op::HCat(parts) => {
            let mut start = 0;
            for p in parts {
                let w = val(*p).cols();
                accumulate(local, *p, g.column_block(start, w));
                start += w;
            }
        }
        Op::TraceNormalize(a) => {
            let x = val(*a);
            let t = x.trace();
            let inner: f64 = g
                .as_slice()
                .iter()
                .zip(x.as_slice())
                .map(|(p, q)| p * q)
                .sum();
            let mut ga = g.scale(1.0 / t);
            let shift = inner / (t * t);
            for d in 0..ga.rows() {
                let v = ga.get(d, d);
                ga.set(d, d, v - shift);
            }
            accumulate(local, *a, ga);
        }
        Op::GaussianGram { x, sigma, kernel } => {
            let xv = val(*x);
            let (n, d) = xv.shape();
            let inv_n = 1.0 / n as f64;
            let inv_s2 = 1.0 / (sigma * sigma);
            let mut gx = Matrix::zeros(n, d);
            for m in 0..n {
                let xm = xv.row(m);
                let out = &mut gx.as_mut_slice()[m * d..(m + 1) * d];
                for j in 0..n {
                    if j == m {
                        continue;
                    }
                    let s = (g.get(m, j) + g.get(j, m)) * kernel.get(m, j) * inv_n;
                    if s == 0.0 {
                        continue;
                    }
                    let xj = xv.row(j);
                    for c in 0..d {
                        out[c] -= inv_s2 * s * (xm[c] - xj[c]);
                    }
                }
            }
            accumulate(local, *x, gx);
        }
        Op::Spectral {
            a,
            vectors,
            weights,
        } => {
            let n = weights.len();
            let scale = g.item();
            let mut ga = Matrix::zeros(n, n);
            for r in 0..n {
                for c in r..n {
                    let mut acc = 0.0;
                    for (m, w) in weights.iter().enumerate() {
                        acc += vectors.get(r, m) * w * vectors.get(c, m);
                    }
                    ga.set(r, c, scale * acc);
                    ga.set(c, r, scale * acc);
                }
            }
            accumulate(local, *a, ga);
        }
        Op::SoftmaxCrossEntropy {
            logits,
            probs,
            labels,
        } => {
            let n = labels.len().max(1) as f64;
            let mut gl = probs.clone();
            for (r, &y) in labels.iter().enumerate() {
                let v = gl.get(r, y);
                gl.set(r, y, v - 1.0);
            }
            accumulate(local, *logits, gl.scale(g.item() / n));
        }
    }
}
