//! Matrix-valued reverse-mode tape.
//!
//! Operations append nodes to a [`Tape`]; [`Tape::backward`] sweeps the
//! trace in reverse accumulating adjoints. Each differentiation call owns
//! its tape, so there is no shared mutable state between evaluations.
//!
//! Errors do not interrupt graph construction: the first shape mismatch or
//! non-finite value is recorded on the tape and surfaced by
//! [`Tape::check`]. Kinked primitives (ReLU, leaky ReLU, absolute value,
//! clamp, sorting) record the branch they took so finite-difference reports
//! can detect perturbations that cross a kink.

use std::cell::{Ref, RefCell};

use crate::error::{Error, Result};
use crate::linalg;
use crate::matrix::Matrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
enum Op<T> {
    Leaf,
    Constant,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize),
    AddRow(usize, usize),
    MulRow(usize, usize),
    MulScalar(usize, usize),
    AddScalarVar(usize, usize),
    Scale(usize, T),
    Shift(usize),
    MatMul(usize, usize),
    Transpose(usize),
    Tanh(usize),
    Sigmoid(usize),
    Relu(usize),
    LeakyRelu(usize, T),
    Abs(usize),
    Square(usize),
    Sqrt(usize),
    Ln(usize),
    Exp(usize),
    Clamp(usize, T, T),
    Sum(usize),
    MeanRows(usize),
    SumCols(usize),
    Slice(usize, usize),
    Gather(usize, Vec<usize>),
    HCat(Vec<usize>),
    QuadFormInv {
        d: usize,
        m: usize,
        solution: Vec<T>,
    },
}

impl<T> Op<T> {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Constant => "constant",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Div(..) => "div",
            Op::AddRow(..) => "add_row",
            Op::MulRow(..) => "mul_row",
            Op::MulScalar(..) => "mul_scalar",
            Op::AddScalarVar(..) => "add_scalar",
            Op::Scale(..) => "scale",
            Op::Shift(..) => "shift",
            Op::MatMul(..) => "matmul",
            Op::Transpose(..) => "transpose",
            Op::Tanh(..) => "tanh",
            Op::Sigmoid(..) => "sigmoid",
            Op::Relu(..) => "relu",
            Op::LeakyRelu(..) => "leaky_relu",
            Op::Abs(..) => "abs",
            Op::Square(..) => "square",
            Op::Sqrt(..) => "sqrt",
            Op::Ln(..) => "ln",
            Op::Exp(..) => "exp",
            Op::Clamp(..) => "clamp",
            Op::Sum(..) => "sum",
            Op::MeanRows(..) => "mean_rows",
            Op::SumCols(..) => "sum_cols",
            Op::Slice(..) => "slice",
            Op::Gather(..) => "gather",
            Op::HCat(..) => "hcat",
            Op::QuadFormInv { .. } => "quad_form_inv",
        }
    }
}

struct Node<T> {
    value: Matrix<T>,
    op: Op<T>,
}

/// Operation trace for one evaluation.
pub struct Tape<T> {
    nodes: RefCell<Vec<Node<T>>>,
    error: RefCell<Option<Error>>,
    branches: RefCell<Vec<u64>>,
}

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t, T> {
    tape: &'t Tape<T>,
    id: usize,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Self {
            nodes: RefCell::new(Vec::new()),
            error: RefCell::new(None),
            branches: RefCell::new(Vec::new()),
        }
    }

    /// Differentiable input.
    pub fn leaf(&self, value: Matrix<T>) -> Var<'_, T> {
        self.push(value, Op::Leaf)
    }

    /// Input treated as constant (gradient stops here).
    pub fn constant(&self, value: Matrix<T>) -> Var<'_, T> {
        self.push(value, Op::Constant)
    }

    pub fn scalar(&self, value: T) -> Var<'_, T> {
        self.constant(Matrix::scalar(value))
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Records an error unless one is already pending.
    pub fn fail(&self, err: Error) {
        let mut slot = self.error.borrow_mut();
        if slot.is_none() {
            *slot = Some(err);
        }
    }

    /// First recorded error, if any.
    pub fn check(&self) -> Result<()> {
        match self.error.borrow().as_ref() {
            Some(e) => Err(e.clone()),
            None => Ok(()),
        }
    }

    /// Branch decisions taken by kinked primitives, in evaluation order.
    pub fn branch_signature(&self) -> Vec<u64> {
        self.branches.borrow().clone()
    }

    fn record_branch(&self, code: u64) {
        self.branches.borrow_mut().push(code);
    }

    fn push(&self, value: Matrix<T>, op: Op<T>) -> Var<'_, T> {
        if !value.is_finite() {
            self.fail(Error::NonFinite {
                primitive: op.name().to_string(),
            });
        }
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { value, op });
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    fn value_ref(&self, id: usize) -> Ref<'_, Matrix<T>> {
        Ref::map(self.nodes.borrow(), |n| &n[id].value)
    }

    fn shape_of(&self, id: usize) -> (usize, usize) {
        self.nodes.borrow()[id].value.shape()
    }

    fn shape_error(&self, op: &str, a: (usize, usize), b: (usize, usize)) {
        self.fail(Error::Config(format!(
            "shape mismatch in `{op}`: {}x{} vs {}x{}",
            a.0, a.1, b.0, b.1
        )));
    }

    /// Reverse sweep seeded with `seed` at `output`.
    pub fn backward(&self, output: Var<'_, T>, seed: Matrix<T>) -> Gradients<T> {
        let nodes = self.nodes.borrow();
        let n = output.id + 1;
        let mut adj: Vec<Option<Matrix<T>>> = vec![None; n];
        if seed.shape() != nodes[output.id].value.shape() {
            self.shape_error(
                "backward seed",
                seed.shape(),
                nodes[output.id].value.shape(),
            );
            return Gradients { adj };
        }
        adj[output.id] = Some(seed);
        for id in (0..n).rev() {
            let Some(g) = adj[id].take() else { continue };
            let node = &nodes[id];
            let val = &node.value;
            match &node.op {
                Op::Leaf | Op::Constant => {
                    adj[id] = Some(g);
                    continue;
                }
                Op::Add(a, b) => {
                    accumulate(&mut adj, &nodes, *a, g.clone());
                    accumulate(&mut adj, &nodes, *b, g);
                }
                Op::Sub(a, b) => {
                    accumulate(&mut adj, &nodes, *b, g.scale(-T::one()));
                    accumulate(&mut adj, &nodes, *a, g);
                }
                Op::Mul(a, b) => {
                    let ga = g.zip_map(&nodes[*b].value, |x, y| x * y);
                    let gb = g.zip_map(&nodes[*a].value, |x, y| x * y);
                    accumulate(&mut adj, &nodes, *a, ga);
                    accumulate(&mut adj, &nodes, *b, gb);
                }
                Op::Div(a, b) => {
                    let bv = &nodes[*b].value;
                    let ga = g.zip_map(bv, |x, y| x / y);
                    let gb = Matrix::from_fn(g.rows(), g.cols(), |i, j| {
                        -g[(i, j)] * val[(i, j)] / bv[(i, j)]
                    });
                    accumulate(&mut adj, &nodes, *a, ga);
                    accumulate(&mut adj, &nodes, *b, gb);
                }
                Op::AddRow(a, row) => {
                    let gr = g.column_means().scale(T::of_usize(g.rows()));
                    accumulate(&mut adj, &nodes, *row, gr);
                    accumulate(&mut adj, &nodes, *a, g);
                }
                Op::MulRow(a, row) => {
                    let rv = &nodes[*row].value;
                    let av = &nodes[*a].value;
                    let ga = Matrix::from_fn(g.rows(), g.cols(), |i, j| g[(i, j)] * rv[(0, j)]);
                    let mut gr = Matrix::zeros(1, g.cols());
                    for i in 0..g.rows() {
                        for j in 0..g.cols() {
                            gr[(0, j)] = gr[(0, j)] + g[(i, j)] * av[(i, j)];
                        }
                    }
                    accumulate(&mut adj, &nodes, *a, ga);
                    accumulate(&mut adj, &nodes, *row, gr);
                }
                Op::MulScalar(a, s) => {
                    let sv = nodes[*s].value.item();
                    let gs = g.dot(&nodes[*a].value);
                    accumulate(&mut adj, &nodes, *a, g.scale(sv));
                    accumulate(&mut adj, &nodes, *s, Matrix::scalar(gs));
                }
                Op::AddScalarVar(a, s) => {
                    accumulate(&mut adj, &nodes, *s, Matrix::scalar(g.sum()));
                    accumulate(&mut adj, &nodes, *a, g);
                }
                Op::Scale(a, c) => accumulate(&mut adj, &nodes, *a, g.scale(*c)),
                Op::Shift(a) => accumulate(&mut adj, &nodes, *a, g),
                Op::MatMul(a, b) => {
                    let ga = g.matmul_t(&nodes[*b].value);
                    let gb = nodes[*a].value.t_matmul(&g);
                    accumulate(&mut adj, &nodes, *a, ga);
                    accumulate(&mut adj, &nodes, *b, gb);
                }
                Op::Transpose(a) => accumulate(&mut adj, &nodes, *a, g.transpose()),
                Op::Tanh(a) => {
                    let ga = g.zip_map(val, |x, t| x * (T::one() - t * t));
                    accumulate(&mut adj, &nodes, *a, ga);
                }
                Op::Sigmoid(a) => {
                    let ga = g.zip_map(val, |x, s| x * s * (T::one() - s));
                    accumulate(&mut adj, &nodes, *a, ga);
                }
                Op::Relu(a) => {
                    let ga = g.zip_map(
                        &nodes[*a].value,
                        |x, u| if u > T::zero() { x } else { T::zero() },
                    );
                    accumulate(&mut adj, &nodes, *a, ga);
                }
                Op::LeakyRelu(a, slope) => {
                    let s = *slope;
                    let ga = g.zip_map(
                        &nodes[*a].value,
                        |x, u| if u > T::zero() { x } else { x * s },
                    );
                    accumulate(&mut adj, &nodes, *a, ga);
                }
                Op::Abs(a) => {
                    let ga = g.zip_map(&nodes[*a].value, |x, u| {
                        if u > T::zero() {
                            x
                        } else if u < T::zero() {
                            -x
                        } else {
                            T::zero()
                        }
                    });
                    accumulate(&mut adj, &nodes, *a, ga);
                }
                Op::Square(a) => {
                    let ga = g.zip_map(&nodes[*a].value, |x, u| T::two() * x * u);
                    accumulate(&mut adj, &nodes, *a, ga);
                }
                Op::Sqrt(a) => {
                    let ga = g.zip_map(val, |x, r| {
                        if r > T::zero() {
                            x / (T::two() * r)
                        } else {
                            T::zero()
                        }
                    });
                    accumulate(&mut adj, &nodes, *a, ga);
                }
                Op::Ln(a) => {
                    let ga = g.zip_map(&nodes[*a].value, |x, u| x / u);
                    accumulate(&mut adj, &nodes, *a, ga);
                }
                Op::Exp(a) => {
                    let ga = g.zip_map(val, |x, e| x * e);
                    accumulate(&mut adj, &nodes, *a, ga);
                }
                Op::Clamp(a, lo, hi) => {
                    let (lo, hi) = (*lo, *hi);
                    let ga = g.zip_map(&nodes[*a].value, |x, u| {
                        if u > lo && u < hi {
                            x
                        } else {
                            T::zero()
                        }
                    });
                    accumulate(&mut adj, &nodes, *a, ga);
                }
                Op::Sum(a) => {
                    let (r, c) = nodes[*a].value.shape();
                    accumulate(&mut adj, &nodes, *a, Matrix::filled(r, c, g.item()));
                }
                Op::MeanRows(a) => {
                    let (r, c) = nodes[*a].value.shape();
                    let inv = T::one() / T::of_usize(r);
                    let ga = Matrix::from_fn(r, c, |_, j| g[(0, j)] * inv);
                    accumulate(&mut adj, &nodes, *a, ga);
                }
                Op::SumCols(a) => {
                    let (r, c) = nodes[*a].value.shape();
                    let ga = Matrix::from_fn(r, c, |i, _| g[(i, 0)]);
                    accumulate(&mut adj, &nodes, *a, ga);
                }
                Op::Slice(a, offset) => {
                    let (r, c) = nodes[*a].value.shape();
                    let mut ga = Matrix::zeros(r, c);
                    ga.as_mut_slice()[*offset..*offset + g.len()].copy_from_slice(g.as_slice());
                    accumulate(&mut adj, &nodes, *a, ga);
                }
                Op::Gather(a, idx) => {
                    let (r, c) = nodes[*a].value.shape();
                    let mut ga = Matrix::zeros(r, c);
                    let dst = ga.as_mut_slice();
                    for (k, &src) in idx.iter().enumerate() {
                        dst[src] = dst[src] + g.as_slice()[k];
                    }
                    accumulate(&mut adj, &nodes, *a, ga);
                }
                Op::HCat(parts) => {
                    let mut col = 0;
                    for &p in parts {
                        let (r, c) = nodes[p].value.shape();
                        let gp = Matrix::from_fn(r, c, |i, j| g[(i, col + j)]);
                        col += c;
                        accumulate(&mut adj, &nodes, p, gp);
                    }
                }
                Op::QuadFormInv { d, m, solution } => {
                    // value = dᵀ A⁻¹ d with A = M + λI; u = A⁻¹ d
                    let s = g.item();
                    let k = solution.len();
                    let gd = Matrix::column(solution.iter().map(|&u| T::two() * s * u).collect());
                    let gm = Matrix::from_fn(k, k, |i, j| -s * solution[i] * solution[j]);
                    accumulate(&mut adj, &nodes, *d, gd);
                    accumulate(&mut adj, &nodes, *m, gm);
                }
            }
        }
        for (id, a) in adj.iter().enumerate() {
            if let Some(a) = a {
                if !a.is_finite() {
                    self.fail(Error::NonFinite {
                        primitive: format!("backward:{}", nodes[id].op.name()),
                    });
                    break;
                }
            }
        }
        Gradients { adj }
    }
}

fn accumulate<T: Scalar>(
    adj: &mut [Option<Matrix<T>>],
    nodes: &[Node<T>],
    id: usize,
    g: Matrix<T>,
) {
    if matches!(nodes[id].op, Op::Constant) {
        return;
    }
    match &mut adj[id] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

/// Adjoints from one reverse sweep.
pub struct Gradients<T> {
    adj: Vec<Option<Matrix<T>>>,
}

impl<T: Scalar> Gradients<T> {
    /// Gradient with respect to `var`; zeros when the output does not
    /// depend on it.
    pub fn wrt(&self, var: Var<'_, T>) -> Matrix<T> {
        match self.adj.get(var.id).and_then(Option::as_ref) {
            Some(g) => g.clone(),
            None => {
                let (r, c) = var.shape();
                Matrix::zeros(r, c)
            }
        }
    }
}

macro_rules! binary_same_shape {
    ($name:ident, $op:ident, $f:expr) => {
        pub fn $name(self, other: Var<'t, T>) -> Var<'t, T> {
            let tape = self.tape;
            let (sa, sb) = (tape.shape_of(self.id), tape.shape_of(other.id));
            if sa != sb {
                tape.shape_error(stringify!($name), sa, sb);
                return tape.push(Matrix::zeros(sa.0, sa.1), Op::$op(self.id, other.id));
            }
            let value = {
                let a = tape.value_ref(self.id);
                let b = tape.value_ref(other.id);
                a.zip_map(&b, $f)
            };
            tape.push(value, Op::$op(self.id, other.id))
        }
    };
}

macro_rules! unary_map {
    ($name:ident, $op:ident, $f:expr) => {
        pub fn $name(self) -> Var<'t, T> {
            let value = self.tape.value_ref(self.id).map($f);
            self.tape.push(value, Op::$op(self.id))
        }
    };
}

impl<'t, T: Scalar> Var<'t, T> {
    pub fn tape(&self) -> &'t Tape<T> {
        self.tape
    }

    pub fn shape(&self) -> (usize, usize) {
        self.tape.shape_of(self.id)
    }

    pub fn rows(&self) -> usize {
        self.shape().0
    }

    pub fn cols(&self) -> usize {
        self.shape().1
    }

    /// Copy of the current value.
    pub fn value(&self) -> Matrix<T> {
        self.tape.value_ref(self.id).clone()
    }

    pub fn with_value<R>(&self, f: impl FnOnce(&Matrix<T>) -> R) -> R {
        f(&self.tape.value_ref(self.id))
    }

    /// Value of a 1×1 node.
    pub fn item(&self) -> T {
        self.tape.value_ref(self.id).as_slice()[0]
    }

    binary_same_shape!(add, Add, |a, b| a + b);
    binary_same_shape!(sub, Sub, |a, b| a - b);
    binary_same_shape!(mul, Mul, |a, b| a * b);
    binary_same_shape!(div, Div, |a, b| a / b);

    unary_map!(tanh, Tanh, |x: T| x.tanh());
    unary_map!(sigmoid, Sigmoid, |x: T| T::one() / (T::one() + (-x).exp()));
    unary_map!(square, Square, |x: T| x * x);
    unary_map!(sqrt, Sqrt, |x: T| x.sqrt());
    unary_map!(ln, Ln, |x: T| x.ln());
    unary_map!(exp, Exp, |x: T| x.exp());

    /// ReLU with subgradient 0 at the kink.
    pub fn relu(self) -> Var<'t, T> {
        let value = self.tape.value_ref(self.id).map(|x| x.max(T::zero()));
        self.record_signs();
        self.tape.push(value, Op::Relu(self.id))
    }

    /// Leaky ReLU; at 0 the derivative is `slope`.
    pub fn leaky_relu(self, slope: T) -> Var<'t, T> {
        let value = self
            .tape
            .value_ref(self.id)
            .map(|x| if x > T::zero() { x } else { x * slope });
        self.record_signs();
        self.tape.push(value, Op::LeakyRelu(self.id, slope))
    }

    /// Absolute value with subgradient 0 at the kink.
    pub fn abs(self) -> Var<'t, T> {
        let value = self.tape.value_ref(self.id).map(|x| x.abs());
        self.record_signs();
        self.tape.push(value, Op::Abs(self.id))
    }

    pub fn clamp(self, lo: T, hi: T) -> Var<'t, T> {
        let value = {
            let v = self.tape.value_ref(self.id);
            for &x in v.as_slice() {
                self.tape.record_branch(if x <= lo {
                    0
                } else if x >= hi {
                    2
                } else {
                    1
                });
            }
            v.map(|x| x.max(lo).min(hi))
        };
        self.tape.push(value, Op::Clamp(self.id, lo, hi))
    }

    fn record_signs(&self) {
        let v = self.tape.value_ref(self.id);
        for &x in v.as_slice() {
            self.tape.record_branch(if x > T::zero() {
                2
            } else if x < T::zero() {
                0
            } else {
                1
            });
        }
    }

    pub fn neg(self) -> Var<'t, T> {
        self.scale(-T::one())
    }

    pub fn scale(self, c: T) -> Var<'t, T> {
        let value = self.tape.value_ref(self.id).scale(c);
        self.tape.push(value, Op::Scale(self.id, c))
    }

    pub fn shift(self, c: T) -> Var<'t, T> {
        let value = self.tape.value_ref(self.id).map(|x| x + c);
        self.tape.push(value, Op::Shift(self.id))
    }

    /// Broadcasts a 1×cols row over every row of `self`.
    pub fn add_row(self, row: Var<'t, T>) -> Var<'t, T> {
        self.row_broadcast(row, false)
    }

    /// Multiplies every row of `self` elementwise by a 1×cols row.
    pub fn mul_row(self, row: Var<'t, T>) -> Var<'t, T> {
        self.row_broadcast(row, true)
    }

    fn row_broadcast(self, row: Var<'t, T>, multiply: bool) -> Var<'t, T> {
        let tape = self.tape;
        let (sa, sr) = (self.shape(), row.shape());
        let op = if multiply {
            Op::MulRow(self.id, row.id)
        } else {
            Op::AddRow(self.id, row.id)
        };
        if sr != (1, sa.1) {
            tape.shape_error(op.name(), sa, sr);
            return tape.push(Matrix::zeros(sa.0, sa.1), op);
        }
        let value = {
            let a = tape.value_ref(self.id);
            let r = tape.value_ref(row.id);
            Matrix::from_fn(sa.0, sa.1, |i, j| {
                if multiply {
                    a[(i, j)] * r[(0, j)]
                } else {
                    a[(i, j)] + r[(0, j)]
                }
            })
        };
        tape.push(value, op)
    }

    /// Multiplies by a 1×1 node.
    pub fn mul_scalar(self, s: Var<'t, T>) -> Var<'t, T> {
        let tape = self.tape;
        if s.shape() != (1, 1) {
            tape.shape_error("mul_scalar", self.shape(), s.shape());
        }
        let sv = s.item();
        let value = tape.value_ref(self.id).scale(sv);
        tape.push(value, Op::MulScalar(self.id, s.id))
    }

    /// Adds a 1×1 node to every entry.
    pub fn add_scalar(self, s: Var<'t, T>) -> Var<'t, T> {
        let tape = self.tape;
        if s.shape() != (1, 1) {
            tape.shape_error("add_scalar", self.shape(), s.shape());
        }
        let sv = s.item();
        let value = tape.value_ref(self.id).map(|x| x + sv);
        tape.push(value, Op::AddScalarVar(self.id, s.id))
    }

    pub fn matmul(self, other: Var<'t, T>) -> Var<'t, T> {
        let tape = self.tape;
        let (sa, sb) = (self.shape(), other.shape());
        if sa.1 != sb.0 {
            tape.shape_error("matmul", sa, sb);
            return tape.push(Matrix::zeros(sa.0, sb.1), Op::MatMul(self.id, other.id));
        }
        let value = {
            let a = tape.value_ref(self.id);
            let b = tape.value_ref(other.id);
            a.matmul(&b)
        };
        tape.push(value, Op::MatMul(self.id, other.id))
    }

    pub fn transpose(self) -> Var<'t, T> {
        let value = self.tape.value_ref(self.id).transpose();
        self.tape.push(value, Op::Transpose(self.id))
    }

    /// Sum of all entries as a 1×1 node.
    pub fn sum(self) -> Var<'t, T> {
        let value = Matrix::scalar(self.tape.value_ref(self.id).sum());
        self.tape.push(value, Op::Sum(self.id))
    }

    pub fn mean(self) -> Var<'t, T> {
        let n = T::of_usize(self.tape.value_ref(self.id).len());
        self.sum().scale(T::one() / n)
    }

    /// Column means: rows×cols → 1×cols.
    pub fn mean_rows(self) -> Var<'t, T> {
        let value = self.tape.value_ref(self.id).column_means();
        self.tape.push(value, Op::MeanRows(self.id))
    }

    /// Row sums: rows×cols → rows×1.
    pub fn sum_cols(self) -> Var<'t, T> {
        let value = {
            let v = self.tape.value_ref(self.id);
            Matrix::column(
                (0..v.rows())
                    .map(|i| v.row_slice(i).iter().copied().sum())
                    .collect(),
            )
        };
        self.tape.push(value, Op::SumCols(self.id))
    }

    /// Squared Euclidean norm of all entries.
    pub fn norm_sq(self) -> Var<'t, T> {
        self.square().sum()
    }

    /// Frobenius inner product as a 1×1 node.
    pub fn inner(self, other: Var<'t, T>) -> Var<'t, T> {
        self.mul(other).sum()
    }

    /// Contiguous run of `rows * cols` entries starting at `offset`,
    /// reshaped row-major.
    pub fn slice(self, offset: usize, rows: usize, cols: usize) -> Var<'t, T> {
        let tape = self.tape;
        let total = tape.value_ref(self.id).len();
        if offset + rows * cols > total {
            tape.fail(Error::Config(format!(
                "slice [{offset}, {}) out of range for length {total}",
                offset + rows * cols
            )));
            return tape.push(Matrix::zeros(rows, cols), Op::Slice(self.id, 0));
        }
        let value = {
            let v = tape.value_ref(self.id);
            Matrix::from_vec(
                rows,
                cols,
                v.as_slice()[offset..offset + rows * cols].to_vec(),
            )
        };
        tape.push(value, Op::Slice(self.id, offset))
    }

    /// Column `j` as a rows×1 node.
    pub fn column(self, j: usize) -> Var<'t, T> {
        let (r, c) = self.shape();
        let idx = (0..r).map(|i| i * c + j).collect();
        self.gather(idx, r, 1)
    }

    /// Picks flat (row-major) entries `idx` into a rows×cols result.
    pub fn gather(self, idx: Vec<usize>, rows: usize, cols: usize) -> Var<'t, T> {
        let tape = self.tape;
        assert_eq!(idx.len(), rows * cols, "gather index count mismatch");
        let value = {
            let v = tape.value_ref(self.id);
            let src = v.as_slice();
            if let Some(&bad) = idx.iter().find(|&&i| i >= src.len()) {
                drop(v);
                tape.fail(Error::Config(format!("gather index {bad} out of range")));
                return tape.push(
                    Matrix::zeros(rows, cols),
                    Op::Gather(self.id, vec![0; rows * cols]),
                );
            }
            Matrix::from_vec(rows, cols, idx.iter().map(|&i| src[i]).collect())
        };
        tape.push(value, Op::Gather(self.id, idx))
    }

    /// Entries sorted ascending within each column. The permutation is a
    /// kink: it is recorded in the branch signature.
    pub fn sort_columns(self) -> Var<'t, T> {
        let (r, c) = self.shape();
        let mut idx = vec![0; r * c];
        {
            let v = self.tape.value_ref(self.id);
            for j in 0..c {
                let mut order: Vec<usize> = (0..r).collect();
                order.sort_by(|&a, &b| {
                    v[(a, j)]
                        .partial_cmp(&v[(b, j)])
                        .unwrap_or(std::cmp::Ordering::Equal)
                        .then(a.cmp(&b))
                });
                for (i, &src) in order.iter().enumerate() {
                    idx[i * c + j] = src * c + j;
                }
            }
        }
        for &i in &idx {
            self.tape.record_branch(i as u64);
        }
        self.gather(idx, r, c)
    }

    /// Horizontal concatenation of nodes with equal row counts.
    pub fn hcat(parts: &[Var<'t, T>]) -> Var<'t, T> {
        let tape = parts[0].tape;
        let rows = parts[0].rows();
        let ids: Vec<usize> = parts.iter().map(|p| p.id).collect();
        if let Some(bad) = parts.iter().find(|p| p.rows() != rows) {
            tape.shape_error("hcat", parts[0].shape(), bad.shape());
            return tape.push(Matrix::zeros(rows, 0), Op::HCat(ids));
        }
        let cols: usize = parts.iter().map(Var::cols).sum();
        let value = {
            let vals: Vec<_> = parts.iter().map(|p| tape.value_ref(p.id)).collect();
            let mut m = Matrix::zeros(rows, cols);
            let mut off = 0;
            for v in &vals {
                for i in 0..rows {
                    for j in 0..v.cols() {
                        m[(i, off + j)] = v[(i, j)];
                    }
                }
                off += v.cols();
            }
            m
        };
        tape.push(value, Op::HCat(ids))
    }

    /// `dᵀ (M + damping·I)⁻¹ d` for a K×1 vector `self` and symmetric K×K `m`.
    ///
    /// A singular shifted matrix records [`Error::RankDeficient`] on the tape.
    pub fn quad_form_inv(self, m: Var<'t, T>, damping: T) -> Var<'t, T> {
        let tape = self.tape;
        let (sd, sm) = (self.shape(), m.shape());
        if sd.1 != 1 || sm != (sd.0, sd.0) {
            tape.shape_error("quad_form_inv", sd, sm);
            return tape.push(
                Matrix::scalar(T::zero()),
                Op::QuadFormInv {
                    d: self.id,
                    m: m.id,
                    solution: vec![T::zero(); sd.0],
                },
            );
        }
        let d = self.value();
        let mv = m.value();
        let solution = match linalg::solve_sym(&mv, damping, d.as_slice()) {
            Ok(u) => u,
            Err(e) => {
                tape.fail(e);
                vec![T::zero(); sd.0]
            }
        };
        let value = d
            .as_slice()
            .iter()
            .zip(&solution)
            .fold(T::zero(), |acc, (&a, &b)| acc + a * b);
        tape.push(
            Matrix::scalar(value),
            Op::QuadFormInv {
                d: self.id,
                m: m.id,
                solution,
            },
        )
    }
}

impl<'t, T: Scalar> std::ops::Add for Var<'t, T> {
    type Output = Var<'t, T>;
    fn add(self, rhs: Self) -> Self::Output {
        Var::add(self, rhs)
    }
}

impl<'t, T: Scalar> std::ops::Sub for Var<'t, T> {
    type Output = Var<'t, T>;
    fn sub(self, rhs: Self) -> Self::Output {
        Var::sub(self, rhs)
    }
}

impl<'t, T: Scalar> std::ops::Mul for Var<'t, T> {
    type Output = Var<'t, T>;
    fn mul(self, rhs: Self) -> Self::Output {
        Var::mul(self, rhs)
    }
}

impl<'t, T: Scalar> std::ops::Div for Var<'t, T> {
    type Output = Var<'t, T>;
    fn div(self, rhs: Self) -> Self::Output {
        Var::div(self, rhs)
    }
}

impl<'t, T: Scalar> std::ops::Neg for Var<'t, T> {
    type Output = Var<'t, T>;
    fn neg(self) -> Self::Output {
        Var::neg(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grad_of(
        f: impl for<'t> Fn(Var<'t, f64>) -> Var<'t, f64>,
        x: Matrix<f64>,
    ) -> (f64, Matrix<f64>) {
        let tape = Tape::new();
        let v = tape.leaf(x);
        let out = f(v);
        let g = tape.backward(out, Matrix::scalar(1.0));
        tape.check().unwrap();
        (out.item(), g.wrt(v))
    }

    #[test]
    fn quadratic_gradient() {
        let (val, g) = grad_of(|x| x.norm_sq(), Matrix::column(vec![1.0, 2.0]));
        assert_eq!(val, 5.0);
        assert_eq!(g.as_slice(), &[2.0, 4.0]);
    }

    #[test]
    fn matmul_gradient_by_hand() {
        // f = sum(A x) with A fixed: grad = column sums of A
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        let tape = Tape::new();
        let x = tape.leaf(Matrix::column(vec![0.5, -1.0]));
        let out = tape.constant(a).matmul(x).sum();
        let g = tape.backward(out, Matrix::scalar(1.0)).wrt(x);
        assert_eq!(g.as_slice(), &[4.0, 6.0]);
    }

    #[test]
    fn constant_blocks_gradient() {
        let tape = Tape::new();
        let x = tape.leaf(Matrix::scalar(3.0));
        let c = tape.constant(Matrix::scalar(2.0));
        let out = (x * c).mul(c);
        let grads = tape.backward(out, Matrix::scalar(1.0));
        assert_eq!(grads.wrt(x).item(), 4.0);
        assert_eq!(grads.wrt(c).item(), 0.0);
    }

    #[test]
    fn shape_mismatch_is_recorded_not_panicking() {
        let tape = Tape::<f64>::new();
        let a = tape.leaf(Matrix::zeros(2, 2));
        let b = tape.leaf(Matrix::zeros(3, 1));
        let _ = a + b;
        assert!(matches!(tape.check(), Err(Error::Config(_))));
    }

    #[test]
    fn non_finite_names_the_primitive() {
        let tape = Tape::<f64>::new();
        let a = tape.leaf(Matrix::scalar(-1.0));
        let _ = a.ln();
        match tape.check() {
            Err(Error::NonFinite { primitive }) => assert_eq!(primitive, "ln"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn kinks_use_zero_subgradient() {
        let (_, g) = grad_of(
            |x| x.relu().sum() + x.abs().sum(),
            Matrix::column(vec![0.0, 2.0, -1.0]),
        );
        assert_eq!(g.as_slice(), &[0.0, 2.0, -1.0]);
    }

    #[test]
    fn sort_gradient_routes_back() {
        let (val, g) = grad_of(
            |x| {
                let s = x.sort_columns();
                let w = s.tape().constant(Matrix::column(vec![1.0, 10.0, 100.0]));
                s.inner(w)
            },
            Matrix::column(vec![3.0, 1.0, 2.0]),
        );
        assert_eq!(val, 1.0 + 20.0 + 300.0);
        assert_eq!(g.as_slice(), &[100.0, 1.0, 10.0]);
    }

    #[test]
    fn quad_form_inv_gradient_matches_closed_form() {
        // f(d) = dᵀ M⁻¹ d, grad = 2 M⁻¹ d
        let m = Matrix::from_rows(&[vec![2.0, 0.5], vec![0.5, 1.0]]);
        let tape = Tape::new();
        let d = tape.leaf(Matrix::column(vec![1.0, -1.0]));
        let mm = tape.leaf(m.clone());
        let out = d.quad_form_inv(mm, 0.0);
        let grads = tape.backward(out, Matrix::scalar(1.0));
        let u: Vec<f64> = linalg::solve_sym(&m, 0.0, &[1.0, -1.0]).unwrap();
        let gd: Matrix<f64> = grads.wrt(d);
        assert!((gd[(0, 0)] - 2.0 * u[0]).abs() < 1e-12);
        assert!((gd[(1, 0)] - 2.0 * u[1]).abs() < 1e-12);
        let gm: Matrix<f64> = grads.wrt(mm);
        assert!((gm[(0, 1)] + u[0] * u[1]).abs() < 1e-12);
    }
}
