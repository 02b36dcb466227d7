use crate::diff::tape::{Tape, Var};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::params::ParamVector;
use crate::scalar::Scalar;

/// One axis of an input or output shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dim {
    /// Any size (batch axis, or an empty input).
    Any,
    Fixed(usize),
}

impl Dim {
    fn admits(self, n: usize) -> bool {
        match self {
            Dim::Any => true,
            Dim::Fixed(m) => m == n,
        }
    }
}

/// Parameter length plus input and output shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Arity {
    pub params: usize,
    pub input: (Dim, Dim),
    pub output: (Dim, Dim),
}

impl Arity {
    /// Scalar objective of `params` parameters with an unconstrained input.
    pub fn scalar(params: usize) -> Self {
        Self {
            params,
            input: (Dim::Any, Dim::Any),
            output: (Dim::Fixed(1), Dim::Fixed(1)),
        }
    }

    /// Batched map ℝ^input_dim → ℝ^output_dim, one sample per row.
    pub fn batched(params: usize, input_dim: usize, output_dim: usize) -> Self {
        Self {
            params,
            input: (Dim::Any, Dim::Fixed(input_dim)),
            output: (Dim::Any, Dim::Fixed(output_dim)),
        }
    }
}

/// A differentiable map `(θ, input) ↦ output` expressed as tape primitives.
///
/// Implementations must be deterministic. Gradients exist everywhere except
/// on the kink sets of ReLU, leaky ReLU, absolute value, clamp (its
/// bounds) and sorting (ties), where the tape uses the documented
/// one-sided values.
pub trait DiffFunction<T: Scalar> {
    fn arity(&self) -> Arity;

    fn build<'t>(&self, tape: &'t Tape<T>, theta: Var<'t, T>, input: Var<'t, T>) -> Var<'t, T>;
}

impl<T: Scalar, F: DiffFunction<T> + ?Sized> DiffFunction<T> for &F {
    fn arity(&self) -> Arity {
        (**self).arity()
    }

    fn build<'t>(&self, tape: &'t Tape<T>, theta: Var<'t, T>, input: Var<'t, T>) -> Var<'t, T> {
        (**self).build(tape, theta, input)
    }
}

/// Scalar objective from a closure; the closure ignores or uses the input.
pub struct FnObjective<F> {
    params: usize,
    f: F,
}

impl<F> FnObjective<F> {
    pub fn new<T: Scalar>(params: usize, f: F) -> Self
    where
        F: for<'t> Fn(&'t Tape<T>, Var<'t, T>, Var<'t, T>) -> Var<'t, T>,
    {
        Self { params, f }
    }
}

impl<T, F> DiffFunction<T> for FnObjective<F>
where
    T: Scalar,
    F: for<'t> Fn(&'t Tape<T>, Var<'t, T>, Var<'t, T>) -> Var<'t, T>,
{
    fn arity(&self) -> Arity {
        Arity::scalar(self.params)
    }

    fn build<'t>(&self, tape: &'t Tape<T>, theta: Var<'t, T>, input: Var<'t, T>) -> Var<'t, T> {
        (self.f)(tape, theta, input)
    }
}

/// `f` under the linear change of parameters `θ = A⁻¹ θ′`: builds
/// `f(A⁻¹ θ′, input)` from `θ′`.
pub struct Reparametrized<F, T> {
    pub inner: F,
    pub a_inv: Matrix<T>,
}

impl<T: Scalar, F: DiffFunction<T>> DiffFunction<T> for Reparametrized<F, T> {
    fn arity(&self) -> Arity {
        self.inner.arity()
    }

    fn build<'t>(&self, tape: &'t Tape<T>, theta: Var<'t, T>, input: Var<'t, T>) -> Var<'t, T> {
        let original = tape.constant(self.a_inv.clone()).matmul(theta);
        self.inner.build(tape, original, input)
    }
}

fn check_inputs<T: Scalar>(arity: &Arity, theta_len: usize, input: &Matrix<T>) -> Result<()> {
    if theta_len != arity.params {
        return Err(Error::config(format!(
            "parameter vector has length {theta_len}, function expects {}",
            arity.params
        )));
    }
    let (r, c) = input.shape();
    if !arity.input.0.admits(r) || !arity.input.1.admits(c) {
        return Err(Error::config(format!(
            "input shape {r}x{c} does not match {:?}",
            arity.input
        )));
    }
    Ok(())
}

fn check_output<T: Scalar>(arity: &Arity, out: Var<'_, T>) -> Result<()> {
    let (r, c) = out.shape();
    if !arity.output.0.admits(r) || !arity.output.1.admits(c) {
        return Err(Error::config(format!(
            "output shape {r}x{c} does not match {:?}",
            arity.output
        )));
    }
    Ok(())
}

/// Plain evaluation.
pub fn evaluate<T: Scalar, F: DiffFunction<T> + ?Sized>(
    f: &F,
    theta: &[T],
    input: &Matrix<T>,
) -> Result<Matrix<T>> {
    let arity = f.arity();
    check_inputs(&arity, theta.len(), input)?;
    let tape = Tape::new();
    let th = tape.constant(Matrix::column(theta.to_vec()));
    let x = tape.constant(input.clone());
    let out = f.build(&tape, th, x);
    tape.check()?;
    check_output(&arity, out)?;
    Ok(out.value())
}

/// Value and gradient of a scalar objective.
pub fn grad_scalar<T: Scalar, F: DiffFunction<T> + ?Sized>(
    f: &F,
    theta: &ParamVector<T>,
    input: &Matrix<T>,
) -> Result<(T, Vec<T>)> {
    grad_scalar_raw(f, theta.values(), input)
}

/// [`grad_scalar`] on a bare slice.
pub fn grad_scalar_raw<T: Scalar, F: DiffFunction<T> + ?Sized>(
    f: &F,
    theta: &[T],
    input: &Matrix<T>,
) -> Result<(T, Vec<T>)> {
    let arity = f.arity();
    check_inputs(&arity, theta.len(), input)?;
    if arity.output != (Dim::Fixed(1), Dim::Fixed(1)) {
        return Err(Error::config("grad_scalar needs a scalar-valued function"));
    }
    let tape = Tape::new();
    let th = tape.leaf(Matrix::column(theta.to_vec()));
    let x = tape.constant(input.clone());
    let out = f.build(&tape, th, x);
    tape.check()?;
    check_output(&arity, out)?;
    let grads = tape.backward(out, Matrix::scalar(T::one()));
    tape.check()?;
    Ok((out.item(), grads.wrt(th).into_vec()))
}

/// Jacobian `∂g_i/∂θ_j` (n×d) of a batched map at a single latent `z`.
pub fn jacobian<T: Scalar, F: DiffFunction<T> + ?Sized>(
    g: &F,
    theta: &[T],
    z: &[T],
) -> Result<Matrix<T>> {
    let arity = g.arity();
    let input = Matrix::row(z.to_vec());
    check_inputs(&arity, theta.len(), &input)?;
    let tape = Tape::new();
    let th = tape.leaf(Matrix::column(theta.to_vec()));
    let x = tape.constant(input);
    let out = g.build(&tape, th, x);
    tape.check()?;
    check_output(&arity, out)?;
    let (r, n) = out.shape();
    if r != 1 {
        return Err(Error::config("jacobian expects one output row per latent"));
    }
    let d = theta.len();
    let mut jac = Matrix::zeros(n, d);
    for i in 0..n {
        let mut seed = Matrix::zeros(1, n);
        seed[(0, i)] = T::one();
        let gi = tape.backward(out, seed).wrt(th);
        jac.row_slice_mut(i).copy_from_slice(gi.as_slice());
    }
    tape.check()?;
    Ok(jac)
}

/// Per-coordinate outcome of a finite-difference comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordinateCheck<T> {
    pub analytic: T,
    pub numeric: T,
    pub rel_err: T,
    /// False when the ±step perturbation crosses a kink.
    pub comparable: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FiniteDiffReport<T> {
    pub max_rel_err: T,
    pub worst_coordinate: Option<usize>,
    pub coordinates: Vec<CoordinateCheck<T>>,
}

impl<T: Scalar> FiniteDiffReport<T> {
    pub fn non_comparable(&self) -> Vec<usize> {
        self.coordinates
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.comparable)
            .map(|(i, _)| i)
            .collect()
    }
}

fn value_and_signature<T: Scalar, F: DiffFunction<T> + ?Sized>(
    f: &F,
    theta: &[T],
    input: &Matrix<T>,
) -> (T, Vec<u64>) {
    let tape = Tape::new();
    let th = tape.constant(Matrix::column(theta.to_vec()));
    let x = tape.constant(input.clone());
    let out = f.build(&tape, th, x);
    (out.item(), tape.branch_signature())
}

/// Compares [`grad_scalar`] with central differences coordinate by coordinate.
///
/// The relative error of coordinate `i` is
/// `|a_i − n_i| / max(|a_i|, |n_i|, 1e-2·‖a‖_∞)`, so coordinates that are
/// tiny relative to the gradient are judged on the gradient's scale.
/// Coordinates whose perturbation changes the branch taken by a kinked
/// primitive are reported as non-comparable and excluded from the maximum.
pub fn finite_diff_check<T: Scalar, F: DiffFunction<T> + ?Sized>(
    f: &F,
    theta: &[T],
    input: &Matrix<T>,
    step: T,
) -> Result<FiniteDiffReport<T>> {
    assert!(step > T::zero(), "finite-difference step must be positive");
    let (_, grad) = grad_scalar_raw(f, theta, input)?;
    let (_, base_sig) = value_and_signature(f, theta, input);
    let scale = grad.iter().fold(T::zero(), |m, g| m.max(g.abs())) * T::of(1e-2);
    let mut coordinates = Vec::with_capacity(theta.len());
    let mut probe = theta.to_vec();
    for (i, &analytic) in grad.iter().enumerate() {
        probe[i] = theta[i] + step;
        let (fp, sig_p) = value_and_signature(f, &probe, input);
        probe[i] = theta[i] - step;
        let (fm, sig_m) = value_and_signature(f, &probe, input);
        probe[i] = theta[i];
        let numeric = (fp - fm) / (T::two() * step);
        let comparable = sig_p == base_sig && sig_m == base_sig;
        let denom = analytic.abs().max(numeric.abs()).max(scale);
        let diff = (analytic - numeric).abs();
        let rel_err = if denom > T::zero() {
            diff / denom
        } else {
            diff
        };
        coordinates.push(CoordinateCheck {
            analytic,
            numeric,
            rel_err,
            comparable,
        });
    }
    let mut max_rel_err = T::zero();
    let mut worst_coordinate = None;
    for (i, c) in coordinates.iter().enumerate() {
        if c.comparable && (worst_coordinate.is_none() || c.rel_err > max_rel_err) {
            max_rel_err = c.rel_err;
            worst_coordinate = Some(i);
        }
    }
    Ok(FiniteDiffReport {
        max_rel_err,
        worst_coordinate,
        coordinates,
    })
}
