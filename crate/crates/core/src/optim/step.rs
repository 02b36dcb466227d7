use serde::{Deserialize, Serialize};

use crate::diff::{grad_scalar_raw, Arity, DiffFunction, Tape, Var};
use crate::error::{Error, Result};
use crate::linalg::{pinv_sym, PINV_RELATIVE_CUTOFF};
use crate::matrix::Matrix;
use crate::models::{Architecture, GeneratorSpec};
use crate::optim::inner::{InnerOptimizer, OptimizerConfig};
use crate::params::ParamVector;
use crate::scalar::Scalar;
use crate::wmetric::{exact1d_tape, MetricTensor, ProximalPenalty};

/// Objective growth factor that counts as divergence.
pub const DIVERGENCE_FACTOR: f64 = 10.0;

/// How many inner iterations a proximal step runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InnerMode {
    /// Exactly ℓ iterations.
    Fixed,
    /// Until the gradient norm drops below `tol`, at most `max_iters`.
    Converge { tol: f64, max_iters: usize },
}

/// Proximal step size `h`, inner iteration count ℓ, penalty, and limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowConfig {
    pub h: f64,
    pub inner_iters: usize,
    pub penalty: ProximalPenalty,
    pub max_outer: usize,
    pub inner: OptimizerConfig,
    #[serde(default = "default_inner_mode")]
    pub inner_mode: InnerMode,
}

fn default_inner_mode() -> InnerMode {
    InnerMode::Fixed
}

impl FlowConfig {
    pub fn new(
        h: f64,
        inner_iters: usize,
        penalty: ProximalPenalty,
        inner: OptimizerConfig,
    ) -> Self {
        Self {
            h,
            inner_iters,
            penalty,
            max_outer: 1000,
            inner,
            inner_mode: InnerMode::Fixed,
        }
    }

    pub fn converging(mut self, tol: f64, max_iters: usize) -> Self {
        self.inner_mode = InnerMode::Converge { tol, max_iters };
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0) {
            return Err(Error::config(format!(
                "step size h = {} must be positive",
                self.h
            )));
        }
        if self.inner_iters == 0 {
            return Err(Error::config("inner iterations must be at least 1"));
        }
        self.inner.validate()
    }

    /// Weight `1/(2h)` of `D̃²`; zero when `h` is infinite.
    pub fn penalty_weight(&self) -> f64 {
        if self.h.is_infinite() {
            0.0
        } else {
            0.5 / self.h
        }
    }
}

/// One inner iteration's record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InnerRecord<T> {
    /// Penalized objective before the update.
    pub objective: T,
    pub loss: T,
    pub penalty: T,
    pub step_norm: T,
}

/// Result of a proximal step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome<T> {
    pub theta: ParamVector<T>,
    pub trace: Vec<InnerRecord<T>>,
}

fn norm<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |a, &x| a + x * x).sqrt()
}

/// `θ^{k+1} = θ^k − h (G + λI)^† ∇F(θ^k)`.
pub fn forward_euler_step<T: Scalar, F: DiffFunction<T> + ?Sized>(
    f: &F,
    input: &Matrix<T>,
    theta_k: &ParamVector<T>,
    metric: &MetricTensor<T>,
    h: T,
    damping: T,
) -> Result<ParamVector<T>> {
    let (_, grad) = grad_scalar_raw(f, theta_k.values(), input)?;
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite {
            primitive: "gradient".into(),
        });
    }
    let d = theta_k.len();
    if metric.dim() != d {
        return Err(Error::config(format!(
            "metric is {}x{} but θ has {d} entries",
            metric.dim(),
            metric.dim()
        )));
    }
    let mut shifted = metric.matrix.clone();
    for i in 0..d {
        shifted[(i, i)] = shifted[(i, i)] + damping;
    }
    let pinv = pinv_sym(&shifted, T::of(PINV_RELATIVE_CUTOFF));
    let dir = pinv.matmul(&Matrix::column(grad));
    theta_k.offset_by(-h, dir.as_slice())
}

/// Runs the inner loop on `θ ↦ F(θ) + weight·dist(θ)` from `theta_k`.
fn proximal_step<T, F, D>(
    f: &F,
    f_input: &Matrix<T>,
    dist: D,
    theta_k: &ParamVector<T>,
    cfg: &FlowConfig,
    inner: &mut InnerOptimizer<T>,
) -> Result<StepOutcome<T>>
where
    T: Scalar,
    F: DiffFunction<T> + ?Sized,
    D: for<'t> Fn(&'t Tape<T>, Var<'t, T>) -> Var<'t, T>,
{
    cfg.validate()?;
    let arity: Arity = f.arity();
    if arity.params != theta_k.len() {
        return Err(Error::config(format!(
            "objective expects {} parameters, got {}",
            arity.params,
            theta_k.len()
        )));
    }
    let weight = T::of(cfg.penalty_weight());
    let (max_iters, tol) = match cfg.inner_mode {
        InnerMode::Fixed => (cfg.inner_iters, None),
        InnerMode::Converge { tol, max_iters } => (max_iters, Some(T::of(tol))),
    };
    let mut theta = theta_k.values().to_vec();
    let mut trace = Vec::new();
    let mut initial: Option<T> = None;
    for iter in 0..max_iters {
        let tape = Tape::new();
        let th = tape.leaf(Matrix::column(theta.clone()));
        let loss = f.build(&tape, th, tape.constant(f_input.clone()));
        let pen = dist(&tape, th);
        let obj = loss + pen.scale(weight);
        tape.check()?;
        let grad = tape
            .backward(obj, Matrix::scalar(T::one()))
            .wrt(th)
            .into_vec();
        tape.check()?;
        let value = obj.item();
        let start = *initial.get_or_insert(value);
        let limit = T::of(DIVERGENCE_FACTOR) * start.abs().max(T::of(1e-8));
        if value > limit && value > start {
            let mut objectives: Vec<f64> = trace
                .iter()
                .map(|r: &InnerRecord<T>| r.objective.to_f64_lossy())
                .collect();
            objectives.push(value.to_f64_lossy());
            return Err(Error::Divergence {
                iteration: iter,
                initial: start.to_f64_lossy(),
                objective: value.to_f64_lossy(),
                trace: objectives,
            });
        }
        if let Some(tol) = tol {
            if norm(&grad) < tol {
                trace.push(InnerRecord {
                    objective: value,
                    loss: loss.item(),
                    penalty: pen.item(),
                    step_norm: T::zero(),
                });
                break;
            }
        }
        let before = theta.clone();
        inner.step(&mut theta, &grad)?;
        let delta: Vec<T> = theta.iter().zip(&before).map(|(a, b)| *a - *b).collect();
        trace.push(InnerRecord {
            objective: value,
            loss: loss.item(),
            penalty: pen.item(),
            step_norm: norm(&delta),
        });
    }
    Ok(StepOutcome {
        theta: theta_k.with_values(theta)?,
        trace,
    })
}

/// Semi-backward Euler step: ℓ inner iterations (or until convergence) on
/// `θ ↦ F(θ) + D̃(θ, θ^k)²/(2h)` with the penalty measured by generator
/// `gen` on latent rows `z`.
#[allow(clippy::too_many_arguments)]
pub fn sbe_step<T, F, G>(
    f: &F,
    f_input: &Matrix<T>,
    gen: &G,
    z: &Matrix<T>,
    theta_k: &ParamVector<T>,
    penalty: &ProximalPenalty,
    cfg: &FlowConfig,
    inner: &mut InnerOptimizer<T>,
) -> Result<StepOutcome<T>>
where
    T: Scalar,
    F: DiffFunction<T> + ?Sized,
    G: DiffFunction<T> + ?Sized,
{
    if let crate::diff::Dim::Fixed(n) = gen.arity().output.1 {
        penalty.validate(n)?;
    }
    let thk = theta_k.values().to_vec();
    proximal_step(
        f,
        f_input,
        |tape, th| penalty.build(tape, gen, th, &thk, z),
        theta_k,
        cfg,
        inner,
    )
}

/// Backward Euler (proximal) step with the exact Wasserstein distance,
/// available for the delta mixture (closed form `Σ G_W (θ − θ^k)²` with
/// `G_W = diag(α, 1 − α)`) and one-dimensional generators (sorted
/// coupling on the samples at `z`).
pub fn backward_euler_step<T, F>(
    f: &F,
    f_input: &Matrix<T>,
    gen: &GeneratorSpec,
    z: &Matrix<T>,
    theta_k: &ParamVector<T>,
    cfg: &FlowConfig,
    inner: &mut InnerOptimizer<T>,
) -> Result<StepOutcome<T>>
where
    T: Scalar,
    F: DiffFunction<T> + ?Sized,
{
    let thk = theta_k.values().to_vec();
    match gen.architecture {
        Architecture::DeltaMixture { alpha } => {
            let g = Matrix::column(vec![T::of(alpha), T::of(1.0 - alpha)]);
            proximal_step(
                f,
                f_input,
                |tape, th| {
                    let diff = th - tape.constant(Matrix::column(thk.clone()));
                    (diff.square() * tape.constant(g.clone())).sum()
                },
                theta_k,
                cfg,
                inner,
            )
        }
        _ if gen.output_dim == 1 => proximal_step(
            f,
            f_input,
            |tape, th| {
                let zv = tape.constant(z.clone());
                let x = gen.build(tape, th, zv);
                let y = gen.build(tape, tape.constant(Matrix::column(thk.clone())), zv);
                exact1d_tape(tape, x, y)
            },
            theta_k,
            cfg,
            inner,
        ),
        _ => Err(Error::usage(
            "backward Euler needs the delta-mixture model or a one-dimensional generator",
        )),
    }
}
