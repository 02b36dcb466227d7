//! Proximal penalties `D̃(θ, θ^k)²` on paired sample batches.
//!
//! Every penalty is expressed as tape primitives on `x = g(θ, Z)`,
//! `y = g(θ^k, Z)` and, for the affine family, `w = g(θ̃, Z)`, so the same
//! code gives values and θ-gradients. All expectations are batch means.
//!
//! Scaling: each function returns `D̃²` with the convention that the
//! penalized objective is `F(θ) + D̃² / (2h)` and that `D̃²` equals the
//! squared Wasserstein-2 distance whenever the approximation is exact.

use serde::{Deserialize, Serialize};

use crate::diff::{DiffFunction, Tape, Var};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::models::SampleBatch;
use crate::scalar::Scalar;
use crate::wmetric::affine::{AffineBasis, AffineDegree, Damping};

/// Per-coordinate variance below which the order-2 penalty is undefined.
pub const VARIANCE_FLOOR: f64 = 1e-12;

/// `E‖x − y‖²`.
pub fn rwp_tape<'t, T: Scalar>(x: Var<'t, T>, y: Var<'t, T>) -> Var<'t, T> {
    let b = T::of_usize(x.rows());
    (x - y).norm_sq().scale(T::one() / b)
}

/// `‖E(x − y)‖²`.
pub fn o1sbe_tape<'t, T: Scalar>(x: Var<'t, T>, y: Var<'t, T>) -> Var<'t, T> {
    (x - y).mean_rows().norm_sq()
}

/// Diagonal order-2 penalty with the quadratic term `M` taken at the
/// samples `w`: per coordinate `ℓ₁ = E(x − y)`, `ℓ₂ = ½E(x² − y²)`, and
/// `D̃² = Σ_i ℓ₁² + (ℓ₂ − E w · ℓ₁)² / Var w`.
pub fn o2diag_tape<'t, T: Scalar>(
    tape: &'t Tape<T>,
    x: Var<'t, T>,
    y: Var<'t, T>,
    w: Var<'t, T>,
) -> Var<'t, T> {
    let l1 = (x - y).mean_rows();
    let l2 = (x.square() - y.square()).mean_rows().scale(T::half());
    let mw = w.mean_rows();
    let vw = w.add_row(mw.neg()).square().mean_rows();
    check_variance(tape, &vw);
    let r = l2 - mw * l1;
    (l1.square() + r.square() / vw).sum()
}

/// The order-2 update objective exactly as displayed, with
/// `Q = diag(q_i)`,
/// `q_i = ½E(x_i − y_i)²/Var y_i + Cov(x_i, y_i)/Var y_i − 1` and value
/// `2·[½‖E(x − y) − E Qy‖² + ½E⟨x, Qx⟩ − ½E⟨y, Qy⟩ − ½E‖Qy‖²]`.
pub fn o2diag_displayed_tape<'t, T: Scalar>(
    tape: &'t Tape<T>,
    x: Var<'t, T>,
    y: Var<'t, T>,
) -> Var<'t, T> {
    let mx = x.mean_rows();
    let my = y.mean_rows();
    let vy = y.add_row(my.neg()).square().mean_rows();
    check_variance(tape, &vy);
    let cov = (x.add_row(mx.neg()) * y.add_row(my.neg())).mean_rows();
    let diff_sq = (x - y).square().mean_rows();
    let q = (diff_sq.scale(T::half()) + cov) / vy;
    let q = q.shift(-T::one());
    let gap = (x - y).mean_rows() - q * my;
    let quad_x = (x.square().mean_rows() * q).sum();
    let quad_y = (y.square().mean_rows() * q).sum();
    let qy_sq = (y.square().mean_rows() * q.square()).sum();
    let half = T::half();
    let p = gap.norm_sq().scale(half) + quad_x.scale(half) - quad_y.scale(half) - qy_sq.scale(half);
    p.scale(T::two())
}

fn check_variance<T: Scalar>(tape: &Tape<T>, var: &Var<'_, T>) {
    let bad = var.with_value(|v| {
        v.as_slice()
            .iter()
            .enumerate()
            .find(|(_, &s)| !(s.to_f64_lossy() > VARIANCE_FLOOR))
            .map(|(i, &s)| (i, s.to_f64_lossy()))
    });
    if let Some((coordinate, variance)) = bad {
        tape.fail(Error::DegenerateCoordinate {
            coordinate,
            variance,
            floor: VARIANCE_FLOOR,
        });
    }
}

/// Exact squared W₂ between the one-dimensional empirical measures of `x`
/// and `y` (sorted coupling).
pub fn exact1d_tape<'t, T: Scalar>(tape: &'t Tape<T>, x: Var<'t, T>, y: Var<'t, T>) -> Var<'t, T> {
    if x.cols() != 1 {
        tape.fail(Error::UnsupportedDimension(format!(
            "the exact 1-D penalty needs n = 1, got n = {}",
            x.cols()
        )));
    }
    rwp_tape(x.sort_columns(), y.sort_columns())
}

fn paired_values<T: Scalar>(x: &SampleBatch<T>, y: &SampleBatch<T>) -> Result<()> {
    x.check_paired(y)?;
    if x.is_empty() {
        return Err(Error::usage("batches must be nonempty"));
    }
    Ok(())
}

fn eval2<T: Scalar>(
    x: &SampleBatch<T>,
    y: &SampleBatch<T>,
    f: impl for<'t> FnOnce(&'t Tape<T>, Var<'t, T>, Var<'t, T>) -> Var<'t, T>,
) -> Result<T> {
    paired_values(x, y)?;
    let tape = Tape::new();
    let out = f(
        &tape,
        tape.constant(x.x.clone()),
        tape.constant(y.x.clone()),
    );
    tape.check()?;
    Ok(out.item())
}

/// Relaxed Wasserstein proximal penalty `E_Z‖g(θ,Z) − g(θ^k,Z)‖²`.
pub fn rwp_penalty<T: Scalar>(x: &SampleBatch<T>, y: &SampleBatch<T>) -> Result<T> {
    eval2(x, y, |_, a, b| rwp_tape(a, b))
}

/// Order-1 penalty `‖E_Z(g(θ,Z) − g(θ^k,Z))‖²`.
pub fn o1sbe_penalty<T: Scalar>(x: &SampleBatch<T>, y: &SampleBatch<T>) -> Result<T> {
    eval2(x, y, |_, a, b| o1sbe_tape(a, b))
}

/// Diagonal order-2 penalty with `θ̃ = θ^k`, via the closed-form `q_i`.
pub fn o2diag_penalty<T: Scalar>(x: &SampleBatch<T>, y: &SampleBatch<T>) -> Result<T> {
    eval2(x, y, o2diag_displayed_tape)
}

/// Diagonal order-2 penalty with the quadratic term at samples `w` of θ̃.
pub fn o2diag_penalty_at<T: Scalar>(
    x: &SampleBatch<T>,
    y: &SampleBatch<T>,
    w: &SampleBatch<T>,
) -> Result<T> {
    x.check_paired(w)?;
    let tape = Tape::new();
    let wv = tape.constant(w.x.clone());
    paired_values(x, y)?;
    let out = o2diag_tape(
        &tape,
        tape.constant(x.x.clone()),
        tape.constant(y.x.clone()),
        wv,
    );
    tape.check()?;
    Ok(out.item())
}

/// Sorted-coupling W₂² of one-dimensional batches.
pub fn exact1d_penalty<T: Scalar>(x: &SampleBatch<T>, y: &SampleBatch<T>) -> Result<T> {
    eval2(x, y, exact1d_tape)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PenaltyKind {
    /// No penalty (unregularized baseline).
    None,
    Rwp,
    #[serde(rename = "o1sbe")]
    O1Sbe,
    #[serde(rename = "o2diag")]
    O2DiagSbe,
    Affine(AffineDegree),
    #[serde(rename = "exact1d")]
    Exact1D,
}

impl PenaltyKind {
    /// Parses the short names used on the command line.
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_lowercase().as_str() {
            "none" | "off" => PenaltyKind::None,
            "rwp" => PenaltyKind::Rwp,
            "o1sbe" | "o1-sbe" => PenaltyKind::O1Sbe,
            "o2diag" | "o2diag-sbe" | "o2diagsbe" => PenaltyKind::O2DiagSbe,
            "affine1" => PenaltyKind::Affine(AffineDegree::Linear),
            "affine2" | "affine2-diag" => PenaltyKind::Affine(AffineDegree::DiagonalQuadratic),
            "affine2-full" => PenaltyKind::Affine(AffineDegree::FullQuadratic),
            "exact1d" => PenaltyKind::Exact1D,
            other => return Err(Error::config(format!("unknown penalty `{other}`"))),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            PenaltyKind::None => "none",
            PenaltyKind::Rwp => "rwp",
            PenaltyKind::O1Sbe => "o1sbe",
            PenaltyKind::O2DiagSbe => "o2diag",
            PenaltyKind::Affine(AffineDegree::Linear) => "affine1",
            PenaltyKind::Affine(AffineDegree::DiagonalQuadratic) => "affine2",
            PenaltyKind::Affine(AffineDegree::FullQuadratic) => "affine2-full",
            PenaltyKind::Exact1D => "exact1d",
        }
    }

    /// Whether the penalty reads samples at θ̃.
    pub fn uses_midpoint(&self) -> bool {
        matches!(self, PenaltyKind::O2DiagSbe | PenaltyKind::Affine(_))
    }
}

/// How θ̃ is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MidpointRule {
    /// `θ̃ = (θ + θ^k) / 2`, differentiated through.
    Average,
    /// `θ̃ = θ^k`, held fixed.
    #[default]
    Previous,
}

/// A penalty kind with its θ̃ rule and damping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProximalPenalty {
    pub kind: PenaltyKind,
    #[serde(default)]
    pub midpoint: MidpointRule,
    #[serde(default)]
    pub damping: Damping,
}

impl ProximalPenalty {
    pub fn new(kind: PenaltyKind) -> Self {
        Self {
            kind,
            midpoint: MidpointRule::Previous,
            damping: Damping::Auto,
        }
    }

    pub fn with_kind(mut self, kind: PenaltyKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn with_midpoint(mut self, rule: MidpointRule) -> Self {
        self.midpoint = rule;
        self
    }

    pub fn with_damping(mut self, damping: Damping) -> Self {
        self.damping = damping;
        self
    }

    pub fn validate(&self, output_dim: usize) -> Result<()> {
        if let Damping::Fixed(l) = self.damping {
            if !(l >= 0.0) {
                return Err(Error::config(format!("damping {l} must be nonnegative")));
            }
        }
        if self.kind == PenaltyKind::Exact1D && output_dim != 1 {
            return Err(Error::UnsupportedDimension(format!(
                "the exact 1-D penalty needs n = 1, got n = {output_dim}"
            )));
        }
        Ok(())
    }

    /// `D̃²` from `x` (at θ), `y` (at θ^k) and `w` (at θ̃).
    pub fn combine<'t, T: Scalar>(
        &self,
        tape: &'t Tape<T>,
        x: Var<'t, T>,
        y: Var<'t, T>,
        w: Var<'t, T>,
    ) -> Var<'t, T> {
        match self.kind {
            PenaltyKind::None => tape.scalar(T::zero()),
            PenaltyKind::Rwp => rwp_tape(x, y),
            PenaltyKind::O1Sbe => o1sbe_tape(x, y),
            PenaltyKind::O2DiagSbe => o2diag_tape(tape, x, y, w),
            PenaltyKind::Affine(degree) => {
                AffineBasis::new(degree, x.cols()).penalty(tape, x, y, w, self.damping)
            }
            PenaltyKind::Exact1D => exact1d_tape(tape, x, y),
        }
    }

    /// Builds `D̃(θ, θ^k)²` for generator `gen` on latent rows `z`, with
    /// `θ^k` as a constant (no gradient flows into it).
    pub fn build<'t, T: Scalar, G: DiffFunction<T> + ?Sized>(
        &self,
        tape: &'t Tape<T>,
        gen: &G,
        theta: Var<'t, T>,
        theta_k: &[T],
        z: &Matrix<T>,
    ) -> Var<'t, T> {
        if self.kind == PenaltyKind::None {
            return tape.scalar(T::zero());
        }
        let zv = tape.constant(z.clone());
        let x = gen.build(tape, theta, zv);
        self.build_from(tape, gen, theta, x, theta_k, zv)
    }

    /// As [`build`](Self::build) with `x = g(θ, z)` already on the tape.
    pub fn build_from<'t, T: Scalar, G: DiffFunction<T> + ?Sized>(
        &self,
        tape: &'t Tape<T>,
        gen: &G,
        theta: Var<'t, T>,
        x: Var<'t, T>,
        theta_k: &[T],
        z: Var<'t, T>,
    ) -> Var<'t, T> {
        if self.kind == PenaltyKind::None {
            return tape.scalar(T::zero());
        }
        let thk = tape.constant(Matrix::column(theta_k.to_vec()));
        let y = gen.build(tape, thk, z);
        let w = match (self.kind.uses_midpoint(), self.midpoint) {
            (true, MidpointRule::Average) => gen.build(tape, (theta + thk).scale(T::half()), z),
            _ => y,
        };
        self.combine(tape, x, y, w)
    }

    /// `D̃²` on already-generated paired batches.
    pub fn evaluate<T: Scalar>(
        &self,
        x: &SampleBatch<T>,
        y: &SampleBatch<T>,
        w: &SampleBatch<T>,
    ) -> Result<T> {
        paired_values(x, y)?;
        x.check_paired(w)?;
        let tape = Tape::new();
        let out = self.combine(
            &tape,
            tape.constant(x.x.clone()),
            tape.constant(y.x.clone()),
            tape.constant(w.x.clone()),
        );
        tape.check()?;
        Ok(out.item())
    }
}
