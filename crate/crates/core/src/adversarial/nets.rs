use serde::{Deserialize, Serialize};

use crate::diff::{Tape, Var};
use crate::models::{Activation, MlpSpec};
use crate::params::{Layout, ParamVector};
use crate::scalar::Scalar;

/// Clamp applied to discriminator outputs before logarithms.
pub const OUTPUT_CLAMP: f64 = 1e-7;

/// `f_ω: ℝ^n → (0, 1)`: leaky-ReLU hidden layers and a sigmoid output,
/// clamped to `[ε, 1 − ε]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscriminatorSpec {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
}

impl DiscriminatorSpec {
    pub fn new(input_dim: usize, hidden: Vec<usize>) -> Self {
        Self { input_dim, hidden }
    }

    fn mlp(&self) -> MlpSpec {
        MlpSpec {
            input: self.input_dim,
            hidden: self.hidden.clone(),
            output: 1,
            activation: Activation::LeakyRelu,
            output_activation: Activation::Sigmoid,
        }
    }

    pub fn layout(&self) -> Layout {
        self.mlp().layout()
    }

    pub fn init<T: Scalar>(&self, seed: u64) -> ParamVector<T> {
        self.mlp().init(seed)
    }

    /// B×1 clamped outputs.
    pub fn forward<'t, T: Scalar>(&self, omega: Var<'t, T>, x: Var<'t, T>) -> Var<'t, T> {
        let eps = T::of(OUTPUT_CLAMP);
        self.mlp().forward(omega, x).clamp(eps, T::one() - eps)
    }
}

/// Parametric family of the potential `Φ_p: ℝ^n → ℝ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PotentialKind {
    /// `Φ(x) = pᵀx`.
    Linear,
    /// `Φ(x) = aᵀx + ½ Σ q_i x_i²`.
    DiagQuadratic,
    /// `Φ(x) = vᵀ tanh(Wᵀx + b) + c` with one hidden layer.
    Mlp { width: usize },
}

/// Potential network with an exact spatial gradient built from tape
/// primitives, so `∇_x Φ_p` can itself be differentiated in `p`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    pub input_dim: usize,
    pub kind: PotentialKind,
}

impl PotentialSpec {
    pub fn layout(&self) -> Layout {
        let n = self.input_dim;
        match self.kind {
            PotentialKind::Linear => Layout::single("p", n),
            PotentialKind::DiagQuadratic => Layout::new().with("a", n).with("q", n),
            PotentialKind::Mlp { width } => Layout::new()
                .with("w", n * width)
                .with("b", width)
                .with("v", width)
                .with("c", 1),
        }
    }

    /// Zeros for the polynomial families, Glorot weights with zero output
    /// layer for the network (so Φ starts at 0).
    pub fn init<T: Scalar>(&self, seed: u64) -> ParamVector<T> {
        match self.kind {
            PotentialKind::Mlp { width } => {
                let hidden: ParamVector<T> = MlpSpec {
                    input: self.input_dim,
                    hidden: vec![],
                    output: width,
                    activation: Activation::Tanh,
                    output_activation: Activation::Tanh,
                }
                .init(seed);
                let mut v = hidden.values().to_vec();
                v.extend(std::iter::repeat_n(T::zero(), width + 1));
                ParamVector::new(v, self.layout()).expect("finite")
            }
            _ => ParamVector::zeros(self.layout()),
        }
    }

    /// `(Φ(x), ∇_x Φ(x))` as B×1 and B×n nodes.
    pub fn value_and_grad<'t, T: Scalar>(
        &self,
        tape: &'t Tape<T>,
        p: Var<'t, T>,
        x: Var<'t, T>,
    ) -> (Var<'t, T>, Var<'t, T>) {
        let n = self.input_dim;
        let rows = x.rows();
        match self.kind {
            PotentialKind::Linear => {
                let w = p.slice(0, n, 1);
                let grad = tape
                    .constant(crate::matrix::Matrix::zeros(rows, n))
                    .add_row(p.slice(0, 1, n));
                (x.matmul(w), grad)
            }
            PotentialKind::DiagQuadratic => {
                let a = p.slice(0, 1, n);
                let q = p.slice(n, 1, n);
                let lin = x.matmul(p.slice(0, n, 1));
                let quad = x.square().mul_row(q).sum_cols().scale(T::half());
                (lin + quad, x.mul_row(q).add_row(a))
            }
            PotentialKind::Mlp { width } => {
                let w = p.slice(0, n, width);
                let b = p.slice(n * width, 1, width);
                let v_row = p.slice(n * width + width, 1, width);
                let v_col = p.slice(n * width + width, width, 1);
                let c = p.slice(n * width + 2 * width, 1, 1);
                let h = x.matmul(w).add_row(b).tanh();
                let value = h.matmul(v_col).add_scalar(c);
                let one = tape.constant(crate::matrix::Matrix::filled(rows, width, T::one()));
                let slope = (one - h.square()).mul_row(v_row);
                (value, slope.matmul(w.transpose()))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;

    #[test]
    fn potential_gradients_match_finite_differences() {
        for kind in [
            PotentialKind::Linear,
            PotentialKind::DiagQuadratic,
            PotentialKind::Mlp { width: 4 },
        ] {
            let spec = PotentialSpec { input_dim: 2, kind };
            let mut p: ParamVector<f64> = spec.init(3);
            for (i, v) in p.values_mut().iter_mut().enumerate() {
                *v += 0.1 * (i as f64 + 1.0).sin();
            }
            let x0 = [0.3, -0.7];
            let eval = |x: &[f64]| {
                let tape = Tape::new();
                let (v, g) = spec.value_and_grad(
                    &tape,
                    tape.constant(Matrix::column(p.values().to_vec())),
                    tape.constant(Matrix::row(x.to_vec())),
                );
                (v.item(), g.value())
            };
            let (_, g) = eval(&x0);
            for l in 0..2 {
                let mut xp = x0;
                let mut xm = x0;
                xp[l] += 1e-6;
                xm[l] -= 1e-6;
                let fd = (eval(&xp).0 - eval(&xm).0) / 2e-6;
                assert!((fd - g[(0, l)]).abs() < 1e-8, "{kind:?} coordinate {l}");
            }
        }
    }

    #[test]
    fn discriminator_output_is_clamped() {
        let spec = DiscriminatorSpec::new(1, vec![4]);
        let mut w: ParamVector<f64> = spec.init(0);
        w.values_mut().iter_mut().for_each(|v| *v *= 1e3);
        let tape = Tape::new();
        let out = spec
            .forward(
                tape.constant(w.as_column()),
                tape.constant(Matrix::column(vec![-50.0, 50.0])),
            )
            .value();
        assert!(out
            .as_slice()
            .iter()
            .all(|&v| (OUTPUT_CLAMP..=1.0 - OUTPUT_CLAMP).contains(&v)));
    }
}
