use serde::{Deserialize, Serialize};

use crate::diff::{Tape, Var};
use crate::error::Result;
use crate::matrix::Matrix;
use crate::models::SampleBatch;
use crate::scalar::Scalar;

/// Levenberg-Marquardt shift added to `M(θ̃)` before inversion.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Damping {
    /// `λ = 1e-8 · trace(M) / K`.
    #[default]
    Auto,
    Fixed(f64),
}

impl Damping {
    pub const AUTO_FACTOR: f64 = 1e-8;

    pub fn resolve<T: Scalar>(self, m: &Matrix<T>) -> T {
        match self {
            Damping::Auto => m.trace() * T::of(Self::AUTO_FACTOR) / T::of_usize(m.rows().max(1)),
            Damping::Fixed(l) => T::of(l),
        }
    }
}

/// Monomial family spanning the dual potential.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AffineDegree {
    /// `ψ_k = x_k`.
    Linear,
    /// `x_k` and `x_k² / 2`.
    DiagonalQuadratic,
    /// `x_k`, `x_k² / 2` and `x_i x_j` for `i < j`.
    FullQuadratic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Monomial {
    Linear(usize),
    HalfSquare(usize),
    Cross(usize, usize),
}

/// Basis `ψ_1 … ψ_K` of polynomial potentials on ℝ^n with exact spatial
/// gradients.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AffineBasis {
    degree: AffineDegree,
    dim: usize,
    terms: Vec<Monomial>,
}

impl AffineBasis {
    pub fn new(degree: AffineDegree, dim: usize) -> Self {
        assert!(dim >= 1, "basis dimension must be at least 1");
        let mut terms: Vec<Monomial> = (0..dim).map(Monomial::Linear).collect();
        match degree {
            AffineDegree::Linear => {}
            AffineDegree::DiagonalQuadratic => terms.extend((0..dim).map(Monomial::HalfSquare)),
            AffineDegree::FullQuadratic => {
                for i in 0..dim {
                    for j in i..dim {
                        terms.push(if i == j {
                            Monomial::HalfSquare(i)
                        } else {
                            Monomial::Cross(i, j)
                        });
                    }
                }
            }
        }
        Self { degree, dim, terms }
    }

    pub fn degree(&self) -> AffineDegree {
        self.degree
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of basis functions K.
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// `Ψ(x)`: B×K features of the rows of `x`.
    pub fn features<'t, T: Scalar>(&self, x: Var<'t, T>) -> Var<'t, T> {
        let cols: Vec<Var<'t, T>> = self
            .terms
            .iter()
            .map(|t| match *t {
                Monomial::Linear(k) => x.column(k),
                Monomial::HalfSquare(k) => x.column(k).square().scale(T::half()),
                Monomial::Cross(i, j) => x.column(i) * x.column(j),
            })
            .collect();
        Var::hcat(&cols)
    }

    /// `∂_{x_l} ψ_j` at the rows of `x`, as a B×K matrix.
    pub fn gradient_component<'t, T: Scalar>(
        &self,
        tape: &'t Tape<T>,
        x: Var<'t, T>,
        l: usize,
    ) -> Var<'t, T> {
        let rows = x.rows();
        let ones = || tape.constant(Matrix::filled(rows, 1, T::one()));
        let zeros = || tape.constant(Matrix::zeros(rows, 1));
        let cols: Vec<Var<'t, T>> = self
            .terms
            .iter()
            .map(|t| match *t {
                Monomial::Linear(k) if k == l => ones(),
                Monomial::HalfSquare(k) if k == l => x.column(k),
                Monomial::Cross(i, j) if i == l => x.column(j),
                Monomial::Cross(i, j) if j == l => x.column(i),
                _ => zeros(),
            })
            .collect();
        Var::hcat(&cols)
    }

    /// `M_ij = E Σ_l ∂_l ψ_i ∂_l ψ_j` over the rows of `w`.
    pub fn gram<'t, T: Scalar>(&self, tape: &'t Tape<T>, w: Var<'t, T>) -> Var<'t, T> {
        let inv_b = T::one() / T::of_usize(w.rows());
        let mut m: Option<Var<'t, T>> = None;
        for l in 0..self.dim {
            let j = self.gradient_component(tape, w, l);
            let c = j.transpose().matmul(j);
            m = Some(match m {
                Some(acc) => acc + c,
                None => c,
            });
        }
        m.expect("dim >= 1").scale(inv_b)
    }

    /// `E Ψ(x) − E Ψ(y)` as a K×1 column.
    pub fn feature_gap<'t, T: Scalar>(&self, x: Var<'t, T>, y: Var<'t, T>) -> Var<'t, T> {
        (self.features(x).mean_rows() - self.features(y).mean_rows()).transpose()
    }

    /// `D̃² = (EΨ(x) − EΨ(y))ᵀ (M(w) + λI)⁻¹ (EΨ(x) − EΨ(y))` on a tape.
    pub fn penalty<'t, T: Scalar>(
        &self,
        tape: &'t Tape<T>,
        x: Var<'t, T>,
        y: Var<'t, T>,
        w: Var<'t, T>,
        damping: Damping,
    ) -> Var<'t, T> {
        let gap = self.feature_gap(x, y);
        let m = self.gram(tape, w);
        let lambda = m.with_value(|mv| damping.resolve(mv));
        gap.quad_form_inv(m, lambda)
    }
}

/// Affine-basis penalty on paired batches; `w` holds the samples at θ̃.
pub fn affine_metric<T: Scalar>(
    basis: &AffineBasis,
    x: &SampleBatch<T>,
    y: &SampleBatch<T>,
    w: &SampleBatch<T>,
    damping: Damping,
) -> Result<T> {
    x.check_paired(y)?;
    x.check_paired(w)?;
    let tape = Tape::new();
    let (xv, yv, wv) = (
        tape.constant(x.x.clone()),
        tape.constant(y.x.clone()),
        tape.constant(w.x.clone()),
    );
    let out = basis.penalty(&tape, xv, yv, wv, damping);
    tape.check()?;
    Ok(out.item())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_sizes() {
        assert_eq!(AffineBasis::new(AffineDegree::Linear, 3).len(), 3);
        assert_eq!(
            AffineBasis::new(AffineDegree::DiagonalQuadratic, 3).len(),
            6
        );
        assert_eq!(AffineBasis::new(AffineDegree::FullQuadratic, 3).len(), 9);
    }

    #[test]
    fn full_quadratic_gram_matches_hand_computation() {
        let basis = AffineBasis::new(AffineDegree::FullQuadratic, 2);
        let tape = Tape::new();
        let w = tape.constant(Matrix::from_rows(&[vec![1.0, 2.0]]));
        let m = basis.gram(&tape, w).value();
        // terms: x0, x1, x0²/2, x0 x1, x1²/2; gradients at (1,2):
        // ∂0 = (1, 0, 1, 2, 0), ∂1 = (0, 1, 0, 1, 2)
        let g0 = [1.0, 0.0, 1.0, 2.0, 0.0];
        let g1 = [0.0, 1.0, 0.0, 1.0, 2.0];
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(m[(i, j)], g0[i] * g0[j] + g1[i] * g1[j]);
            }
        }
    }

    #[test]
    fn auto_damping_scale() {
        let m = Matrix::diag(&[2.0, 4.0]);
        assert!((Damping::Auto.resolve(&m) - 3e-8_f64).abs() < 1e-20);
        assert_eq!(Damping::Fixed(0.5).resolve(&m), 0.5);
    }
}
