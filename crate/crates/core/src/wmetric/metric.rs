use serde::{Deserialize, Serialize};

use crate::diff::{jacobian, DiffFunction, Tape};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::models::LatentSource;
use crate::scalar::Scalar;
use crate::wmetric::affine::{AffineBasis, Damping};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricTag {
    /// `E_Z[∇_θ g ∇_θ gᵀ]` for a one-dimensional generator.
    Exact1D,
    /// `J_Ψᵀ M⁻¹ J_Ψ` from an affine basis.
    AffinePullback,
    /// `diag(α, 1 − α)` for the delta mixture.
    DeltaMixtureClosedForm,
}

/// Symmetric PSD d×d matrix `G(θ)` with the θ it was evaluated at.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricTensor<T> {
    pub matrix: Matrix<T>,
    pub theta: Vec<T>,
    pub tag: MetricTag,
}

impl<T: Scalar> MetricTensor<T> {
    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    /// `max |G − Gᵀ|`.
    pub fn asymmetry(&self) -> T {
        self.matrix.sub(&self.matrix.transpose()).max_abs()
    }
}

/// Delta-mixture metric `diag(α, 1 − α)`.
pub fn delta_mixture_metric(alpha: f64, theta: [f64; 2]) -> MetricTensor<f64> {
    MetricTensor {
        matrix: Matrix::diag(&[alpha, 1.0 - alpha]),
        theta: theta.to_vec(),
        tag: MetricTag::DeltaMixtureClosedForm,
    }
}

/// Batch average of `∇_θ g(θ, z)ᵀ ∇_θ g(θ, z)` over the rows of `z`.
pub fn pullback_on<T: Scalar, G: DiffFunction<T> + ?Sized>(
    gen: &G,
    theta: &[T],
    z: &Matrix<T>,
) -> Result<Matrix<T>> {
    let d = theta.len();
    let mut g = Matrix::zeros(d, d);
    for i in 0..z.rows() {
        let j = jacobian(gen, theta, z.row_slice(i))?;
        g.add_assign(&j.t_matmul(&j));
    }
    Ok(g.scale(T::one() / T::of_usize(z.rows().max(1)))
        .symmetrized())
}

/// Exact Wasserstein pullback metric of a one-dimensional generator,
/// estimated on `rows` latents of batch 0 of `src`.
pub fn metric_tensor_1d<T: Scalar, G: DiffFunction<T> + ?Sized>(
    gen: &G,
    theta: &[T],
    src: &LatentSource,
    rows: usize,
) -> Result<MetricTensor<T>> {
    metric_tensor_1d_on(gen, theta, &src.batch(0, rows).z)
}

/// [`metric_tensor_1d`] on explicit latent rows.
pub fn metric_tensor_1d_on<T: Scalar, G: DiffFunction<T> + ?Sized>(
    gen: &G,
    theta: &[T],
    z: &Matrix<T>,
) -> Result<MetricTensor<T>> {
    let out = gen.arity().output.1;
    if out != crate::diff::Dim::Fixed(1) {
        return Err(Error::UnsupportedDimension(format!(
            "the exact metric needs a one-dimensional generator, output is {out:?}"
        )));
    }
    Ok(MetricTensor {
        matrix: pullback_on(gen, theta, z)?,
        theta: theta.to_vec(),
        tag: MetricTag::Exact1D,
    })
}

/// Metric of the affine penalty at `θ̃ = θ`: the Hessian of `D̃²/2` in θ,
/// `J_Ψᵀ (M + λI)⁻¹ J_Ψ` with `J_Ψ = ∂_θ E Ψ(g(θ, Z))`.
pub fn affine_pullback_metric<T: Scalar, G: DiffFunction<T> + ?Sized>(
    basis: &AffineBasis,
    gen: &G,
    theta: &[T],
    z: &Matrix<T>,
    damping: Damping,
) -> Result<MetricTensor<T>> {
    let tape = Tape::new();
    let th = tape.leaf(Matrix::column(theta.to_vec()));
    let x = gen.build(&tape, th, tape.constant(z.clone()));
    let feats = basis.features(x).mean_rows();
    let m = basis.gram(&tape, x).value();
    tape.check()?;
    let k = basis.len();
    let d = theta.len();
    let mut jpsi = Matrix::zeros(k, d);
    for j in 0..k {
        let mut seed = Matrix::zeros(1, k);
        seed[(0, j)] = T::one();
        let g = tape.backward(feats, seed).wrt(th);
        jpsi.row_slice_mut(j).copy_from_slice(g.as_slice());
    }
    let lambda = damping.resolve(&m);
    let mut minv_j = Matrix::zeros(k, d);
    for c in 0..d {
        let col = crate::linalg::solve_sym(&m, lambda, &jpsi.column_vec(c))?;
        for (r, v) in col.into_iter().enumerate() {
            minv_j[(r, c)] = v;
        }
    }
    Ok(MetricTensor {
        matrix: jpsi.t_matmul(&minv_j).symmetrized(),
        theta: theta.to_vec(),
        tag: MetricTag::AffinePullback,
    })
}
