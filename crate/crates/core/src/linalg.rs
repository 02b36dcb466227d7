//! Small symmetric linear algebra: cyclic Jacobi eigendecomposition and the
//! pseudoinverse, solve and square-root routines built on it.
//!
//! Matrices here are at most a few hundred rows (metric tensors of toy
//! models, affine-basis Gram matrices, 2×2 covariances), where Jacobi is
//! accurate to roundoff and fully deterministic.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Eigenvalues ascending; `vectors` holds the matching eigenvectors as columns.
#[derive(Debug, Clone)]
pub struct SymmetricEigen<T> {
    pub values: Vec<T>,
    pub vectors: Matrix<T>,
}

impl<T: Scalar> SymmetricEigen<T> {
    /// Decomposes the symmetric part of `m`.
    pub fn new(m: &Matrix<T>) -> Self {
        assert_eq!(
            m.rows(),
            m.cols(),
            "eigendecomposition needs a square matrix"
        );
        let n = m.rows();
        let mut a = m.symmetrized();
        let mut v = Matrix::identity(n);
        let eps = T::epsilon();
        for _sweep in 0..100 {
            let mut off = T::zero();
            for i in 0..n {
                for j in (i + 1)..n {
                    off = off + a[(i, j)] * a[(i, j)];
                }
            }
            let scale = a.norm_sq();
            if off <= eps * eps * scale || off == T::zero() {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a[(p, q)];
                    if apq == T::zero() {
                        continue;
                    }
                    let theta = (a[(q, q)] - a[(p, p)]) / (T::two() * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                    let c = T::one() / (t * t + T::one()).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = c * akp - s * akq;
                        a[(k, q)] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = c * apk - s * aqk;
                        a[(q, k)] = s * apk + c * aqk;
                    }
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = c * vkp - s * vkq;
                        v[(k, q)] = s * vkp + c * vkq;
                    }
                }
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| {
            a[(i, i)]
                .partial_cmp(&a[(j, j)])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let values = order.iter().map(|&i| a[(i, i)]).collect();
        let vectors = Matrix::from_fn(n, n, |r, c| v[(r, order[c])]);
        Self { values, vectors }
    }

    pub fn max_eigenvalue(&self) -> T {
        self.values.last().copied().unwrap_or_else(T::zero)
    }

    pub fn min_eigenvalue(&self) -> T {
        self.values.first().copied().unwrap_or_else(T::zero)
    }

    /// `V f(Λ) Vᵀ`.
    pub fn reconstruct(&self, f: impl Fn(T) -> T) -> Matrix<T> {
        let n = self.values.len();
        let fv: Vec<T> = self.values.iter().map(|&x| f(x)).collect();
        Matrix::from_fn(n, n, |i, j| {
            (0..n).fold(T::zero(), |acc, k| {
                acc + self.vectors[(i, k)] * fv[k] * self.vectors[(j, k)]
            })
        })
    }

    pub fn eigenvector(&self, k: usize) -> Vec<T> {
        self.vectors.column_vec(k)
    }
}

/// Relative cutoff below which eigenvalues count as zero in pseudoinverses.
pub const PINV_RELATIVE_CUTOFF: f64 = 1e-10;

/// Moore-Penrose pseudoinverse of a symmetric matrix, zeroing eigenvalues
/// below `rel_cutoff * λ_max`.
pub fn pinv_sym<T: Scalar>(m: &Matrix<T>, rel_cutoff: T) -> Matrix<T> {
    let eig = SymmetricEigen::new(m);
    let lmax = eig.values.iter().fold(T::zero(), |a, &x| a.max(x.abs()));
    let cut = rel_cutoff * lmax;
    eig.reconstruct(|x| {
        if x.abs() <= cut || x == T::zero() {
            T::zero()
        } else {
            T::one() / x
        }
    })
}

/// Solves `(m + damping·I) u = rhs` for symmetric `m`.
///
/// Fails with [`Error::RankDeficient`] when the shifted matrix has an
/// eigenvalue at or below `1e-12 · λ_max`, reporting its eigenvector.
pub fn solve_sym<T: Scalar>(m: &Matrix<T>, damping: T, rhs: &[T]) -> Result<Vec<T>> {
    let n = m.rows();
    assert_eq!(rhs.len(), n);
    let mut shifted = m.symmetrized();
    for i in 0..n {
        shifted[(i, i)] = shifted[(i, i)] + damping;
    }
    let eig = SymmetricEigen::new(&shifted);
    let lmax = eig.values.iter().fold(T::zero(), |a, &x| a.max(x.abs()));
    let floor = T::of(1e-12) * lmax;
    if let Some(k) = eig.values.iter().position(|&x| x <= floor) {
        return Err(Error::RankDeficient {
            null_direction: eig
                .eigenvector(k)
                .iter()
                .map(|x| x.to_f64_lossy())
                .collect(),
        });
    }
    let mut out = vec![T::zero(); n];
    for k in 0..n {
        let coeff =
            (0..n).fold(T::zero(), |acc, i| acc + eig.vectors[(i, k)] * rhs[i]) / eig.values[k];
        for (i, o) in out.iter_mut().enumerate() {
            *o = *o + coeff * eig.vectors[(i, k)];
        }
    }
    Ok(out)
}

/// Principal square root of a symmetric positive semidefinite matrix;
/// slightly negative roundoff eigenvalues are clipped to zero.
pub fn sqrt_psd<T: Scalar>(m: &Matrix<T>) -> Matrix<T> {
    SymmetricEigen::new(m).reconstruct(|x| x.max(T::zero()).sqrt())
}
