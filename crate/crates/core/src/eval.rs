//! Sample-quality metrics.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::diff::{Tape, Var};
use crate::error::{Error, Result};
use crate::linalg::{sqrt_psd, SymmetricEigen};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Number of projection directions of the sliced distance.
pub const SLICES: usize = 64;

/// Ridge added to a rank-deficient covariance.
pub const COVARIANCE_RIDGE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalKind {
    FrechetGaussian,
    W1Sorted,
    W2Sorted,
    SlicedW1,
}

/// Metric kind and the evaluation batch size.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalMetric {
    pub kind: EvalKind,
    pub batch: usize,
}

impl EvalMetric {
    pub fn validate(&self, n: usize) -> Result<()> {
        let ok = match self.kind {
            EvalKind::FrechetGaussian => self.batch > n,
            EvalKind::W1Sorted | EvalKind::W2Sorted => n == 1,
            EvalKind::SlicedW1 => n == 2,
        };
        if !ok || self.batch == 0 {
            return Err(Error::config(format!(
                "{:?} with batch {} is not available for n = {n}",
                self.kind, self.batch
            )));
        }
        Ok(())
    }

    pub fn compute(&self, x: &Matrix<f64>, y: &Matrix<f64>) -> Result<f64> {
        match self.kind {
            EvalKind::FrechetGaussian => frechet_gaussian_distance(x, y).map(|r| r.value),
            EvalKind::W1Sorted => w_1d_sorted(x.as_slice(), y.as_slice(), 1),
            EvalKind::W2Sorted => w_1d_sorted(x.as_slice(), y.as_slice(), 2),
            EvalKind::SlicedW1 => sliced_w1(x, y),
        }
    }

    /// Short label for logs and plots. The Fréchet distance is computed on
    /// raw samples and labelled FGD.
    pub fn label(&self) -> &'static str {
        match self.kind {
            EvalKind::FrechetGaussian => "FGD",
            EvalKind::W1Sorted => "W1",
            EvalKind::W2Sorted => "W2",
            EvalKind::SlicedW1 => "SW1",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrechetReport {
    pub value: f64,
    /// Whether a covariance was rank deficient and received the ridge.
    pub regularized: bool,
}

fn regularize(c: &Matrix<f64>) -> (Matrix<f64>, bool) {
    let eig = SymmetricEigen::new(c);
    let lmax = eig.max_eigenvalue().abs();
    if eig.min_eigenvalue() <= 1e-12 * lmax.max(f64::MIN_POSITIVE) {
        let mut r = c.clone();
        for i in 0..r.rows() {
            r[(i, i)] += COVARIANCE_RIDGE;
        }
        (r, true)
    } else {
        (c.clone(), false)
    }
}

/// `‖m₁ − m₂‖² + tr(C₁ + C₂ − 2 (C₁^{1/2} C₂ C₁^{1/2})^{1/2})` of Gaussians
/// fitted to the rows of `x` and `y`.
pub fn frechet_gaussian_distance(x: &Matrix<f64>, y: &Matrix<f64>) -> Result<FrechetReport> {
    let n = x.cols();
    if y.cols() != n {
        return Err(Error::usage("batches have different dimensions"));
    }
    if x.rows() < n + 1 || y.rows() < n + 1 {
        return Err(Error::usage(format!(
            "each batch needs at least {} rows",
            n + 1
        )));
    }
    let (mx, my) = (x.column_means(), y.column_means());
    let mean_term = mx.sub(&my).norm_sq();
    let (c1, r1) = regularize(&x.covariance());
    let (c2, r2) = regularize(&y.covariance());
    let s1 = sqrt_psd(&c1);
    let inner = s1.matmul(&c2).matmul(&s1).symmetrized();
    let cross = sqrt_psd(&inner).trace();
    let value = (mean_term + c1.trace() + c2.trace() - 2.0 * cross).max(0.0);
    Ok(FrechetReport {
        value,
        regularized: r1 || r2,
    })
}

/// `((1/B) Σ |x_(i) − y_(i)|^p)^{1/p}` over sorted samples.
pub fn w_1d_sorted(x: &[f64], y: &[f64], p: u32) -> Result<f64> {
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::usage(format!(
            "sorted coupling needs equal nonempty batches, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    if p != 1 && p != 2 {
        return Err(Error::config(format!("p must be 1 or 2, got {p}")));
    }
    let mut xs = x.to_vec();
    let mut ys = y.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let mean = xs
        .iter()
        .zip(&ys)
        .map(|(a, b)| (a - b).abs().powi(p as i32))
        .sum::<f64>()
        / xs.len() as f64;
    Ok(if p == 1 { mean } else { mean.sqrt() })
}

/// `SLICES` unit directions at angles `πs/SLICES`, as a 2×S matrix.
pub fn slice_directions<T: Scalar>() -> Matrix<T> {
    Matrix::from_fn(2, SLICES, |r, s| {
        let t = PI * s as f64 / SLICES as f64;
        T::of(if r == 0 { t.cos() } else { t.sin() })
    })
}

/// Average over equiangular directions of the 1-D sorted W₁ of the
/// projections.
pub fn sliced_w1(x: &Matrix<f64>, y: &Matrix<f64>) -> Result<f64> {
    if x.cols() != 2 || y.cols() != 2 || x.rows() != y.rows() {
        return Err(Error::usage("sliced W1 needs two equal-size 2-D batches"));
    }
    let tape = Tape::new();
    let out = sliced_w1_tape(&tape, tape.constant(x.clone()), y);
    tape.check()?;
    Ok(out.item())
}

/// Empirical W₁ on a tape: sorted coupling for `n = 1`, mean over
/// [`SLICES`] projections for `n = 2`. `target` must have as many rows as
/// `x`.
pub fn sliced_w1_tape<'t, T: Scalar>(
    tape: &'t Tape<T>,
    x: Var<'t, T>,
    target: &Matrix<T>,
) -> Var<'t, T> {
    let (px, py) = match x.cols() {
        1 => (x, target.clone()),
        2 => {
            let dirs = slice_directions::<T>();
            (x.matmul(tape.constant(dirs.clone())), target.matmul(&dirs))
        }
        n => {
            tape.fail(Error::UnsupportedDimension(format!(
                "direct W1 supports n <= 2, got {n}"
            )));
            return tape.scalar(T::zero());
        }
    };
    let sorted_target = tape.constant(py).sort_columns();
    (px.sort_columns() - sorted_target).abs().mean()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sorted_unit_shift() {
        assert_eq!(w_1d_sorted(&[0.0, 1.0], &[1.0, 2.0], 1).unwrap(), 1.0);
        assert_eq!(w_1d_sorted(&[3.0, 1.0], &[1.0, 3.0], 2).unwrap(), 0.0);
        assert!(w_1d_sorted(&[0.0], &[1.0, 2.0], 1).is_err());
    }

    #[test]
    fn frechet_of_identical_batches_is_zero() {
        let x = Matrix::from_rows(&[
            vec![0.0, 1.0],
            vec![2.0, -1.0],
            vec![0.5, 0.5],
            vec![1.0, 3.0],
        ]);
        let r = frechet_gaussian_distance(&x, &x).unwrap();
        assert!(r.value < 1e-8 && !r.regularized);
        let shifted = x.map(|v| v + 2.0);
        let s = frechet_gaussian_distance(&x, &shifted).unwrap();
        assert!((s.value - 8.0).abs() < 1e-8);
    }

    #[test]
    fn rank_deficient_covariance_is_flagged() {
        let x = Matrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, 2.0]]);
        assert!(frechet_gaussian_distance(&x, &x).unwrap().regularized);
    }
}
