use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::wmetric::DiscreteMeasure;

/// `α δ_a + (1 − α) δ_b` on ℝ with `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaMixtureModel {
    pub a: f64,
    pub b: f64,
    pub alpha: f64,
}

impl DeltaMixtureModel {
    pub fn new(a: f64, b: f64, alpha: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite()) {
            return Err(Error::input("support points must be finite"));
        }
        if a >= b {
            return Err(Error::input(format!(
                "support points must satisfy a < b, got a={a}, b={b}"
            )));
        }
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::input(format!("alpha {alpha} is outside [0, 1]")));
        }
        Ok(Self { a, b, alpha })
    }

    pub fn theta(&self) -> [f64; 2] {
        [self.a, self.b]
    }

    /// Same α at new support points.
    pub fn at(&self, a: f64, b: f64) -> Result<Self> {
        Self::new(a, b, self.alpha)
    }

    /// The two-point measure `{(a, α), (b, 1 − α)}`.
    pub fn pushforward(&self) -> DiscreteMeasure {
        DiscreteMeasure::new(
            Matrix::column(vec![self.a, self.b]),
            vec![self.alpha, 1.0 - self.alpha],
        )
        .expect("valid two-point measure")
    }
}

/// Free-function form of [`DeltaMixtureModel::pushforward`].
pub fn delta_mixture_density_pushforward(m: &DeltaMixtureModel) -> DiscreteMeasure {
    m.pushforward()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pushforward_transcribes_weights() {
        let m = DeltaMixtureModel::new(-2.0, 3.0, 0.3)
            .unwrap()
            .pushforward();
        assert_eq!(m.points().as_slice(), &[-2.0, 3.0]);
        assert_eq!(m.weights(), &[0.3, 0.7]);
        let one = DeltaMixtureModel::new(-1.0, 1.0, 1.0)
            .unwrap()
            .pushforward();
        assert_eq!(one.weights()[1], 0.0);
    }

    #[test]
    fn rejects_unordered_support() {
        assert!(DeltaMixtureModel::new(1.0, -1.0, 0.5).is_err());
        assert!(DeltaMixtureModel::new(-1.0, 1.0, -0.1).is_err());
    }
}
