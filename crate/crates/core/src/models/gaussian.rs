use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::generator::{Generator, GeneratorSpec};
use crate::params::ParamVector;

/// Diagonal Gaussian `N(μ, diag σ²)`, realized as `g(θ, z) = μ + σ ⊙ z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianLocationScale {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl GaussianLocationScale {
    pub fn new(mu: Vec<f64>, sigma: Vec<f64>) -> Result<Self> {
        if mu.len() != sigma.len() || mu.is_empty() {
            return Err(Error::config(
                "mu and sigma must be nonempty and of equal length",
            ));
        }
        if let Some(i) = sigma.iter().position(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::input(format!("sigma[{i}] must be positive")));
        }
        if mu.iter().any(|m| !m.is_finite()) {
            return Err(Error::input("mu must be finite"));
        }
        Ok(Self { mu, sigma })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// `θ = (μ, σ)`.
    pub fn theta(&self) -> ParamVector<f64> {
        let spec = GeneratorSpec::location_scale(self.dim());
        let mut v = self.mu.clone();
        v.extend_from_slice(&self.sigma);
        ParamVector::new(v, spec.layout()).expect("finite")
    }

    pub fn generator(&self) -> Generator<f64> {
        Generator::new(GeneratorSpec::location_scale(self.dim()), self.theta()).expect("valid spec")
    }

    /// Closed-form `W₂²` between diagonal Gaussians: `‖Δμ‖² + ‖Δσ‖²`.
    pub fn w2_sq(&self, other: &Self) -> f64 {
        self.mu
            .iter()
            .zip(&other.mu)
            .chain(self.sigma.iter().zip(&other.sigma))
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::latent::LatentSource;

    #[test]
    fn rejects_nonpositive_scale() {
        assert!(GaussianLocationScale::new(vec![0.0], vec![0.0]).is_err());
        assert!(GaussianLocationScale::new(vec![0.0, 1.0], vec![1.0]).is_err());
    }

    #[test]
    fn sample_moments_converge() {
        let g = GaussianLocationScale::new(vec![0.5, -1.0], vec![2.0, 0.3]).unwrap();
        let b = 100_000;
        let x = g
            .generator()
            .sample(&mut LatentSource::normal(2, 17).stream(), b)
            .unwrap()
            .x;
        let mean = x.column_means();
        let cov = x.covariance();
        for i in 0..2 {
            let s = g.sigma[i];
            let se_mean = s / (b as f64).sqrt();
            let se_var = s * s * (2.0 / b as f64).sqrt();
            assert!((mean[(0, i)] - g.mu[i]).abs() < 5.0 * se_mean);
            assert!((cov[(i, i)] - s * s).abs() < 5.0 * se_var);
        }
        assert_eq!(
            g.w2_sq(&GaussianLocationScale::new(vec![1.5, -1.0], vec![1.0, 0.3]).unwrap()),
            2.0
        );
    }
}
