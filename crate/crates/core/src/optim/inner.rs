use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Update rule of an [`InnerOptimizer`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerRule {
    /// `θ ← θ − η ∇`.
    Plain,
    /// Adam with bias correction.
    Adam,
}

fn default_beta1() -> f64 {
    0.5
}

fn default_beta2() -> f64 {
    0.999
}

fn default_eps() -> f64 {
    1e-8
}

/// Rule, step size η, and the Adam decay rates and stabilizer (ignored by
/// the plain rule).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    pub rule: OptimizerRule,
    pub lr: f64,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
}

impl OptimizerConfig {
    pub fn plain(lr: f64) -> Self {
        Self {
            rule: OptimizerRule::Plain,
            lr,
            beta1: default_beta1(),
            beta2: default_beta2(),
            eps: default_eps(),
        }
    }

    pub fn adam(lr: f64, beta1: f64, beta2: f64) -> Self {
        Self {
            rule: OptimizerRule::Adam,
            lr,
            beta1,
            beta2,
            eps: default_eps(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::config(format!(
                "learning rate {} must be positive",
                self.lr
            )));
        }
        let unit = 0.0..1.0;
        if !unit.contains(&self.beta1) || !unit.contains(&self.beta2) || !(self.eps > 0.0) {
            return Err(Error::config(
                "optimizer needs beta1, beta2 in [0, 1) and eps > 0",
            ));
        }
        Ok(())
    }
}

/// Optimizer with per-parameter state.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerOptimizer<T> {
    pub config: OptimizerConfig,
    m: Vec<T>,
    v: Vec<T>,
    t: i32,
}

impl<T: Scalar> InnerOptimizer<T> {
    pub fn new(config: OptimizerConfig, len: usize) -> Self {
        Self {
            config,
            m: vec![T::zero(); len],
            v: vec![T::zero(); len],
            t: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    pub fn steps_taken(&self) -> i32 {
        self.t
    }

    pub fn reset(&mut self) {
        self.m.iter_mut().for_each(|x| *x = T::zero());
        self.v.iter_mut().for_each(|x| *x = T::zero());
        self.t = 0;
    }

    /// One descent step on `theta` given `grad`.
    pub fn step(&mut self, theta: &mut [T], grad: &[T]) -> Result<()> {
        assert_eq!(
            theta.len(),
            self.m.len(),
            "optimizer state does not match parameters"
        );
        assert_eq!(grad.len(), theta.len());
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite {
                primitive: "gradient".into(),
            });
        }
        let lr = T::of(self.config.lr);
        self.t += 1;
        match self.config.rule {
            OptimizerRule::Plain => {
                for (p, &g) in theta.iter_mut().zip(grad) {
                    *p = *p - lr * g;
                }
            }
            OptimizerRule::Adam => {
                let c = &self.config;
                let (b1, b2, eps) = (T::of(c.beta1), T::of(c.beta2), T::of(c.eps));
                let c1 = T::one() - b1.powi(self.t);
                let c2 = T::one() - b2.powi(self.t);
                for i in 0..theta.len() {
                    let g = grad[i];
                    self.m[i] = b1 * self.m[i] + (T::one() - b1) * g;
                    self.v[i] = b2 * self.v[i] + (T::one() - b2) * g * g;
                    let mh = self.m[i] / c1;
                    let vh = self.v[i] / c2;
                    theta[i] = theta[i] - lr * mh / (vh.sqrt() + eps);
                }
            }
        }
        Ok(())
    }
}
