use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::models::batch::{Provenance, SampleBatch};
use crate::scalar::Scalar;

/// Target distribution ρ_target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TargetSpec {
    DeltaMixture {
        a: f64,
        b: f64,
        alpha: f64,
    },
    Gaussian1d {
        mean: f64,
        std: f64,
    },
    /// `components` equally weighted isotropic Gaussians with centres
    /// equally spaced on a circle of `radius`.
    Ring {
        components: usize,
        radius: f64,
        std: f64,
    },
}

impl TargetSpec {
    pub fn dim(&self) -> usize {
        match self {
            TargetSpec::Ring { .. } => 2,
            _ => 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            TargetSpec::DeltaMixture { a, b, alpha } => {
                crate::models::DeltaMixtureModel::new(a, b, alpha).map(|_| ())
            }
            TargetSpec::Gaussian1d { std, .. } if !(std > 0.0) => {
                Err(Error::config("target std must be positive"))
            }
            TargetSpec::Ring {
                components,
                radius,
                std,
            } => {
                if components == 0 {
                    Err(Error::config("ring needs at least one component"))
                } else if !(radius >= 0.0) || !(std > 0.0) {
                    Err(Error::config(
                        "ring radius must be nonnegative and std positive",
                    ))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    /// Ring component centres.
    pub fn centres(&self) -> Vec<[f64; 2]> {
        match *self {
            TargetSpec::Ring {
                components, radius, ..
            } => (0..components)
                .map(|k| {
                    let t = 2.0 * PI * k as f64 / components as f64;
                    [radius * t.cos(), radius * t.sin()]
                })
                .collect(),
            _ => vec![],
        }
    }

    /// Batch `counter` of the target sampled with `seed`.
    pub fn batch<T: Scalar>(&self, seed: u64, counter: u64, rows: usize) -> SampleBatch<T> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7461_7267_6574);
        rng.set_stream(counter);
        let mut data = Vec::with_capacity(rows * self.dim());
        match *self {
            TargetSpec::DeltaMixture { a, b, alpha } => {
                for _ in 0..rows {
                    let u: f64 = rng.random();
                    data.push(T::of(if u < alpha { a } else { b }));
                }
            }
            TargetSpec::Gaussian1d { mean, std } => {
                for _ in 0..rows {
                    let e: f64 = rng.sample(StandardNormal);
                    data.push(T::of(mean + std * e));
                }
            }
            TargetSpec::Ring {
                components, std, ..
            } => {
                let centres = self.centres();
                for _ in 0..rows {
                    let c = centres[rng.random_range(0..components)];
                    let e0: f64 = rng.sample(StandardNormal);
                    let e1: f64 = rng.sample(StandardNormal);
                    data.push(T::of(c[0] + std * e0));
                    data.push(T::of(c[1] + std * e1));
                }
            }
        }
        SampleBatch {
            x: Matrix::from_vec(rows, self.dim(), data),
            provenance: Provenance::Target { seed, counter },
        }
    }

    pub fn sampler(&self, seed: u64) -> TargetSampler {
        TargetSampler {
            spec: self.clone(),
            seed,
            counter: 0,
        }
    }
}

/// Sequential target sampler; cloning forks the stream.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetSampler {
    spec: TargetSpec,
    seed: u64,
    counter: u64,
}

impl TargetSampler {
    pub fn next_batch<T: Scalar>(&mut self, rows: usize) -> SampleBatch<T> {
        let b = self.spec.batch(self.seed, self.counter, rows);
        self.counter += 1;
        b
    }

    pub fn spec(&self) -> &TargetSpec {
        &self.spec
    }
}
