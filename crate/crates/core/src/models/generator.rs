use serde::{Deserialize, Serialize};

use crate::diff::{evaluate, Arity, DiffFunction, Tape, Var};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::models::batch::{fingerprint, Provenance, SampleBatch};
use crate::models::latent::{LatentBatch, LatentStream};
use crate::models::mlp::{Activation, MlpSpec};
use crate::params::{Layout, ParamVector};
use crate::scalar::Scalar;

/// Family of maps `g(θ, ·): ℝ^ℓ → ℝ^n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Architecture {
    /// Fully connected network.
    Mlp {
        hidden: Vec<usize>,
        activation: Activation,
        output_activation: Activation,
    },
    /// `g = μ + σ ⊙ z` with `θ = (μ, σ)`; requires `ℓ = n`.
    LocationScale,
    /// `g = z`, no parameters; requires `ℓ = n`.
    Identity,
    /// `g = θ` for every latent.
    Constant,
    /// Two-point model on ℝ: `g = a` when `z < 2α − 1`, otherwise `b`, with
    /// `θ = (a, b)`. With `z ~ U[-1, 1]` the pushforward is
    /// `α δ_a + (1 − α) δ_b`.
    DeltaMixture { alpha: f64 },
}

/// Architecture plus latent and output dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub architecture: Architecture,
    pub latent_dim: usize,
    pub output_dim: usize,
}

impl GeneratorSpec {
    /// Two hidden tanh layers of width 32, linear output.
    pub fn default_mlp(latent_dim: usize, output_dim: usize) -> Self {
        Self {
            architecture: Architecture::Mlp {
                hidden: vec![32, 32],
                activation: Activation::Tanh,
                output_activation: Activation::Linear,
            },
            latent_dim,
            output_dim,
        }
    }

    pub fn location_scale(n: usize) -> Self {
        Self {
            architecture: Architecture::LocationScale,
            latent_dim: n,
            output_dim: n,
        }
    }

    pub fn delta_mixture(alpha: f64) -> Self {
        Self {
            architecture: Architecture::DeltaMixture { alpha },
            latent_dim: 1,
            output_dim: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.latent_dim == 0 || self.output_dim == 0 {
            return Err(Error::config(
                "latent and output dimensions must be at least 1",
            ));
        }
        match &self.architecture {
            Architecture::LocationScale | Architecture::Identity
                if self.latent_dim != self.output_dim =>
            {
                Err(Error::config(format!(
                    "{:?} needs latent_dim = output_dim, got {} and {}",
                    self.architecture, self.latent_dim, self.output_dim
                )))
            }
            Architecture::DeltaMixture { alpha } => {
                if self.latent_dim != 1 || self.output_dim != 1 {
                    return Err(Error::config("delta-mixture generator is one-dimensional"));
                }
                if !(0.0..=1.0).contains(alpha) {
                    return Err(Error::config(format!("alpha {alpha} is outside [0, 1]")));
                }
                Ok(())
            }
            Architecture::Mlp { hidden, .. } if hidden.contains(&0) => {
                Err(Error::config("hidden layer widths must be positive"))
            }
            _ => Ok(()),
        }
    }

    fn mlp(&self) -> Option<MlpSpec> {
        match &self.architecture {
            Architecture::Mlp {
                hidden,
                activation,
                output_activation,
            } => Some(MlpSpec {
                input: self.latent_dim,
                hidden: hidden.clone(),
                output: self.output_dim,
                activation: *activation,
                output_activation: *output_activation,
            }),
            _ => None,
        }
    }

    /// Latent law the architecture is meant for: uniform on `[-1, 1]` for
    /// the delta mixture, standard normal otherwise.
    pub fn default_latent(&self) -> crate::models::latent::LatentDistribution {
        match self.architecture {
            Architecture::DeltaMixture { .. } => crate::models::latent::LatentDistribution::Uniform,
            _ => crate::models::latent::LatentDistribution::StandardNormal,
        }
    }

    pub fn layout(&self) -> Layout {
        let n = self.output_dim;
        match &self.architecture {
            Architecture::Mlp { .. } => self.mlp().expect("mlp").layout(),
            Architecture::LocationScale => Layout::new().with("mu", n).with("sigma", n),
            Architecture::Identity => Layout::new(),
            Architecture::Constant => Layout::single("c", n),
            Architecture::DeltaMixture { .. } => Layout::new().with("a", 1).with("b", 1),
        }
    }

    pub fn param_len(&self) -> usize {
        self.layout().total()
    }

    /// Initial parameters: Glorot for networks, `(0, 1)` for location-scale,
    /// zeros for constants, `(-1, 1)` for the delta mixture.
    pub fn init<T: Scalar>(&self, seed: u64) -> ParamVector<T> {
        let n = self.output_dim;
        let values = match &self.architecture {
            Architecture::Mlp { .. } => return self.mlp().expect("mlp").init(seed),
            Architecture::LocationScale => {
                let mut v = vec![T::zero(); n];
                v.extend(std::iter::repeat_n(T::one(), n));
                v
            }
            Architecture::Identity => vec![],
            Architecture::Constant => vec![T::zero(); n],
            Architecture::DeltaMixture { .. } => vec![-T::one(), T::one()],
        };
        ParamVector::new(values, self.layout()).expect("finite initial parameters")
    }
}

impl<T: Scalar> DiffFunction<T> for GeneratorSpec {
    fn arity(&self) -> Arity {
        Arity::batched(self.param_len(), self.latent_dim, self.output_dim)
    }

    fn build<'t>(&self, tape: &'t Tape<T>, theta: Var<'t, T>, z: Var<'t, T>) -> Var<'t, T> {
        let n = self.output_dim;
        let rows = z.rows();
        match &self.architecture {
            Architecture::Mlp { .. } => self.mlp().expect("mlp").forward(theta, z),
            Architecture::LocationScale => {
                let mu = theta.slice(0, 1, n);
                let sigma = theta.slice(n, 1, n);
                z.mul_row(sigma).add_row(mu)
            }
            Architecture::Identity => z,
            Architecture::Constant => tape
                .constant(Matrix::zeros(rows, n))
                .add_row(theta.slice(0, 1, n)),
            Architecture::DeltaMixture { alpha } => {
                let cut = T::of(2.0 * alpha - 1.0);
                let at_a = z.with_value(|v| v.map(|x| if x < cut { T::one() } else { T::zero() }));
                let at_b = at_a.map(|x| T::one() - x);
                let a = theta.slice(0, 1, 1);
                let b = theta.slice(1, 1, 1);
                tape.constant(at_a).mul_scalar(a) + tape.constant(at_b).mul_scalar(b)
            }
        }
    }
}

/// A generator spec with concrete parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator<T> {
    pub spec: GeneratorSpec,
    pub theta: ParamVector<T>,
}

impl<T: Scalar> Generator<T> {
    pub fn new(spec: GeneratorSpec, theta: ParamVector<T>) -> Result<Self> {
        spec.validate()?;
        if theta.len() != spec.param_len() {
            return Err(Error::config(format!(
                "generator expects {} parameters, got {}",
                spec.param_len(),
                theta.len()
            )));
        }
        Ok(Self { spec, theta })
    }

    pub fn with_theta(&self, theta: ParamVector<T>) -> Result<Self> {
        Self::new(self.spec.clone(), theta)
    }

    /// Draws the next latent batch from `stream` and pushes it forward.
    pub fn sample(&self, stream: &mut LatentStream, rows: usize) -> Result<SampleBatch<T>> {
        assert!(rows >= 1, "batch size must be at least 1");
        let latent = stream.next_batch(rows);
        self.replay(&latent)
    }

    /// Pushes a recorded latent batch forward at the current parameters.
    pub fn replay(&self, latent: &LatentBatch<T>) -> Result<SampleBatch<T>> {
        replay(&self.spec, self.theta.values(), latent)
    }
}

/// `g(θ, Z)` for a recorded latent batch, with provenance.
pub fn replay<T: Scalar>(
    spec: &GeneratorSpec,
    theta: &[T],
    latent: &LatentBatch<T>,
) -> Result<SampleBatch<T>> {
    let x = evaluate(spec, theta, &latent.z)?;
    Ok(SampleBatch {
        x,
        provenance: Provenance::Latent {
            seed: latent.seed,
            counter: latent.counter,
            theta: fingerprint(theta),
        },
    })
}
