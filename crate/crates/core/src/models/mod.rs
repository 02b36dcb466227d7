//! Parametric families: implicit generators, the two-point delta mixture,
//! Gaussian location-scale models, and latent and target samplers.

mod batch;
mod delta;
mod gaussian;
mod generator;
mod latent;
mod mlp;
mod target;

pub use batch::{fingerprint, Provenance, SampleBatch};
pub use delta::{delta_mixture_density_pushforward, DeltaMixtureModel};
pub use gaussian::GaussianLocationScale;
pub use generator::{replay, Architecture, Generator, GeneratorSpec};
pub use latent::{LatentBatch, LatentDistribution, LatentSource, LatentStream};
pub use mlp::{Activation, MlpSpec, LEAKY_SLOPE};
pub use target::{TargetSampler, TargetSpec};
