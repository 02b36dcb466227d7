//! Experiment configuration as TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adversarial::{DiscriminatorSpec, LossMode, PotentialSpec, TrainConfig};
use crate::error::{Error, Result};
use crate::models::{Architecture, GeneratorSpec, TargetSpec};
use crate::optim::FlowConfig;
use crate::wmetric::PenaltyKind;

/// Time discretization used by the `flow` command.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlowScheme {
    ForwardEuler,
    SemiBackward,
    BackwardEuler,
}

/// Loss driven by the `flow` command.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlowObjective {
    /// Exact distance to the target: `W₂²` for a 1-D location-scale model
    /// against a Gaussian, `W₁` for a delta mixture against a delta mixture.
    ClosedForm,
    /// Empirical `W₁` on a fixed latent batch against a fixed target batch.
    SampleW1,
}

fn default_flow_batch() -> usize {
    256
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowSettings {
    pub scheme: FlowScheme,
    pub objective: FlowObjective,
    pub steps: usize,
    pub config: FlowConfig,
    #[serde(default = "default_flow_batch")]
    pub batch: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta0: Option<Vec<f64>>,
}

/// Everything one `train` or `flow` run needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub plot: bool,
    /// Seeds to sweep; empty means the training seed alone.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub seeds: Vec<u64>,
    /// Penalties to sweep; empty means the training penalty alone.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub penalties: Vec<PenaltyKind>,
    pub generator: GeneratorSpec,
    pub target: TargetSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discriminator: Option<DiscriminatorSpec>,
    /// Present: train with the learned-potential penalty.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<PotentialSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<TrainConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flow: Option<FlowSettings>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

impl ExperimentConfig {
    /// Parses and validates; syntax and schema errors carry a line number.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| {
            let msg = e.message().to_string();
            match e.span() {
                Some(span) => Error::Config(format!("line {}: {msg}", line_of(text, span.start))),
                None => Error::Config(msg),
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(Error::config(format!(
                "invalid experiment name `{}`",
                self.name
            )));
        }
        self.generator.validate()?;
        self.target.validate()?;
        let n = self.generator.output_dim;
        if self.target.dim() != n {
            return Err(Error::config(format!(
                "target dimension {} does not match generator output {n}",
                self.target.dim()
            )));
        }
        if self.train.is_none() && self.flow.is_none() {
            return Err(Error::config("config needs a [train] or a [flow] section"));
        }
        if let Some(train) = &self.train {
            train.validate(&self.generator)?;
            for kind in &self.penalties {
                train.penalty.with_kind(*kind).validate(n)?;
            }
            match (&self.discriminator, train.loss) {
                (None, LossMode::VanillaGan) => {
                    return Err(Error::config(
                        "the GAN loss needs a [discriminator] section",
                    ));
                }
                (Some(d), _) if d.input_dim != n => {
                    return Err(Error::config(
                        "discriminator input_dim must equal the generator output",
                    ));
                }
                _ => {}
            }
            if let Some(p) = &self.potential {
                if p.input_dim != n {
                    return Err(Error::config(
                        "potential input_dim must equal the generator output",
                    ));
                }
                if train.potential_iters == 0 {
                    return Err(Error::config("a potential needs potential_iters >= 1"));
                }
            }
        }
        if let Some(flow) = &self.flow {
            flow.config.validate()?;
            if flow.steps == 0 || flow.batch == 0 {
                return Err(Error::config("flow steps and batch must be positive"));
            }
            if let Some(t) = &flow.theta0 {
                if t.len() != self.generator.param_len() {
                    return Err(Error::config(format!(
                        "theta0 has {} entries, the generator has {} parameters",
                        t.len(),
                        self.generator.param_len()
                    )));
                }
            }
            let closed_ok = matches!(
                (&self.generator.architecture, &self.target),
                (Architecture::LocationScale, TargetSpec::Gaussian1d { .. })
                    | (
                        Architecture::DeltaMixture { .. },
                        TargetSpec::DeltaMixture { .. }
                    )
            );
            if flow.objective == FlowObjective::ClosedForm && !closed_ok {
                return Err(Error::config(
                    "closed-form objective needs a location-scale model with a Gaussian target \
                     or a delta mixture with a delta-mixture target",
                ));
            }
            if flow.objective == FlowObjective::SampleW1 && n > 2 {
                return Err(Error::UnsupportedDimension(format!(
                    "sample W1 supports n <= 2, got {n}"
                )));
            }
        }
        Ok(())
    }

    /// The seeds of a sweep.
    pub fn sweep_seeds(&self) -> Vec<u64> {
        match (&self.seeds[..], &self.train) {
            ([], Some(t)) => vec![t.seed],
            ([], None) => vec![0],
            (s, _) => s.to_vec(),
        }
    }

    /// The penalties of a sweep.
    pub fn sweep_penalties(&self) -> Vec<PenaltyKind> {
        match (&self.penalties[..], &self.train) {
            ([], Some(t)) => vec![t.penalty.kind],
            ([], None) => vec![PenaltyKind::None],
            (p, _) => p.to_vec(),
        }
    }
}
