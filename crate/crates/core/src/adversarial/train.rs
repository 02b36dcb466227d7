//! Adversarial training loops with a proximal generator update.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::adversarial::loss::{disc_loss_tape, gen_loss_tape, potential_objective_tape};
use crate::adversarial::nets::{DiscriminatorSpec, PotentialSpec};
use crate::diff::{DiffFunction, Tape};
use crate::error::{Error, Result};
use crate::eval::{sliced_w1_tape, EvalMetric};
use crate::matrix::Matrix;
use crate::models::{
    replay, Generator, GeneratorSpec, LatentBatch, LatentSource, SampleBatch, TargetSpec,
};
use crate::optim::{InnerOptimizer, OptimizerConfig, DIVERGENCE_FACTOR};
use crate::params::ParamVector;
use crate::scalar::Scalar;
use crate::wmetric::{PenaltyKind, ProximalPenalty};

/// Generator objective `F`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossMode {
    /// Non-saturating GAN loss against a trained discriminator.
    #[default]
    VanillaGan,
    /// Empirical W₁ to a target batch; no discriminator.
    DirectW1,
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

fn fifty() -> usize {
    50
}

fn default_potential_opt() -> OptimizerConfig {
    OptimizerConfig::adam(1e-2, 0.5, 0.999)
}

/// Hyperparameters shared by both training algorithms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub batch: usize,
    pub outer_iters: usize,
    /// Generator steps ℓ per outer iteration.
    pub gen_iters: usize,
    #[serde(default = "one")]
    pub disc_iters: usize,
    /// Potential ascent steps per outer iteration (Algorithm 2 only).
    #[serde(default)]
    pub potential_iters: usize,
    pub gen_opt: OptimizerConfig,
    pub disc_opt: OptimizerConfig,
    #[serde(default = "default_potential_opt")]
    pub potential_opt: OptimizerConfig,
    pub penalty: ProximalPenalty,
    /// Proximal step `h`; `inf` turns the penalty off.
    pub h: f64,
    pub seed: u64,
    #[serde(default)]
    pub loss: LossMode,
    /// Draw a fresh latent batch for every generator step. When false one
    /// batch is reused for all ℓ steps of an outer iteration.
    #[serde(default = "yes")]
    pub resample_latent: bool,
    #[serde(default = "fifty")]
    pub eval_every: usize,
    pub eval: EvalMetric,
    /// Keep θ after every outer iteration in the log.
    #[serde(default)]
    pub record_params: bool,
    /// Stop after the first evaluation below this value.
    #[serde(default)]
    pub stop_below: Option<f64>,
}

impl TrainConfig {
    pub fn validate(&self, gen: &GeneratorSpec) -> Result<()> {
        if self.batch == 0 || self.outer_iters == 0 || self.gen_iters == 0 || self.disc_iters == 0 {
            return Err(Error::config("batch and iteration counts must be positive"));
        }
        if self.eval_every == 0 {
            return Err(Error::config("eval_every must be positive"));
        }
        if !(self.h > 0.0) {
            return Err(Error::config(format!("h must be positive, got {}", self.h)));
        }
        self.gen_opt.validate()?;
        self.disc_opt.validate()?;
        self.potential_opt.validate()?;
        self.penalty.validate(gen.output_dim)?;
        self.eval.validate(gen.output_dim)?;
        if self.loss == LossMode::DirectW1 && gen.output_dim > 2 {
            return Err(Error::UnsupportedDimension(format!(
                "direct W1 supports n <= 2, got n = {}",
                gen.output_dim
            )));
        }
        Ok(())
    }

    /// Weight of `D̃²` in the generator objective.
    pub fn penalty_weight(&self) -> f64 {
        if self.h.is_infinite() {
            0.0
        } else {
            0.5 / self.h
        }
    }
}

/// A discriminator spec with parameters ω.
#[derive(Debug, Clone, PartialEq)]
pub struct Discriminator<T> {
    pub spec: DiscriminatorSpec,
    pub omega: ParamVector<T>,
}

impl<T: Scalar> Discriminator<T> {
    pub fn init(spec: DiscriminatorSpec, seed: u64) -> Self {
        let omega = spec.init(seed);
        Self { spec, omega }
    }
}

/// A potential spec with parameters p.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential<T> {
    pub spec: PotentialSpec,
    pub p: ParamVector<T>,
}

impl<T: Scalar> Potential<T> {
    pub fn init(spec: PotentialSpec, seed: u64) -> Self {
        let p = spec.init(seed);
        Self { spec, p }
    }
}

/// One line of the training log. Absent values are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainRow {
    pub outer_iter: usize,
    pub disc_loss: Option<f64>,
    pub gen_loss: f64,
    pub penalty: f64,
    pub eval_metric: Option<f64>,
    /// Learned `D̃²` of the potential (Algorithm 2).
    pub potential: Option<f64>,
    pub wallclock_s: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainLog {
    pub rows: Vec<TrainRow>,
    /// θ⁰, θ¹, … when `record_params` is set.
    pub params: Vec<Vec<f64>>,
    pub metric_label: String,
    pub has_potential: bool,
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl TrainLog {
    /// `(outer_iter, value)` for every evaluated iteration.
    pub fn eval_series(&self) -> Vec<(usize, f64)> {
        self.rows
            .iter()
            .filter_map(|r| r.eval_metric.map(|v| (r.outer_iter, v)))
            .collect()
    }

    pub fn last_eval(&self) -> Option<f64> {
        self.eval_series().last().map(|p| p.1)
    }

    pub fn write_csv_to(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec![
            "outer_iter",
            "disc_loss",
            "gen_loss",
            "penalty",
            "eval_metric",
            "wallclock_s",
        ];
        if self.has_potential {
            header.push("potential");
        }
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![
                r.outer_iter.to_string(),
                opt_cell(r.disc_loss),
                r.gen_loss.to_string(),
                r.penalty.to_string(),
                opt_cell(r.eval_metric),
                format!("{:.3}", r.wallclock_s),
            ];
            if self.has_potential {
                rec.push(opt_cell(r.potential));
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        self.write_csv_to(std::fs::File::create(path)?)
    }
}

#[derive(Debug, Clone)]
pub struct TrainResult<T> {
    pub generator: Generator<T>,
    pub discriminator: Option<Discriminator<T>>,
    pub potential: Option<Potential<T>>,
    pub log: TrainLog,
}

/// Fixed latent and target batches the evaluation metric is computed on.
#[derive(Debug, Clone)]
pub struct EvalSet<T> {
    pub latent: LatentBatch<T>,
    pub target: Matrix<f64>,
    pub metric: EvalMetric,
}

impl<T: Scalar> EvalSet<T> {
    pub fn new(gen: &GeneratorSpec, target: &TargetSpec, metric: EvalMetric, seed: u64) -> Self {
        let src = LatentSource::new(gen.default_latent(), gen.latent_dim, seed ^ 0x65_7661_6c7a);
        let t: SampleBatch<f64> = target.batch(seed ^ 0x65_7661_6c74, 0, metric.batch);
        Self {
            latent: src.batch(0, metric.batch),
            target: t.x,
            metric,
        }
    }

    pub fn evaluate(&self, gen: &GeneratorSpec, theta: &[T]) -> Result<f64> {
        let x = replay(gen, theta, &self.latent)?.x.cast::<f64>();
        self.metric.compute(&x, &self.target)
    }
}

/// Algorithm 1: discriminator steps, then ℓ generator steps on
/// `F(θ) + D̃(θ, θ^k)² / (2h)` with `θ^k` the generator at the start of
/// the outer iteration.
pub fn train_algorithm1<T: Scalar>(
    gen: &Generator<T>,
    disc: &Discriminator<T>,
    target: &TargetSpec,
    cfg: &TrainConfig,
) -> Result<TrainResult<T>> {
    run(gen, Some(disc), None, target, cfg)
}

/// Algorithm 1 with the empirical W₁ loss and no discriminator.
pub fn train_direct_w1<T: Scalar>(
    gen: &Generator<T>,
    target: &TargetSpec,
    cfg: &TrainConfig,
) -> Result<TrainResult<T>> {
    if cfg.loss != LossMode::DirectW1 {
        return Err(Error::config("train_direct_w1 needs loss = direct-w1"));
    }
    run(gen, None, None, target, cfg)
}

/// Algorithm 2: the penalty is a learned potential fitted between
/// `g(θ, Z)` and `g(θ^{k−1}, Z)`, where `θ^{k−1}` is the generator at the
/// start of the previous outer iteration (θ⁰ at the first).
pub fn train_algorithm2<T: Scalar>(
    gen: &Generator<T>,
    disc: Option<&Discriminator<T>>,
    potential: &Potential<T>,
    target: &TargetSpec,
    cfg: &TrainConfig,
) -> Result<TrainResult<T>> {
    if potential.spec.input_dim != gen.spec.output_dim {
        return Err(Error::config(
            "potential input dimension must equal the generator output dimension",
        ));
    }
    run(gen, disc, Some(potential), target, cfg)
}

fn run<T: Scalar>(
    gen: &Generator<T>,
    disc: Option<&Discriminator<T>>,
    potential: Option<&Potential<T>>,
    target: &TargetSpec,
    cfg: &TrainConfig,
) -> Result<TrainResult<T>> {
    let spec = &gen.spec;
    spec.validate()?;
    target.validate()?;
    cfg.validate(spec)?;
    if target.dim() != spec.output_dim {
        return Err(Error::config(format!(
            "target dimension {} does not match generator output {}",
            target.dim(),
            spec.output_dim
        )));
    }
    let mut disc = match (cfg.loss, disc) {
        (LossMode::VanillaGan, None) => {
            return Err(Error::config("the GAN loss needs a discriminator"))
        }
        (LossMode::VanillaGan, Some(d)) => {
            if d.spec.input_dim != spec.output_dim {
                return Err(Error::config(
                    "discriminator input dimension must equal the generator output",
                ));
            }
            Some(d.clone())
        }
        (LossMode::DirectW1, _) => None,
    };
    let mut potential = potential.cloned();

    let start = Instant::now();
    let mut stream = LatentSource::new(spec.default_latent(), spec.latent_dim, cfg.seed).stream();
    let mut sampler = target.sampler(cfg.seed.wrapping_add(1));
    let eval = EvalSet::<T>::new(spec, target, cfg.eval, cfg.seed);

    let mut theta = gen.theta.values().to_vec();
    let mut gen_opt = InnerOptimizer::new(cfg.gen_opt, theta.len());
    let mut disc_opt = disc
        .as_ref()
        .map(|d| InnerOptimizer::new(cfg.disc_opt, d.omega.len()));
    let mut pot_opt = potential
        .as_ref()
        .map(|p| InnerOptimizer::new(cfg.potential_opt, p.p.len()));
    let weight = T::of(cfg.penalty_weight());
    let penalized = cfg.penalty_weight() > 0.0
        && (potential.is_some() || cfg.penalty.kind != PenaltyKind::None);
    let b = cfg.batch;

    let mut log = TrainLog {
        metric_label: cfg.eval.label().to_string(),
        has_potential: potential.is_some(),
        ..Default::default()
    };
    if cfg.record_params {
        log.params.push(to_f64(&theta));
    }
    let mut previous_anchor = theta.clone();

    for k in 0..cfg.outer_iters {
        let anchor_k = theta.clone();

        let mut disc_loss = None;
        if let (Some(d), Some(opt)) = (disc.as_mut(), disc_opt.as_mut()) {
            for _ in 0..cfg.disc_iters {
                let real = sampler.next_batch::<T>(b);
                let fake = replay(spec, &theta, &stream.next_batch(b))?;
                let mut omega = d.omega.values().to_vec();
                let tape = Tape::new();
                let w = tape.leaf(Matrix::column(omega.clone()));
                let loss = disc_loss_tape(&d.spec, w, tape.constant(real.x), tape.constant(fake.x));
                tape.check()?;
                let g = tape.backward(loss, Matrix::scalar(T::one())).wrt(w);
                tape.check()?;
                opt.step(&mut omega, g.as_slice())?;
                d.omega = d.omega.with_values(omega)?;
                disc_loss = Some(loss.item().to_f64_lossy());
            }
        }

        // Algorithm 2: fit Φ_p between the current generator and θ^{k−1}.
        let mut learned = None;
        if let (Some(pot), Some(opt)) = (potential.as_mut(), pot_opt.as_mut()) {
            let mut p = pot.p.values().to_vec();
            for _ in 0..cfg.potential_iters {
                let z = stream.next_batch::<T>(b);
                let x = replay(spec, &theta, &z)?.x;
                let y = replay(spec, &previous_anchor, &z)?.x;
                let tape = Tape::new();
                let pv = tape.leaf(Matrix::column(p.clone()));
                let j = potential_objective_tape(
                    &tape,
                    &pot.spec,
                    pv,
                    tape.constant(x),
                    tape.constant(y),
                );
                tape.check()?;
                let g = tape.backward(j, Matrix::scalar(T::one())).wrt(pv);
                tape.check()?;
                let ascent: Vec<T> = g.as_slice().iter().map(|v| -*v).collect();
                opt.step(&mut p, &ascent)?;
                learned = Some(j.item().to_f64_lossy() * 2.0);
            }
            pot.p = pot.p.with_values(p)?;
        }

        let fixed_z = (!cfg.resample_latent).then(|| stream.next_batch::<T>(b));
        let fixed_target = match (cfg.loss, cfg.resample_latent) {
            (LossMode::DirectW1, false) => Some(sampler.next_batch::<T>(b).x),
            _ => None,
        };
        let mut trace = Vec::with_capacity(cfg.gen_iters);
        let (mut last_f, mut last_pen) = (0.0, 0.0);
        for i in 0..cfg.gen_iters {
            let z = match &fixed_z {
                Some(z) => z.z.clone(),
                None => stream.next_batch::<T>(b).z,
            };
            let tb = match (cfg.loss, &fixed_target) {
                (LossMode::DirectW1, Some(t)) => Some(t.clone()),
                (LossMode::DirectW1, None) => Some(sampler.next_batch::<T>(b).x),
                _ => None,
            };
            let tape = Tape::new();
            let th = tape.leaf(Matrix::column(theta.clone()));
            let zv = tape.constant(z);
            let x = spec.build(&tape, th, zv);
            let f = match (&disc, &tb) {
                (_, Some(t)) => sliced_w1_tape(&tape, x, t),
                (Some(d), None) => gen_loss_tape(&d.spec, tape.constant(d.omega.as_column()), x),
                (None, None) => unreachable!("loss mode checked above"),
            };
            let pen = if !penalized {
                tape.scalar(T::zero())
            } else if let Some(pot) = &potential {
                let y = spec.build(
                    &tape,
                    tape.constant(Matrix::column(previous_anchor.clone())),
                    zv,
                );
                potential_objective_tape(&tape, &pot.spec, tape.constant(pot.p.as_column()), x, y)
                    .scale(T::two())
            } else {
                cfg.penalty.build_from(&tape, spec, th, x, &anchor_k, zv)
            };
            let obj = f + pen.scale(weight);
            tape.check()?;
            let value = obj.item().to_f64_lossy();
            trace.push(value);
            let initial = trace[0];
            if !value.is_finite()
                || (value > DIVERGENCE_FACTOR * initial.abs().max(1.0) && value > initial)
            {
                if value.is_finite() {
                    return Err(Error::Divergence {
                        iteration: k * cfg.gen_iters + i,
                        initial,
                        objective: value,
                        trace,
                    });
                }
                return Err(Error::NonFinite {
                    primitive: "generator objective".into(),
                });
            }
            let g = tape.backward(obj, Matrix::scalar(T::one())).wrt(th);
            tape.check()?;
            gen_opt.step(&mut theta, g.as_slice())?;
            last_f = f.item().to_f64_lossy();
            last_pen = pen.item().to_f64_lossy();
        }

        previous_anchor = anchor_k;
        if cfg.record_params {
            log.params.push(to_f64(&theta));
        }
        let last = k + 1 == cfg.outer_iters;
        let eval_metric = if k % cfg.eval_every == 0 || last {
            Some(eval.evaluate(spec, &theta)?)
        } else {
            None
        };
        log.rows.push(TrainRow {
            outer_iter: k,
            disc_loss,
            gen_loss: last_f,
            penalty: last_pen,
            eval_metric,
            potential: learned,
            wallclock_s: start.elapsed().as_secs_f64(),
        });
        if let (Some(limit), Some(v)) = (cfg.stop_below, eval_metric) {
            if v < limit {
                break;
            }
        }
    }

    Ok(TrainResult {
        generator: gen.with_theta(gen.theta.with_values(theta)?)?,
        discriminator: disc,
        potential,
        log,
    })
}

fn to_f64<T: Scalar>(v: &[T]) -> Vec<f64> {
    v.iter().map(|x| x.to_f64_lossy()).collect()
}
