//! Experiment drivers behind the command line tool.

use std::path::{Path, PathBuf};

use crate::adversarial::{
    train_algorithm1, train_algorithm2, train_direct_w1, Discriminator, LossMode, Potential,
    TrainConfig, TrainLog,
};
use crate::diff::{DiffFunction, FnObjective};
use crate::error::{Error, Result};
use crate::eval::sliced_w1_tape;
use crate::experiment::config::{ExperimentConfig, FlowObjective, FlowScheme};
use crate::experiment::plot::{envelope_svg, vector_field_svg, EnvelopeSeries};
use crate::experiment::snapshot::write_snapshot;
use crate::experiment::toy::{toy_example1, write_toy_csv, ToySettings};
use crate::matrix::Matrix;
use crate::models::{
    replay, Architecture, Generator, GeneratorSpec, LatentSource, SampleBatch, TargetSpec,
};
use crate::optim::{
    backward_euler_step, flow_integrate, forward_euler_step, sbe_step, InnerOptimizer, StepOutcome,
    Trajectory,
};
use crate::params::ParamVector;
use crate::wmetric::{
    affine_pullback_metric, delta_mixture_metric, exact1d_penalty, metric_tensor_1d_on,
    AffineBasis, AffineDegree, MetricTensor, MidpointRule, PenaltyKind, ProximalPenalty,
};

/// Mixing constants that separate the seeds of the networks of one run.
const DISC_SEED_OFFSET: u64 = 0x5eed_d15c;
const POTENTIAL_SEED_OFFSET: u64 = 0x5eed_9073;

/// α of the vector-field plot written next to training runs.
pub const PLOT_ALPHA: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub penalty: PenaltyKind,
    pub seed: u64,
    pub log_path: PathBuf,
    pub snapshot_path: PathBuf,
    pub final_metric: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentReport {
    pub runs: Vec<RunSummary>,
    pub plots: Vec<PathBuf>,
    pub logs: Vec<TrainLog>,
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| Error::Io(format!("cannot create {}: {e}", dir.display())))
}

/// Trains one (penalty, seed) pair of a sweep.
pub fn train_once(
    cfg: &ExperimentConfig,
    penalty: PenaltyKind,
    seed: u64,
) -> Result<(Generator<f64>, TrainLog)> {
    let base = cfg
        .train
        .as_ref()
        .ok_or_else(|| Error::config("config has no [train] section"))?;
    let train = TrainConfig {
        seed,
        penalty: base.penalty.with_kind(penalty),
        ..base.clone()
    };
    let spec = cfg.generator.clone();
    let gen = Generator::new(spec.clone(), spec.init(seed))?;
    let disc = cfg
        .discriminator
        .as_ref()
        .map(|d| Discriminator::init(d.clone(), seed ^ DISC_SEED_OFFSET));
    let result = match (&cfg.potential, train.loss, &disc) {
        (Some(p), _, _) => {
            let pot = Potential::init(*p, seed ^ POTENTIAL_SEED_OFFSET);
            train_algorithm2(&gen, disc.as_ref(), &pot, &cfg.target, &train)?
        }
        (None, LossMode::DirectW1, _) => train_direct_w1(&gen, &cfg.target, &train)?,
        (None, LossMode::VanillaGan, Some(d)) => train_algorithm1(&gen, d, &cfg.target, &train)?,
        (None, LossMode::VanillaGan, None) => {
            return Err(Error::config("the GAN loss needs a discriminator"))
        }
    };
    Ok((result.generator, result.log))
}

/// Runs every (penalty, seed) pair, writing `<name>_<penalty>_seed<k>.csv`
/// logs and `.snapshot` files, plus the plots when enabled.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    ensure_dir(&cfg.output_dir)?;
    let mut report = ExperimentReport::default();
    let mut series = Vec::new();
    for penalty in cfg.sweep_penalties() {
        let mut runs = Vec::new();
        for seed in cfg.sweep_seeds() {
            let (gen, log) = train_once(cfg, penalty, seed)?;
            let stem = format!("{}_{}_seed{seed}", cfg.name, penalty.name());
            let log_path = cfg.output_dir.join(format!("{stem}.csv"));
            let snapshot_path = cfg.output_dir.join(format!("{stem}.snapshot"));
            log.write_csv(&log_path)?;
            write_snapshot(&snapshot_path, &gen)?;
            runs.push(
                log.rows
                    .iter()
                    .filter_map(|r| r.eval_metric.map(|v| (r.wallclock_s, v)))
                    .collect(),
            );
            report.runs.push(RunSummary {
                penalty,
                seed,
                log_path,
                snapshot_path,
                final_metric: log.last_eval(),
            });
            report.logs.push(log);
        }
        series.push(EnvelopeSeries {
            label: penalty.name().to_string(),
            runs,
        });
    }
    if cfg.plot {
        let label = cfg
            .train
            .as_ref()
            .map(|t| t.eval.label())
            .unwrap_or("metric");
        let path = cfg.output_dir.join(format!("{}_envelope.svg", cfg.name));
        std::fs::write(&path, envelope_svg(&series, label))?;
        report.plots.push(path);
        report.plots.extend(write_toy_artifacts(
            &cfg.output_dir,
            &cfg.name,
            &ToySettings::new(PLOT_ALPHA),
        )?);
    }
    Ok(report)
}

/// Grid CSV and vector-field SVG of the two-point mixture example.
pub fn write_toy_artifacts(dir: &Path, stem: &str, settings: &ToySettings) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let rows = toy_example1(settings)?;
    let csv_path = dir.join(format!("{stem}_toy_example1.csv"));
    write_toy_csv(&rows, std::fs::File::create(&csv_path)?)?;
    let svg_path = dir.join(format!("{stem}_toy_example1.svg"));
    std::fs::write(&svg_path, vector_field_svg(&rows, settings))?;
    Ok(vec![csv_path, svg_path])
}

/// Objective of a flow run together with the input it is evaluated on.
pub struct FlowProblem {
    pub objective: Box<dyn DiffFunction<f64>>,
    pub input: Matrix<f64>,
    /// Latent rows used by the penalty and the metric.
    pub z: Matrix<f64>,
}

pub fn flow_problem(cfg: &ExperimentConfig) -> Result<FlowProblem> {
    let flow = cfg
        .flow
        .as_ref()
        .ok_or_else(|| Error::config("config has no [flow] section"))?;
    let spec = cfg.generator.clone();
    let seed = cfg.sweep_seeds()[0];
    let z = LatentSource::new(spec.default_latent(), spec.latent_dim, seed)
        .batch::<f64>(0, flow.batch)
        .z;
    let d = spec.param_len();
    let objective: Box<dyn DiffFunction<f64>> =
        match (flow.objective, &spec.architecture, &cfg.target) {
            (
                FlowObjective::ClosedForm,
                Architecture::LocationScale,
                &TargetSpec::Gaussian1d { mean, std },
            ) => Box::new(FnObjective::new(d, move |_, th, _| {
                (th.slice(0, 1, 1).shift(-mean).square() + th.slice(1, 1, 1).shift(-std).square())
                    .sum()
            })),
            (
                FlowObjective::ClosedForm,
                Architecture::DeltaMixture { alpha },
                &TargetSpec::DeltaMixture { a, b, .. },
            ) => {
                let alpha = *alpha;
                Box::new(FnObjective::new(d, move |_, th, _| {
                    (th.slice(0, 1, 1).shift(-a).abs().scale(alpha)
                        + th.slice(1, 1, 1).shift(-b).abs().scale(1.0 - alpha))
                    .sum()
                }))
            }
            (FlowObjective::SampleW1, _, target) => {
                let t: SampleBatch<f64> = target.batch(seed.wrapping_add(1), 0, flow.batch);
                let gen = spec.clone();
                Box::new(FnObjective::new(d, move |tape, th, input| {
                    sliced_w1_tape(tape, gen.build(tape, th, input), &t.x)
                }))
            }
            _ => return Err(Error::config("no closed form for this model and target")),
        };
    Ok(FlowProblem {
        objective,
        input: z.clone(),
        z,
    })
}

fn metric_at(
    spec: &GeneratorSpec,
    theta: &[f64],
    z: &Matrix<f64>,
    penalty: &ProximalPenalty,
) -> Result<MetricTensor<f64>> {
    match spec.architecture {
        Architecture::DeltaMixture { alpha } => {
            Ok(delta_mixture_metric(alpha, [theta[0], theta[1]]))
        }
        _ if spec.output_dim == 1 => metric_tensor_1d_on(spec, theta, z),
        _ => affine_pullback_metric(
            &AffineBasis::new(AffineDegree::DiagonalQuadratic, spec.output_dim),
            spec,
            theta,
            z,
            penalty.damping,
        ),
    }
}

/// Squared distance between consecutive iterates: closed form for the
/// delta mixture, sorted coupling in 1-D, the configured penalty otherwise.
pub fn iterate_distance(
    spec: &GeneratorSpec,
    penalty: &ProximalPenalty,
    z: &Matrix<f64>,
    a: &ParamVector<f64>,
    b: &ParamVector<f64>,
) -> Result<f64> {
    if let Architecture::DeltaMixture { alpha } = spec.architecture {
        let (da, db) = (a.values()[0] - b.values()[0], a.values()[1] - b.values()[1]);
        return Ok(alpha * da * da + (1.0 - alpha) * db * db);
    }
    let latent = crate::models::LatentBatch::fixed(z.clone(), 0);
    let x = replay(spec, a.values(), &latent)?;
    let y = replay(spec, b.values(), &latent)?;
    if spec.output_dim == 1 {
        return exact1d_penalty(&x, &y);
    }
    let w = match penalty.midpoint {
        MidpointRule::Average => replay(spec, a.midpoint(b).values(), &latent)?,
        MidpointRule::Previous => y.clone(),
    };
    penalty.evaluate(&x, &y, &w)
}

/// Integrates the configured flow and writes `<name>_flow.csv` and the
/// final snapshot.
pub fn run_flow(cfg: &ExperimentConfig) -> Result<(Trajectory<f64>, PathBuf)> {
    cfg.validate()?;
    let flow = cfg
        .flow
        .as_ref()
        .ok_or_else(|| Error::config("config has no [flow] section"))?;
    let spec = cfg.generator.clone();
    let problem = flow_problem(cfg)?;
    let theta0 = match &flow.theta0 {
        Some(t) => ParamVector::new(t.clone(), spec.layout())?,
        None => spec.init(cfg.sweep_seeds()[0]),
    };
    let fc = flow.config;
    let mut inner = InnerOptimizer::new(fc.inner, theta0.len());
    let f = problem.objective.as_ref();
    let z = &problem.z;
    let traj = flow_integrate(
        f,
        &problem.input,
        &theta0,
        flow.steps,
        |thk: &ParamVector<f64>| -> Result<StepOutcome<f64>> {
            inner.reset();
            match flow.scheme {
                FlowScheme::ForwardEuler => {
                    let g = metric_at(&spec, thk.values(), z, &fc.penalty)?;
                    let lambda = match fc.penalty.damping {
                        crate::wmetric::Damping::Fixed(l) => l,
                        crate::wmetric::Damping::Auto => 0.0,
                    };
                    let theta = forward_euler_step(f, &problem.input, thk, &g, fc.h, lambda)?;
                    Ok(StepOutcome {
                        theta,
                        trace: Vec::new(),
                    })
                }
                FlowScheme::SemiBackward => sbe_step(
                    f,
                    &problem.input,
                    &spec,
                    z,
                    thk,
                    &fc.penalty,
                    &fc,
                    &mut inner,
                ),
                FlowScheme::BackwardEuler => {
                    backward_euler_step(f, &problem.input, &spec, z, thk, &fc, &mut inner)
                }
            }
        },
        |a, b| iterate_distance(&spec, &fc.penalty, z, a, b),
    )?;
    ensure_dir(&cfg.output_dir)?;
    let csv_path = cfg.output_dir.join(format!("{}_flow.csv", cfg.name));
    traj.write_csv(std::fs::File::create(&csv_path)?)?;
    let gen = Generator::new(spec, traj.last().theta.clone())?;
    write_snapshot(
        &cfg.output_dir.join(format!("{}_flow.snapshot", cfg.name)),
        &gen,
    )?;
    Ok((traj, csv_path))
}

/// `D̃²` of `penalty` between two generators of the same spec, on `batch`
/// latent rows drawn with `seed`.
pub fn snapshot_metric(
    penalty: &ProximalPenalty,
    a: &Generator<f64>,
    b: &Generator<f64>,
    seed: u64,
    batch: usize,
) -> Result<f64> {
    if a.spec != b.spec {
        return Err(Error::usage(
            "snapshots come from different generator specs",
        ));
    }
    if batch == 0 {
        return Err(Error::usage("batch must be positive"));
    }
    penalty.validate(a.spec.output_dim)?;
    let latent =
        LatentSource::new(a.spec.default_latent(), a.spec.latent_dim, seed).batch(0, batch);
    let x = a.replay(&latent)?;
    let y = b.replay(&latent)?;
    let w = match penalty.midpoint {
        MidpointRule::Average => replay(&a.spec, a.theta.midpoint(&b.theta).values(), &latent)?,
        MidpointRule::Previous => y.clone(),
    };
    penalty.evaluate(&x, &y, &w)
}
