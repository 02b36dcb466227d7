use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use wprox::experiment::{
    read_snapshot, run_experiment, run_flow, snapshot_metric, toy_example1, vector_field_svg,
    write_toy_csv, EvalSet, ExperimentConfig, ToySettings,
};
use wprox::wmetric::{Damping, MidpointRule, PenaltyKind, ProximalPenalty};
use wprox::Error;

#[derive(Parser)]
#[command(
    name = "wprox",
    version,
    about = "Wasserstein natural proximal training and diagnostics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Midpoint {
    Previous,
    Average,
}

#[derive(Subcommand)]
enum Command {
    /// Train generators for every (penalty, seed) pair of a config.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated penalties, e.g. `rwp,o1sbe,o2diag,none`.
        #[arg(long, value_delimiter = ',')]
        penalty: Vec<String>,
        /// Run seeds 0..N.
        #[arg(long)]
        seeds: Option<u64>,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        outer_iters: Option<usize>,
        /// Write the envelope and vector-field plots.
        #[arg(long)]
        plot: bool,
    },
    /// Penalty value between two generator snapshots.
    Metric {
        #[arg(long)]
        kind: String,
        /// Exactly two snapshots: θ, then θ^k.
        #[arg(long, num_args = 1)]
        snapshot: Vec<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        batch: usize,
        #[arg(long, value_enum, default_value = "previous")]
        midpoint: Midpoint,
        /// Fixed damping for the affine penalties (default: automatic).
        #[arg(long)]
        damping: Option<f64>,
    },
    /// Integrate a parameter-space flow from a config's [flow] section.
    Flow {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Euclidean vs Wasserstein proximal updates over a grid of two-point
    /// mixtures.
    #[command(name = "toy-example1")]
    ToyExample1 {
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long, default_value_t = 0.05)]
        h: f64,
        #[arg(long, default_value_t = 21)]
        grid: usize,
        /// CSV destination (standard output when absent).
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Evaluation metric of a snapshot against a config's target.
    Eval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        snapshot: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn exit_code(e: &Error) -> u8 {
    if e.is_numeric() {
        3
    } else {
        2
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Train {
            config,
            penalty,
            seeds,
            output,
            outer_iters,
            plot,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if !penalty.is_empty() {
                cfg.penalties = penalty
                    .iter()
                    .map(|p| PenaltyKind::parse(p))
                    .collect::<Result<_, _>>()?;
            }
            if let Some(n) = seeds {
                if n == 0 {
                    return Err(Error::usage("--seeds must be at least 1"));
                }
                cfg.seeds = (0..n).collect();
            }
            if let Some(dir) = output {
                cfg.output_dir = dir;
            }
            if let (Some(n), Some(train)) = (outer_iters, cfg.train.as_mut()) {
                train.outer_iters = n;
            }
            cfg.plot |= plot;
            let report = run_experiment(&cfg)?;
            for r in &report.runs {
                let metric = r
                    .final_metric
                    .map(|v| format!("{v:.6}"))
                    .unwrap_or_else(|| "-".into());
                println!(
                    "{} seed {}: {metric} -> {}",
                    r.penalty.name(),
                    r.seed,
                    r.log_path.display()
                );
            }
            for p in &report.plots {
                println!("plot {}", p.display());
            }
        }
        Command::Metric {
            kind,
            snapshot,
            seed,
            batch,
            midpoint,
            damping,
        } => {
            let [a, b] = &snapshot[..] else {
                return Err(Error::usage(
                    "metric needs exactly two --snapshot arguments",
                ));
            };
            let penalty = ProximalPenalty::new(PenaltyKind::parse(&kind)?)
                .with_midpoint(match midpoint {
                    Midpoint::Previous => MidpointRule::Previous,
                    Midpoint::Average => MidpointRule::Average,
                })
                .with_damping(damping.map_or(Damping::Auto, Damping::Fixed));
            let value = snapshot_metric(
                &penalty,
                &read_snapshot(a)?,
                &read_snapshot(b)?,
                seed,
                batch,
            )?;
            println!("{value}");
        }
        Command::Flow { config, output } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(dir) = output {
                cfg.output_dir = dir;
            }
            let (traj, path) = run_flow(&cfg)?;
            println!("final F {} -> {}", traj.last().loss, path.display());
        }
        Command::ToyExample1 {
            alpha,
            h,
            grid,
            output,
            svg,
        } => {
            let settings = ToySettings {
                h,
                n: grid,
                ..ToySettings::new(alpha)
            };
            let rows = toy_example1(&settings)?;
            match output {
                Some(path) => write_toy_csv(&rows, std::fs::File::create(path)?)?,
                None => write_toy_csv(&rows, std::io::stdout().lock())?,
            }
            if let Some(path) = svg {
                std::fs::write(path, vector_field_svg(&rows, &settings))?;
            }
        }
        Command::Eval {
            config,
            snapshot,
            seed,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let train = cfg
                .train
                .as_ref()
                .ok_or_else(|| Error::config("config has no [train] section"))?;
            let gen = read_snapshot(&snapshot)?;
            if gen.spec != cfg.generator {
                return Err(Error::usage("snapshot generator differs from the config"));
            }
            let set = EvalSet::<f64>::new(&gen.spec, &cfg.target, train.eval, seed);
            println!(
                "{} {}",
                train.eval.label(),
                set.evaluate(&gen.spec, gen.theta.values())?
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
