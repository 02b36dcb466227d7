//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line
//! with its measurement and runtime; the test fails if any criterion does.
//!
//! Run with `cargo test --release --test acceptance -- --nocapture`.

mod common;

use std::io::Write;
use std::time::{Duration, Instant};

use common::*;
use rand::Rng;
use wprox::adversarial::{fit_potential, PotentialKind, PotentialSpec};
use wprox::diff::{grad_scalar_raw, DiffFunction, FnObjective, Reparametrized, Tape};
use wprox::experiment::{mean_angles, toy_example1, train_once, ExperimentConfig, ToySettings};
use wprox::linalg::{pinv_sym, SymmetricEigen};
use wprox::models::*;
use wprox::optim::*;
use wprox::wmetric::*;
use wprox::{Matrix, ParamVector};

type Check = Result<String, String>;

fn report(n: usize, budget: Duration, f: impl FnOnce() -> Check) -> bool {
    let start = Instant::now();
    let result = f();
    let elapsed = start.elapsed();
    let (ok, detail) = match result {
        Ok(d) if elapsed <= budget => (true, d),
        Ok(d) => (
            false,
            format!("{d}; over the {:.3} s budget", budget.as_secs_f64()),
        ),
        Err(d) => (false, d),
    };
    let line = format!(
        "criterion {n:>2}: {} ({detail}; {:.3} s)\n",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    // Written to the raw handle so the line shows even when output is captured.
    let _ = std::io::stderr().write_all(line.as_bytes());
    ok
}

fn require(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn criterion1() -> Check {
    let m = |a, b| DeltaMixtureModel::new(a, b, 0.5).unwrap();
    let d = delta_mixture_distances(&m(-1.0, 1.0), &m(-2.0, 3.0)).map_err(|e| e.to_string())?;
    require(d.w2sq == 2.5, format!("W2^2 = {}", d.w2sq))?;
    require(d.euclidsq == 5.0, format!("Euclid^2 = {}", d.euclidsq))?;
    require(d.kl.is_infinite() && d.l2.is_infinite(), "KL or L2 finite")?;
    Ok("W2^2 = 2.5, Euclid^2 = 5, KL = L2 = inf".into())
}

fn criterion2() -> Check {
    let a = DeltaMixtureModel::new(-1.0, 1.0, 0.5)
        .unwrap()
        .pushforward();
    let b = DeltaMixtureModel::new(-2.0, 3.0, 0.5)
        .unwrap()
        .pushforward();
    let w2 = exact_wp_discrete(&a, &b, 2).map_err(|e| e.to_string())?;
    let err = (w2 - 2.5f64.sqrt()).abs();
    require(err < 1e-10, format!("W2 error {err:e}"))?;
    for alpha in [0.1, 0.5, 0.9] {
        let g = delta_mixture_metric(alpha, [-1.0, 1.0]).matrix;
        require(
            g == Matrix::diag(&[alpha, 1.0 - alpha]),
            format!("metric at alpha {alpha}: {g:?}"),
        )?;
    }
    Ok(format!("W2 error {err:.1e}, metric exact"))
}

fn criterion3() -> Check {
    let mut r = rng(30);
    let mut worst: f64 = 0.0;
    for case in 0..1000 {
        let n = 1 + case % 3;
        let x = normal_matrix(&mut r, 8 + case % 25, n);
        let y = normal_matrix(&mut r, x.rows(), n).map(|v| 0.7 * v + 0.4);
        let b = paired(&[&x, &y]);
        let basis = AffineBasis::new(AffineDegree::Linear, n);
        let affine = affine_metric(&basis, &b[0], &b[1], &b[1], Damping::Fixed(0.0))
            .map_err(|e| e.to_string())?;
        let o1 = o1sbe_penalty(&b[0], &b[1]).map_err(|e| e.to_string())?;
        let rwp = rwp_penalty(&b[0], &b[1]).map_err(|e| e.to_string())?;
        let gap = (affine - o1).abs() / o1.max(1.0);
        worst = worst.max(gap);
        require(
            gap <= 1e-12,
            format!("case {case}: affine {affine} vs o1 {o1}"),
        )?;
        require(o1 <= rwp, format!("case {case}: o1 {o1} > rwp {rwp}"))?;
    }
    Ok(format!(
        "1000 batches, max gap {worst:.1e}, O1 <= RWP throughout"
    ))
}

fn criterion4() -> Check {
    let mut r = rng(40);
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let n = 1 + case % 3;
        let x = normal_matrix(&mut r, 16 + case % 48, n);
        let y = normal_matrix(&mut r, x.rows(), n).map(|v| 1.3 * v - 0.2);
        let b = paired(&[&x, &y]);
        let value = o2diag_penalty(&b[0], &b[1]).map_err(|e| e.to_string())?;
        let oracle = qp_oracle_o2diag(&x, &y, &y);
        let err = rel_err(value, oracle);
        worst = worst.max(err);
        require(
            err < 1e-8,
            format!("case {case}: {value} vs oracle {oracle}"),
        )?;
    }
    // Gaussian pairs: the penalty at the midpoint against W2^2, with the
    // standard error estimated from 20 disjoint sub-batches.
    let spec = GeneratorSpec::location_scale(1);
    let penalty = ProximalPenalty::new(PenaltyKind::O2DiagSbe).with_midpoint(MidpointRule::Average);
    let value = |theta: &[f64], theta_k: &[f64], z: &Matrix<f64>| {
        let tape = Tape::new();
        let th = tape.constant(Matrix::column(theta.to_vec()));
        penalty.build(&tape, &spec, th, theta_k, z).item()
    };
    let mut zscores = Vec::new();
    for (i, (theta, theta_k)) in [
        ([0.0, 1.0], [1.0, 2.0]),
        ([0.5, 0.3], [-0.2, 0.8]),
        ([2.0, 1.5], [1.0, 1.4]),
    ]
    .into_iter()
    .enumerate()
    {
        let z = LatentSource::normal(1, 400 + i as u64)
            .batch::<f64>(0, 100_000)
            .z;
        let full = value(&theta, &theta_k, &z);
        let parts: Vec<f64> = (0..20)
            .map(|k| {
                value(
                    &theta,
                    &theta_k,
                    &Matrix::from_fn(5000, 1, |r, _| z[(5000 * k + r, 0)]),
                )
            })
            .collect();
        let mean = parts.iter().sum::<f64>() / 20.0;
        let sd = (parts.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / 19.0).sqrt();
        let se = sd / 20f64.sqrt();
        let w2 = (theta[0] - theta_k[0]).powi(2) + (theta[1] - theta_k[1]).powi(2);
        let zscore = (full - w2).abs() / se;
        require(
            zscore <= 5.0,
            format!("Gaussian pair {i}: {full} vs W2^2 {w2}, {zscore:.2} SE"),
        )?;
        zscores.push(zscore);
    }
    Ok(format!(
        "max rel err vs oracle {worst:.1e}; Gaussian pairs within {:.2} SE",
        zscores.iter().cloned().fold(0.0, f64::max)
    ))
}

fn small_mlp(n: usize) -> GeneratorSpec {
    GeneratorSpec {
        architecture: Architecture::Mlp {
            hidden: vec![5],
            activation: Activation::Tanh,
            output_activation: Activation::Linear,
        },
        latent_dim: 2,
        output_dim: n,
    }
}

fn criterion5() -> Check {
    let mut r = rng(50);
    let penalties = [
        ProximalPenalty::new(PenaltyKind::Rwp),
        ProximalPenalty::new(PenaltyKind::O1Sbe),
        ProximalPenalty::new(PenaltyKind::O2DiagSbe),
        ProximalPenalty::new(PenaltyKind::O2DiagSbe).with_midpoint(MidpointRule::Average),
        ProximalPenalty::new(PenaltyKind::Affine(AffineDegree::Linear)),
        ProximalPenalty::new(PenaltyKind::Affine(AffineDegree::DiagonalQuadratic))
            .with_midpoint(MidpointRule::Average),
        ProximalPenalty::new(PenaltyKind::Affine(AffineDegree::FullQuadratic)),
        ProximalPenalty::new(PenaltyKind::Exact1D),
    ];
    let mut worst: f64 = 0.0;
    let mut checks = 0;
    for draw in 0..100 {
        let spec = match draw % 4 {
            0 => GeneratorSpec::location_scale(1),
            1 => GeneratorSpec::location_scale(2),
            2 => small_mlp(1),
            _ => small_mlp(2),
        };
        let d = spec.param_len();
        let theta_k: Vec<f64> = (0..d).map(|_| r.random_range(-1.0..1.0)).collect();
        let theta: Vec<f64> = theta_k
            .iter()
            .map(|v| v + r.random_range(-0.3..0.3))
            .collect();
        let z = normal_matrix(&mut r, 6 + draw % 10, spec.latent_dim);
        for p in &penalties {
            if p.validate(spec.output_dim).is_err() {
                continue;
            }
            let value = |t: &[f64]| {
                let tape = Tape::new();
                let th = tape.constant(Matrix::column(t.to_vec()));
                p.build(&tape, &spec, th, &theta_k, &z).item()
            };
            let tape = Tape::new();
            let th = tape.leaf(Matrix::column(theta.clone()));
            let out = p.build(&tape, &spec, th, &theta_k, &z);
            tape.check().map_err(|e| e.to_string())?;
            let grad = tape.backward(out, Matrix::scalar(1.0)).wrt(th).into_vec();
            let fd = fd_grad(value, &theta, 1e-6);
            let num: f64 = grad
                .iter()
                .zip(&fd)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            let den: f64 = fd.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-8);
            let err = num / den;
            worst = worst.max(err);
            checks += 1;
            require(
                err < 1e-5,
                format!("draw {draw}, {:?}: rel err {err:e}", p.kind),
            )?;
        }
    }
    Ok(format!(
        "{checks} gradient checks over 100 draws, max rel err {worst:.1e}"
    ))
}

fn quadratic(t: [f64; 2]) -> impl DiffFunction<f64> {
    FnObjective::new(2, move |_, th, _| {
        (th.slice(0, 1, 1).shift(-t[0]).square() + th.slice(1, 1, 1).shift(-t[1]).square()).sum()
    })
}

fn quartic() -> impl DiffFunction<f64> {
    FnObjective::new(2, |_, th, _| {
        let m = th.slice(0, 1, 1).shift(-1.0);
        (m.square() + m.square().square().scale(0.1) + th.slice(1, 1, 1).shift(-2.0).square()).sum()
    })
}

/// Objective, starting point and step size.
type Case = (Box<dyn DiffFunction<f64>>, [f64; 2], f64);

fn no_input() -> Matrix<f64> {
    Matrix::zeros(1, 1)
}

/// Location-scale model on latents `{−1, +1}`: the pulled-back metric is
/// the identity, as for 1-D Gaussians.
fn symmetric_latent() -> Matrix<f64> {
    Matrix::column(vec![-1.0, 1.0])
}

fn exact_step(
    f: &dyn DiffFunction<f64>,
    theta: &ParamVector<f64>,
    h: f64,
    lr: f64,
) -> wprox::Result<StepOutcome<f64>> {
    let cfg = FlowConfig::new(
        h,
        1,
        ProximalPenalty::new(PenaltyKind::Exact1D),
        OptimizerConfig::plain(lr),
    )
    .converging(1e-13, 50_000);
    let mut inner = InnerOptimizer::new(cfg.inner, theta.len());
    sbe_step(
        f,
        &no_input(),
        &GeneratorSpec::location_scale(1),
        &symmetric_latent(),
        theta,
        &cfg.penalty,
        &cfg,
        &mut inner,
    )
}

fn criterion6() -> Check {
    let star = [1.0, 2.0];
    let theta0 = [0.0, 1.0];
    let f = quadratic(star);
    let rhs = |t: &[f64]| vec![-2.0 * (t[0] - star[0]), -2.0 * (t[1] - star[1])];
    let mut errors = Vec::new();
    for h in [1e-2, 5e-3, 2.5e-3] {
        let step = exact_step(
            &f,
            &ParamVector::flat(theta0.to_vec()),
            h,
            1.0 / (2.0 + 1.0 / h),
        )
        .map_err(|e| e.to_string())?;
        let exact = rk4(rhs, &theta0, h, 100);
        errors.push(max_diff(step.theta.values(), &exact));
    }
    let ratios: Vec<f64> = errors.windows(2).map(|w| w[0] / w[1]).collect();
    require(
        ratios.iter().all(|r| (3.5..=4.5).contains(r)),
        format!("ratios {ratios:?}"),
    )?;
    let errors: Vec<String> = errors.iter().map(|e| format!("{e:.2e}")).collect();
    Ok(format!(
        "errors [{}], ratios {ratios:.3?}",
        errors.join(", ")
    ))
}

fn criterion7() -> Check {
    let cases: Vec<Case> = vec![
        (Box::new(quadratic([1.0, 2.0])), [-2.0, 0.5], 0.3),
        (Box::new(quartic()), [3.0, -1.0], 0.1),
        (Box::new(quartic()), [-1.0, 4.0], 1.0),
    ];
    let mut worst_rise = f64::NEG_INFINITY;
    for (i, (f, start, h)) in cases.iter().enumerate() {
        let traj = flow_integrate(
            &**f,
            &no_input(),
            &ParamVector::flat(start.to_vec()),
            200,
            |th| exact_step(&**f, th, *h, 0.02),
            |a, b| Ok(a.distance(b).powi(2)),
        )
        .map_err(|e| e.to_string())?;
        let rise = traj
            .points
            .windows(2)
            .map(|w| w[1].loss - w[0].loss)
            .fold(f64::NEG_INFINITY, f64::max);
        worst_rise = worst_rise.max(rise);
        require(
            traj.lyapunov_violations(1e-10) == 0,
            format!("case {i}: F rose by {rise:e}"),
        )?;
    }
    let f = quartic();
    let star = [1.0, 2.0];
    let (_, g) = grad_scalar_raw(&f, &star, &no_input()).map_err(|e| e.to_string())?;
    require(g.iter().all(|v| v.abs() < 1e-14), "not a critical point")?;
    let hess = Matrix::from_fn(2, 2, |i, j| {
        let gi = |t: &[f64]| grad_scalar_raw(&f, t, &no_input()).unwrap().1[i];
        fd_grad(gi, &star, 1e-5)[j]
    });
    let metric = metric_tensor_1d_on(
        &GeneratorSpec::location_scale(1),
        &star,
        &symmetric_latent(),
    )
    .map_err(|e| e.to_string())?;
    let lam = SymmetricEigen::new(&pinv_sym(&metric.matrix, 1e-12).matmul(&hess).symmetrized())
        .min_eigenvalue();
    require(lam > 0.0, format!("lambda_min {lam}"))?;
    let mut th = ParamVector::flat(vec![1.3, 1.6]);
    let mut dist = max_diff(th.values(), &star);
    for k in 0..30 {
        th = exact_step(&f, &th, 0.2, 0.1)
            .map_err(|e| e.to_string())?
            .theta;
        let d = max_diff(th.values(), &star);
        require(d < dist, format!("step {k}: distance {d} after {dist}"))?;
        dist = d;
    }
    Ok(format!(
        "max loss change {worst_rise:.1e}; lambda_min {lam:.3}; distance to minimizer {dist:.1e} after 30 steps"
    ))
}

fn criterion8() -> Check {
    let spec = GeneratorSpec::location_scale(1);
    let z = normal_matrix(&mut rng(80), 1000, 1);
    let f = quartic();
    let a = Matrix::from_rows(&[vec![2.0, 0.5], vec![-0.3, 1.5]]);
    let det = a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)];
    let a_inv = Matrix::from_rows(&[
        vec![a[(1, 1)] / det, -a[(0, 1)] / det],
        vec![-a[(1, 0)] / det, a[(0, 0)] / det],
    ]);
    let gen_p = Reparametrized {
        inner: spec.clone(),
        a_inv: a_inv.clone(),
    };
    let f_p = Reparametrized {
        inner: &f,
        a_inv: a_inv.clone(),
    };
    let grid = Matrix::column((0..41).map(|i| -4.0 + 0.2 * i as f64).collect());
    let gap = |t: &[f64], tp: &[f64]| {
        let back = a_inv.matmul(&Matrix::column(tp.to_vec())).into_vec();
        let x = wprox::diff::evaluate(&spec, t, &grid).unwrap();
        let y = wprox::diff::evaluate(&spec, &back, &grid).unwrap();
        max_diff(x.as_slice(), y.as_slice())
    };
    let h = 0.05;
    let mut th = ParamVector::flat(vec![0.0, 1.0]);
    let mut thp = ParamVector::flat(a.matmul(&th.as_column()).into_vec());
    let (mut plain, mut plain_p) = (th.clone(), thp.clone());
    let mut natural_gap: f64 = 0.0;
    for _ in 0..50 {
        let g = metric_tensor_1d_on(&spec, th.values(), &z).map_err(|e| e.to_string())?;
        let gp = metric_tensor_1d_on(&gen_p, thp.values(), &z).map_err(|e| e.to_string())?;
        th = forward_euler_step(&f, &no_input(), &th, &g, h, 0.0).map_err(|e| e.to_string())?;
        thp =
            forward_euler_step(&f_p, &no_input(), &thp, &gp, h, 0.0).map_err(|e| e.to_string())?;
        natural_gap = natural_gap.max(gap(th.values(), thp.values()));
        let eye = MetricTensor {
            matrix: Matrix::identity(2),
            ..g
        };
        plain =
            forward_euler_step(&f, &no_input(), &plain, &eye, h, 0.0).map_err(|e| e.to_string())?;
        plain_p = forward_euler_step(&f_p, &no_input(), &plain_p, &eye, h, 0.0)
            .map_err(|e| e.to_string())?;
    }
    let plain_gap = gap(plain.values(), plain_p.values());
    require(
        natural_gap < 1e-6,
        format!("natural map gap {natural_gap:e}"),
    )?;
    require(
        plain_gap > 1e-3,
        format!("plain map gap only {plain_gap:e}"),
    )?;
    Ok(format!(
        "natural map gap {natural_gap:.1e}, plain map gap {plain_gap:.3}"
    ))
}

fn criterion9() -> Check {
    let settings = ToySettings::new(0.2);
    let rows = toy_example1(&settings).map_err(|e| e.to_string())?;
    require(rows.len() == 441, format!("{} grid points", rows.len()))?;
    let (euclid, wass) = mean_angles(&rows, settings.target);
    // Independent recomputation: F = α|a − a*| + (1 − α)|b − b*| is
    // separable; with G = diag(α, 1 − α) each coordinate moves by h towards
    // its target, with G = I by h times its weight.
    let alpha = settings.alpha;
    let star = [settings.target.0, settings.target.1];
    let towards = |t: f64, s: f64, reach: f64| {
        if (s - t).abs() <= reach {
            s - t
        } else {
            reach * (s - t).signum()
        }
    };
    let angle = |d: [f64; 2], to: [f64; 2]| {
        ((d[0] * to[0] + d[1] * to[1]) / (d[0].hypot(d[1]) * to[0].hypot(to[1])))
            .clamp(-1.0, 1.0)
            .acos()
    };
    let (mut se, mut sw, mut count) = (0.0, 0.0, 0);
    for r in &rows {
        let f = alpha * (r.a - star[0]).abs() + (1.0 - alpha) * (r.b - star[1]).abs();
        let w1 = delta_mixture_w1(
            &DeltaMixtureModel::new(r.a, r.b, alpha).unwrap(),
            &DeltaMixtureModel::new(star[0], star[1], alpha).unwrap(),
        )
        .unwrap();
        require(
            (f - w1).abs() < 1e-12 && (r.f - w1).abs() < 1e-12,
            format!("loss at ({}, {})", r.a, r.b),
        )?;
        let to = [star[0] - r.a, star[1] - r.b];
        if to[0].hypot(to[1]) < 1e-12 {
            continue;
        }
        let e = [
            towards(r.a, star[0], settings.h * alpha),
            towards(r.b, star[1], settings.h * (1.0 - alpha)),
        ];
        let w = [
            towards(r.a, star[0], settings.h),
            towards(r.b, star[1], settings.h),
        ];
        require(
            max_diff(&e, &r.euclid) < 1e-12 && max_diff(&w, &r.wass) < 1e-12,
            "update mismatch",
        )?;
        se += angle(e, to);
        sw += angle(w, to);
        count += 1;
    }
    let (se, sw) = (se / count as f64, sw / count as f64);
    // acos amplifies last-bit differences for nearly parallel vectors.
    require(
        (se - euclid).abs() < 1e-8 && (sw - wass).abs() < 1e-8,
        format!("angle mismatch: euclidean {se} vs {euclid}, wasserstein {sw} vs {wass}"),
    )?;
    let reduction = 1.0 - wass / euclid;
    require(
        reduction >= 0.10,
        format!("reduction {:.1}%", 100.0 * reduction),
    )?;
    Ok(format!(
        "mean angle euclidean {:.2} deg, wasserstein {:.2} deg, reduction {:.1}%",
        euclid.to_degrees(),
        wass.to_degrees(),
        100.0 * reduction
    ))
}

fn ring_config() -> ExperimentConfig {
    ExperimentConfig::load(
        &std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/ring.toml"),
    )
    .unwrap()
}

/// Each run's latest evaluation at or before `t`.
fn value_at(series: &[(f64, f64)], t: f64) -> f64 {
    series
        .iter()
        .take_while(|p| p.0 <= t)
        .last()
        .unwrap_or(&series[0])
        .1
}

fn sample_variance(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
}

fn criterion10() -> Check {
    let base = ring_config();
    let seeds: Vec<u64> = (0..5).collect();
    let mut reach = Vec::new();
    for kind in [PenaltyKind::Rwp, PenaltyKind::O1Sbe, PenaltyKind::O2DiagSbe] {
        let mut cfg = base.clone();
        let train = cfg.train.as_mut().unwrap();
        train.outer_iters = 5000;
        train.stop_below = Some(0.05);
        let mut hits = Vec::new();
        for &seed in &seeds {
            let (_, log) = train_once(&cfg, kind, seed).map_err(|e| e.to_string())?;
            if log.last_eval().is_some_and(|v| v < 0.05) {
                hits.push(log.rows.last().unwrap().outer_iter);
            }
        }
        reach.push((kind, hits));
    }
    let mut curves = Vec::new();
    for kind in [PenaltyKind::None, PenaltyKind::Rwp] {
        let runs: Vec<Vec<(f64, f64)>> = seeds
            .iter()
            .map(|&seed| {
                train_once(&base, kind, seed).map(|(_, log)| {
                    log.rows
                        .iter()
                        .filter_map(|r| r.eval_metric.map(|v| (r.wallclock_s, v)))
                        .collect()
                })
            })
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        curves.push(runs);
    }
    let horizon = curves
        .iter()
        .flatten()
        .map(|run| run.last().unwrap().0)
        .fold(f64::INFINITY, f64::min);
    let variance = |runs: &[Vec<(f64, f64)>]| {
        (5..=10)
            .map(|j| {
                sample_variance(
                    &runs
                        .iter()
                        .map(|r| value_at(r, horizon * j as f64 / 10.0))
                        .collect::<Vec<_>>(),
                )
            })
            .sum::<f64>()
            / 6.0
    };
    let (var_none, var_rwp) = (variance(&curves[0]), variance(&curves[1]));
    let summary = reach
        .iter()
        .map(|(k, hits)| format!("{} {}/5 {hits:?}", k.name(), hits.len()))
        .collect::<Vec<_>>()
        .join(", ");
    let detail = format!(
        "reached FGD < 0.05: {summary}; FGD variance none {var_none:.4} vs rwp {var_rwp:.4}"
    );
    require(
        reach.iter().all(|(_, hits)| hits.len() >= 4),
        detail.clone(),
    )?;
    require(var_none > var_rwp, detail.clone())?;
    Ok(detail)
}

fn criterion11() -> Check {
    let mut worst: f64 = 0.0;
    let mut r = rng(110);
    for case in 0..6 {
        let spec = if case % 2 == 0 {
            GeneratorSpec::location_scale(2)
        } else {
            small_mlp(2)
        };
        let d = spec.param_len();
        let theta_k: Vec<f64> = (0..d).map(|_| r.random_range(-1.0..1.0)).collect();
        let theta: Vec<f64> = theta_k
            .iter()
            .map(|v| v + r.random_range(-0.3..0.3))
            .collect();
        let src = LatentSource::normal(spec.latent_dim, 1100 + case);
        let latent = src.batch::<f64>(0, 256);
        let x = replay(&spec, &theta, &latent).map_err(|e| e.to_string())?;
        let y = replay(&spec, &theta_k, &latent).map_err(|e| e.to_string())?;
        for (kind, target) in [
            (PotentialKind::Linear, o1sbe_penalty(&x, &y)),
            (PotentialKind::DiagQuadratic, o2diag_penalty(&x, &y)),
        ] {
            let target = target.map_err(|e| e.to_string())?;
            let pot = PotentialSpec { input_dim: 2, kind };
            // Step size below the inverse curvature of the concave objective.
            let second = (0..2)
                .map(|j| y.x.column_vec(j).iter().map(|v| v * v).sum::<f64>() / 256.0)
                .fold(0.0, f64::max);
            let mut opt = InnerOptimizer::new(
                OptimizerConfig::plain(1.0 / (1.0 + second)),
                pot.layout().total(),
            );
            let (_, learned) = fit_potential(&pot, &pot.init(0), &x.x, &y.x, 50_000, &mut opt)
                .map_err(|e| e.to_string())?;
            let err = rel_err(learned, target);
            worst = worst.max(err);
            require(
                err < 1e-3,
                format!("case {case}, {kind:?}: learned {learned} vs {target}"),
            )?;
        }
    }
    Ok(format!("12 fits, max rel err {worst:.1e}"))
}

#[test]
fn acceptance() {
    let secs = Duration::from_secs_f64;
    let results = [
        report(1, secs(1e-3), criterion1),
        report(2, secs(1e-2), criterion2),
        report(3, secs(5.0), criterion3),
        report(4, secs(30.0), criterion4),
        report(5, secs(30.0), criterion5),
        report(6, secs(10.0), criterion6),
        report(7, secs(30.0), criterion7),
        report(8, secs(10.0), criterion8),
        report(9, secs(60.0), criterion9),
        report(10, secs(900.0), criterion10),
        report(11, secs(60.0), criterion11),
    ];
    let failed: Vec<usize> = results
        .iter()
        .enumerate()
        .filter(|(_, ok)| !**ok)
        .map(|(i, _)| i + 1)
        .collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
