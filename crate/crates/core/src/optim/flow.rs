use std::io::Write;
use std::time::Instant;

use crate::diff::{evaluate, DiffFunction};
use crate::error::Result;
use crate::matrix::Matrix;
use crate::optim::step::{InnerRecord, StepOutcome};
use crate::params::ParamVector;
use crate::scalar::Scalar;

/// One point of a discrete flow.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowPoint<T> {
    pub theta: ParamVector<T>,
    pub loss: T,
    /// Penalty `D̃²` against the previous point at the end of the step
    /// (zero for the initial point).
    pub penalty: T,
    pub step_norm: T,
    pub wallclock_s: f64,
    pub inner: Vec<InnerRecord<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub points: Vec<FlowPoint<T>>,
}

impl<T: Scalar> Trajectory<T> {
    pub fn last(&self) -> &FlowPoint<T> {
        self.points
            .last()
            .expect("trajectory holds the initial point")
    }

    pub fn losses(&self) -> Vec<T> {
        self.points.iter().map(|p| p.loss).collect()
    }

    /// Number of steps where the loss rose by more than `tol`.
    pub fn lyapunov_violations(&self, tol: T) -> usize {
        self.points
            .windows(2)
            .filter(|w| w[1].loss > w[0].loss + tol)
            .count()
    }

    /// CSV with columns
    /// `outer_iter,inner_iter,F,penalty,step_norm,wallclock_s`: one row for
    /// the initial point, then one per inner iteration (steps without an
    /// inner loop write a single row).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "outer_iter",
            "inner_iter",
            "F",
            "penalty",
            "step_norm",
            "wallclock_s",
        ])?;
        for (k, p) in self.points.iter().enumerate() {
            if p.inner.is_empty() || k == 0 {
                w.write_record([
                    k.to_string(),
                    "0".into(),
                    p.loss.to_f64_lossy().to_string(),
                    p.penalty.to_f64_lossy().to_string(),
                    p.step_norm.to_f64_lossy().to_string(),
                    format!("{:.3}", p.wallclock_s),
                ])?;
                continue;
            }
            for (i, r) in p.inner.iter().enumerate() {
                w.write_record([
                    k.to_string(),
                    i.to_string(),
                    r.loss.to_f64_lossy().to_string(),
                    r.penalty.to_f64_lossy().to_string(),
                    r.step_norm.to_f64_lossy().to_string(),
                    format!("{:.3}", p.wallclock_s),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Iterates `step` from `theta0` for `steps` steps, recording `F` after
/// each. `dist` measures `D̃²` between consecutive iterates.
pub fn flow_integrate<T, F, S, D>(
    f: &F,
    f_input: &Matrix<T>,
    theta0: &ParamVector<T>,
    steps: usize,
    mut step: S,
    dist: D,
) -> Result<Trajectory<T>>
where
    T: Scalar,
    F: DiffFunction<T> + ?Sized,
    S: FnMut(&ParamVector<T>) -> Result<StepOutcome<T>>,
    D: Fn(&ParamVector<T>, &ParamVector<T>) -> Result<T>,
{
    let clock = Instant::now();
    let loss0 = evaluate(f, theta0.values(), f_input)?.item();
    let mut points = vec![FlowPoint {
        theta: theta0.clone(),
        loss: loss0,
        penalty: T::zero(),
        step_norm: T::zero(),
        wallclock_s: 0.0,
        inner: Vec::new(),
    }];
    for _ in 0..steps {
        let prev = &points.last().expect("nonempty").theta;
        let outcome = step(prev)?;
        let loss = evaluate(f, outcome.theta.values(), f_input)?.item();
        let penalty = dist(&outcome.theta, prev)?;
        let step_norm = outcome.theta.distance(prev);
        points.push(FlowPoint {
            theta: outcome.theta,
            loss,
            penalty,
            step_norm,
            wallclock_s: clock.elapsed().as_secs_f64(),
            inner: outcome.trace,
        });
    }
    Ok(Trajectory { points })
}
