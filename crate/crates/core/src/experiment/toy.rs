//! Euclidean versus Wasserstein proximal updates on the two-point
//! mixture `α δ_a + (1 − α) δ_b` with loss `F = W₁(ρ_θ, ρ_θ*)`.

use std::io::Write;

use crate::error::{Error, Result};
use crate::models::DeltaMixtureModel;
use crate::wmetric::{delta_mixture_metric, delta_mixture_w1};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToySettings {
    pub alpha: f64,
    /// Minimizer `(a*, b*)`.
    pub target: (f64, f64),
    pub a_range: (f64, f64),
    pub b_range: (f64, f64),
    /// Grid points per axis.
    pub n: usize,
    pub h: f64,
}

impl ToySettings {
    pub fn new(alpha: f64) -> Self {
        Self {
            alpha,
            target: (-1.0, 1.0),
            a_range: (-2.0, -0.1),
            b_range: (0.1, 2.0),
            n: 21,
            h: 0.05,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::config(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.n < 2 || !(self.h > 0.0) {
            return Err(Error::config("grid needs n >= 2 and h > 0"));
        }
        if !(self.a_range.0 < self.a_range.1
            && self.b_range.0 < self.b_range.1
            && self.a_range.1 < self.b_range.0)
        {
            return Err(Error::config(
                "grid ranges must be increasing with every a below every b",
            ));
        }
        if !(self.target.0 < self.target.1) {
            return Err(Error::config("target needs a* < b*"));
        }
        Ok(())
    }
}

/// One grid point: the loss and both update displacements.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyRow {
    pub a: f64,
    pub b: f64,
    pub f: f64,
    pub euclid: [f64; 2],
    pub wass: [f64; 2],
}

/// Minimizer of `w |t − t*| + g (t − t₀)² / (2h)`: move by `h w / g`
/// towards `t*`, stopping at it.
fn prox_abs(t0: f64, target: f64, w: f64, g: f64, h: f64) -> f64 {
    let reach = h * w / g;
    let gap = target - t0;
    if gap.abs() <= reach {
        target
    } else {
        t0 + reach * gap.signum()
    }
}

/// Proximal updates `argmin F(θ) + ‖θ − θ⁰‖²_G / (2h)` for `G = I` and for
/// the Wasserstein metric `G = diag(α, 1 − α)`, over the grid.
pub fn toy_example1(s: &ToySettings) -> Result<Vec<ToyRow>> {
    s.validate()?;
    let target = DeltaMixtureModel::new(s.target.0, s.target.1, s.alpha)?;
    let weights = [s.alpha, 1.0 - s.alpha];
    let star = [s.target.0, s.target.1];
    let axis = |(lo, hi): (f64, f64), i: usize| lo + (hi - lo) * i as f64 / (s.n - 1) as f64;
    let mut rows = Vec::with_capacity(s.n * s.n);
    for i in 0..s.n {
        for j in 0..s.n {
            let (a, b) = (axis(s.a_range, i), axis(s.b_range, j));
            let model = DeltaMixtureModel::new(a, b, s.alpha)?;
            let f = delta_mixture_w1(&model, &target)?;
            let g = delta_mixture_metric(s.alpha, [a, b]).matrix;
            let theta = [a, b];
            let step = |metric: [f64; 2]| {
                [0, 1].map(|c| prox_abs(theta[c], star[c], weights[c], metric[c], s.h) - theta[c])
            };
            rows.push(ToyRow {
                a,
                b,
                f,
                euclid: step([1.0, 1.0]),
                wass: step([g[(0, 0)], g[(1, 1)]]),
            });
        }
    }
    Ok(rows)
}

/// Mean angle (radians) between each displacement and the direction to
/// the minimizer, over grid points away from it: `(euclidean, wasserstein)`.
pub fn mean_angles(rows: &[ToyRow], target: (f64, f64)) -> (f64, f64) {
    let angle = |d: [f64; 2], to: [f64; 2]| {
        let c = (d[0] * to[0] + d[1] * to[1]) / ((d[0].hypot(d[1])) * to[0].hypot(to[1]));
        c.clamp(-1.0, 1.0).acos()
    };
    let mut sums = (0.0, 0.0);
    let mut count = 0usize;
    for r in rows {
        let to = [target.0 - r.a, target.1 - r.b];
        if to[0].hypot(to[1]) < 1e-12 {
            continue;
        }
        sums.0 += angle(r.euclid, to);
        sums.1 += angle(r.wass, to);
        count += 1;
    }
    let c = count.max(1) as f64;
    (sums.0 / c, sums.1 / c)
}

pub fn write_toy_csv(rows: &[ToyRow], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "a",
        "b",
        "F",
        "euclid_dx",
        "euclid_dy",
        "wass_dx",
        "wass_dy",
    ])?;
    for r in rows {
        w.write_record(
            [
                r.a,
                r.b,
                r.f,
                r.euclid[0],
                r.euclid[1],
                r.wass[0],
                r.wass[1],
            ]
            .map(|v| v.to_string()),
        )?;
    }
    w.flush()?;
    Ok(())
}
