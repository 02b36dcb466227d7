//! Independent reference computations shared by the integration tests.
#![allow(dead_code, clippy::needless_range_loop)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use wprox::Matrix;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix<f64> {
    Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// Dense Gaussian elimination with partial pivoting.
pub fn solve_dense(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(r, &v)| {
            let mut r = r.clone();
            r.push(v);
            r
        })
        .collect();
    for c in 0..n {
        let p = (c..n)
            .max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs()))
            .unwrap();
        m.swap(c, p);
        for r in c + 1..n {
            let f = m[r][c] / m[c][c];
            for k in c..=n {
                m[r][k] -= f * m[c][k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| m[r][k] * x[k]).sum();
        x[r] = (m[r][n] - s) / m[r][r];
    }
    x
}

/// `2 · sup_{a, q}` of the diagonal-quadratic dual objective
/// `E[φ(x) − φ(y)] − ½ E‖∇φ(w)‖²` with `φ(u) = aᵀu + ½ Σ q_i u_i²`,
/// found by solving the stationarity system as one dense linear system
/// over all `2n` unknowns.
pub fn qp_oracle_o2diag(x: &Matrix<f64>, y: &Matrix<f64>, w: &Matrix<f64>) -> f64 {
    let (b, n) = (x.rows() as f64, x.cols());
    // Unknowns v = (a_0..a_{n-1}, q_0..q_{n-1}); ∇φ(w)_i = a_i + q_i w_i.
    // Objective: cᵀv − ½ vᵀ H v with H = E[gradᵀ grad] over features.
    let mut c = vec![0.0; 2 * n];
    let mut h = vec![vec![0.0; 2 * n]; 2 * n];
    for r in 0..x.rows() {
        for i in 0..n {
            c[i] += (x[(r, i)] - y[(r, i)]) / b;
            c[n + i] += 0.5 * (x[(r, i)].powi(2) - y[(r, i)].powi(2)) / b;
            let feats = [(i, 1.0), (n + i, w[(r, i)])];
            for &(p, fp) in &feats {
                for &(q, fq) in &feats {
                    h[p][q] += fp * fq / b;
                }
            }
        }
    }
    let v = solve_dense(&h, &c);
    let sup: f64 = c.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>() * 0.5;
    2.0 * sup
}

/// Minimum of `(1/n) Σ |x_i − y_σ(i)|^p` over all permutations σ.
pub fn brute_force_assignment(x: &Matrix<f64>, y: &Matrix<f64>, p: i32) -> f64 {
    let n = x.rows();
    let cost = |i: usize, j: usize| -> f64 {
        let d: f64 = (0..x.cols())
            .map(|k| (x[(i, k)] - y[(j, k)]).powi(2))
            .sum::<f64>()
            .sqrt();
        d.powi(p)
    };
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = f64::INFINITY;
    permute(&mut perm, 0, &mut |s| {
        let c: f64 = s.iter().enumerate().map(|(i, &j)| cost(i, j)).sum();
        best = best.min(c);
    });
    best / n as f64
}

fn permute(v: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
    if k == v.len() {
        f(v);
        return;
    }
    for i in k..v.len() {
        v.swap(k, i);
        permute(v, k + 1, f);
        v.swap(k, i);
    }
}

/// Classical RK4 for `θ' = f(θ)` over `[0, t]` with `steps` steps.
pub fn rk4(f: impl Fn(&[f64]) -> Vec<f64>, theta0: &[f64], t: f64, steps: usize) -> Vec<f64> {
    let dt = t / steps as f64;
    let mut th = theta0.to_vec();
    let axpy =
        |a: &[f64], c: f64, b: &[f64]| a.iter().zip(b).map(|(x, y)| x + c * y).collect::<Vec<_>>();
    for _ in 0..steps {
        let k1 = f(&th);
        let k2 = f(&axpy(&th, dt / 2.0, &k1));
        let k3 = f(&axpy(&th, dt / 2.0, &k2));
        let k4 = f(&axpy(&th, dt, &k3));
        for i in 0..th.len() {
            th[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    th
}

/// Central finite-difference gradient.
pub fn fd_grad(f: impl Fn(&[f64]) -> f64, theta: &[f64], eps: f64) -> Vec<f64> {
    (0..theta.len())
        .map(|i| {
            let mut p = theta.to_vec();
            let mut m = theta.to_vec();
            p[i] += eps;
            m[i] -= eps;
            (f(&p) - f(&m)) / (2.0 * eps)
        })
        .collect()
}

/// Wraps matrices as batches generated from one shared latent batch.
pub fn paired(ms: &[&Matrix<f64>]) -> Vec<wprox::models::SampleBatch<f64>> {
    ms.iter()
        .enumerate()
        .map(|(i, m)| wprox::models::SampleBatch {
            x: (*m).clone(),
            provenance: wprox::models::Provenance::Latent {
                seed: 1,
                counter: 0,
                theta: i as u64,
            },
        })
        .collect()
}
