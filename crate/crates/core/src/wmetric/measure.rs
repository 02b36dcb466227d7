use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::models::SampleBatch;

/// Finite weighted point cloud in ℝ^n.
///
/// Points that coincide exactly are merged at construction, so every
/// support point appears once.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    points: Matrix<f64>,
    weights: Vec<f64>,
}

/// Tolerance on the total mass.
pub const MASS_TOLERANCE: f64 = 1e-12;

impl DiscreteMeasure {
    pub fn new(points: Matrix<f64>, weights: Vec<f64>) -> Result<Self> {
        if points.rows() != weights.len() {
            return Err(Error::config(format!(
                "{} points but {} weights",
                points.rows(),
                weights.len()
            )));
        }
        if points.rows() == 0 || points.cols() == 0 {
            return Err(Error::input(
                "a measure needs at least one point of positive dimension",
            ));
        }
        if !points.is_finite() {
            return Err(Error::input("support points must be finite"));
        }
        if let Some(i) = weights.iter().position(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::input(format!(
                "weight {i} is negative or not finite"
            )));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::input(format!("weights sum to {total}, expected 1")));
        }
        let n = points.cols();
        let mut merged_rows: Vec<Vec<f64>> = Vec::new();
        let mut merged_weights: Vec<f64> = Vec::new();
        for (i, &w) in weights.iter().enumerate() {
            let row = points.row_slice(i);
            match merged_rows.iter().position(|r| r.as_slice() == row) {
                Some(k) => merged_weights[k] += w,
                None => {
                    merged_rows.push(row.to_vec());
                    merged_weights.push(w);
                }
            }
        }
        let m = merged_rows.len();
        Ok(Self {
            points: Matrix::from_vec(m, n, merged_rows.concat()),
            weights: merged_weights,
        })
    }

    /// Equal-weight empirical measure of the rows of `x`.
    pub fn empirical(x: &Matrix<f64>) -> Result<Self> {
        let m = x.rows();
        Self::new(x.clone(), vec![1.0 / m as f64; m])
    }

    pub fn from_batch(batch: &SampleBatch<f64>) -> Result<Self> {
        Self::empirical(&batch.x)
    }

    pub fn points(&self) -> &Matrix<f64> {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.cols()
    }

    /// One line per point: `weight x1 … xn`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (i, w) in self.weights.iter().enumerate() {
            write!(s, "{w:e}").unwrap();
            for v in self.points.row_slice(i) {
                write!(s, " {v:e}").unwrap();
            }
            s.push('\n');
        }
        s
    }

    /// Parses [`to_text`](Self::to_text) output. Blank lines and lines
    /// starting with `#` are skipped.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut weights = Vec::new();
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let values = line
                .split_whitespace()
                .map(str::parse::<f64>)
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::input(format!("line {}: {e}", lineno + 1)))?;
            if values.len() < 2 {
                return Err(Error::input(format!(
                    "line {}: expected `weight x1 ... xn`",
                    lineno + 1
                )));
            }
            if let Some(first) = rows.first() {
                if first.len() != values.len() - 1 {
                    return Err(Error::input(format!(
                        "line {}: inconsistent dimension",
                        lineno + 1
                    )));
                }
            }
            weights.push(values[0]);
            rows.push(values[1..].to_vec());
        }
        if rows.is_empty() {
            return Err(Error::input("no support points"));
        }
        Self::new(Matrix::from_rows(&rows), weights)
    }
}
