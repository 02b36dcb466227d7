//! Flat parameter vectors with a named-slice layout.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// One named contiguous block of a parameter vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slice {
    pub name: String,
    pub offset: usize,
    pub len: usize,
}

/// Ordered, contiguous, disjoint slices covering `0..total`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Layout {
    slices: Vec<Slice>,
}

impl Layout {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a slice after the current end.
    pub fn push(&mut self, name: impl Into<String>, len: usize) -> &mut Self {
        let offset = self.total();
        self.slices.push(Slice {
            name: name.into(),
            offset,
            len,
        });
        self
    }

    pub fn with(mut self, name: impl Into<String>, len: usize) -> Self {
        self.push(name, len);
        self
    }

    pub fn single(name: impl Into<String>, len: usize) -> Self {
        Self::new().with(name, len)
    }

    /// Rebuilds a layout from explicit slices, checking contiguity.
    pub fn from_slices(slices: Vec<Slice>) -> Result<Self> {
        let mut expected = 0;
        for s in &slices {
            if s.offset != expected {
                return Err(Error::config(format!(
                    "slice `{}` starts at {} but the previous slice ends at {expected}",
                    s.name, s.offset
                )));
            }
            expected += s.len;
        }
        Ok(Self { slices })
    }

    pub fn total(&self) -> usize {
        self.slices.last().map_or(0, |s| s.offset + s.len)
    }

    pub fn slices(&self) -> &[Slice] {
        &self.slices
    }

    pub fn get(&self, name: &str) -> Option<&Slice> {
        self.slices.iter().find(|s| s.name == name)
    }
}

/// Model parameters θ (or discriminator ω, potential p).
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector<T> {
    values: Vec<T>,
    layout: Layout,
}

impl<T: Scalar> ParamVector<T> {
    pub fn new(values: Vec<T>, layout: Layout) -> Result<Self> {
        if layout.total() != values.len() {
            return Err(Error::config(format!(
                "layout covers {} entries but the vector has {}",
                layout.total(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::input(format!("parameter entry {i} is not finite")));
        }
        Ok(Self { values, layout })
    }

    /// Single-slice vector named `theta`.
    pub fn flat(values: Vec<T>) -> Self {
        let layout = Layout::single("theta", values.len());
        Self::new(values, layout).expect("finite values")
    }

    pub fn zeros(layout: Layout) -> Self {
        let n = layout.total();
        Self {
            values: vec![T::zero(); n],
            layout,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn slice(&self, name: &str) -> Option<&[T]> {
        self.layout
            .get(name)
            .map(|s| &self.values[s.offset..s.offset + s.len])
    }

    /// Same layout, new values.
    pub fn with_values(&self, values: Vec<T>) -> Result<Self> {
        Self::new(values, self.layout.clone())
    }

    /// `self + c * dir`.
    pub fn offset_by(&self, c: T, dir: &[T]) -> Result<Self> {
        assert_eq!(dir.len(), self.len());
        self.with_values(
            self.values
                .iter()
                .zip(dir)
                .map(|(&a, &d)| a + c * d)
                .collect(),
        )
    }

    /// Midpoint `(self + other) / 2`.
    pub fn midpoint(&self, other: &Self) -> Self {
        Self {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| (a + b) * T::half())
                .collect(),
            layout: self.layout.clone(),
        }
    }

    pub fn distance(&self, other: &Self) -> T {
        self.values
            .iter()
            .zip(&other.values)
            .fold(T::zero(), |acc, (&a, &b)| acc + (a - b) * (a - b))
            .sqrt()
    }

    pub fn as_column(&self) -> Matrix<T> {
        Matrix::column(self.values.clone())
    }

    /// Mutable access for optimizer updates; callers keep entries finite.
    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_slices_are_contiguous() {
        let layout = Layout::new().with("w", 6).with("b", 3);
        assert_eq!(layout.total(), 9);
        let p = ParamVector::new((0..9).map(|i| i as f64).collect(), layout).unwrap();
        assert_eq!(p.slice("b").unwrap(), &[6.0, 7.0, 8.0]);
    }

    #[test]
    fn rejects_length_mismatch_and_non_finite() {
        let layout = Layout::single("theta", 2);
        assert!(ParamVector::new(vec![1.0], layout.clone()).is_err());
        assert!(ParamVector::new(vec![1.0, f64::NAN], layout).is_err());
        let gap = vec![
            Slice {
                name: "a".into(),
                offset: 0,
                len: 2,
            },
            Slice {
                name: "b".into(),
                offset: 3,
                len: 1,
            },
        ];
        assert!(Layout::from_slices(gap).is_err());
    }
}
