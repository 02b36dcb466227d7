use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Where the rows of a [`SampleBatch`] came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    /// Generated from latent batch `(seed, counter)` at parameters with
    /// fingerprint `theta`.
    Latent { seed: u64, counter: u64, theta: u64 },
    /// Drawn from a target sampler.
    Target { seed: u64, counter: u64 },
    /// Supplied by the caller.
    External,
}

/// B×n samples, one per row.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch<T> {
    pub x: Matrix<T>,
    pub provenance: Provenance,
}

impl<T: Scalar> SampleBatch<T> {
    pub fn external(x: Matrix<T>) -> Self {
        Self {
            x,
            provenance: Provenance::External,
        }
    }

    pub fn len(&self) -> usize {
        self.x.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.x.cols()
    }

    /// Checks that `self` and `other` were generated from the same latent
    /// batch, so row `i` of each pairs with the same `z_i`.
    pub fn check_paired(&self, other: &Self) -> Result<()> {
        if self.x.shape() != other.x.shape() {
            return Err(Error::usage(format!(
                "paired batches must have equal shapes, got {:?} and {:?}",
                self.x.shape(),
                other.x.shape()
            )));
        }
        match (self.provenance, other.provenance) {
            (
                Provenance::Latent {
                    seed: s1,
                    counter: c1,
                    ..
                },
                Provenance::Latent {
                    seed: s2,
                    counter: c2,
                    ..
                },
            ) if s1 == s2 && c1 == c2 => Ok(()),
            (a, b) => Err(Error::usage(format!(
                "batches do not share a latent batch: {a:?} vs {b:?}"
            ))),
        }
    }
}

/// Bit-pattern fingerprint of a parameter vector.
pub fn fingerprint<T: Scalar>(values: &[T]) -> u64 {
    let mut h = DefaultHasher::new();
    for v in values {
        v.to_f64_lossy().to_bits().hash(&mut h);
    }
    h.finish()
}
