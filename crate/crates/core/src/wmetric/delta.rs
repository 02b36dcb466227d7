use std::fmt;

use crate::error::{Error, Result};
use crate::models::DeltaMixtureModel;

/// A divergence value that may be `+∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Divergence {
    Finite(f64),
    Infinite,
}

impl Divergence {
    pub fn is_infinite(&self) -> bool {
        matches!(self, Divergence::Infinite)
    }

    /// `f64::INFINITY` for the sentinel.
    pub fn to_f64(self) -> f64 {
        match self {
            Divergence::Finite(v) => v,
            Divergence::Infinite => f64::INFINITY,
        }
    }
}

impl fmt::Display for Divergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Divergence::Finite(v) => write!(f, "{v}"),
            Divergence::Infinite => f.write_str("inf"),
        }
    }
}

/// Four ways of comparing two delta mixtures with the same α.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaDistances {
    pub w2sq: f64,
    pub euclidsq: f64,
    pub kl: Divergence,
    pub l2: Divergence,
}

/// Whether the two mixtures define the same measure (points carrying zero
/// mass are ignored).
fn same_measure(m: &DeltaMixtureModel, k: &DeltaMixtureModel) -> bool {
    let a_same = m.alpha == 0.0 || m.a == k.a;
    let b_same = m.alpha == 1.0 || m.b == k.b;
    a_same && b_same
}

/// `W₂²`, squared Euclidean parameter distance, KL and L² between two
/// delta mixtures. KL and L² are infinite whenever the measures differ,
/// since their supports then differ on a set of positive mass.
pub fn delta_mixture_distances(
    m: &DeltaMixtureModel,
    k: &DeltaMixtureModel,
) -> Result<DeltaDistances> {
    if m.alpha != k.alpha {
        return Err(Error::usage(format!(
            "mixtures must share alpha, got {} and {}",
            m.alpha, k.alpha
        )));
    }
    let da = m.a - k.a;
    let db = m.b - k.b;
    let (kl, l2) = if same_measure(m, k) {
        (Divergence::Finite(0.0), Divergence::Finite(0.0))
    } else {
        (Divergence::Infinite, Divergence::Infinite)
    };
    Ok(DeltaDistances {
        w2sq: m.alpha * da * da + (1.0 - m.alpha) * db * db,
        euclidsq: da * da + db * db,
        kl,
        l2,
    })
}

/// `W₁ = α|a − a*| + (1 − α)|b − b*|` between mixtures with the same α.
pub fn delta_mixture_w1(m: &DeltaMixtureModel, target: &DeltaMixtureModel) -> Result<f64> {
    if m.alpha != target.alpha {
        return Err(Error::usage("mixtures must share alpha"));
    }
    Ok(m.alpha * (m.a - target.a).abs() + (1.0 - m.alpha) * (m.b - target.b).abs())
}
