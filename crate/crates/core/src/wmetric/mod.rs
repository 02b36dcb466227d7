//! Wasserstein penalties, metric tensors, closed forms and exact oracles.

mod affine;
mod delta;
mod elliptic;
mod measure;
mod metric;
mod penalty;
mod transport;

pub use affine::{affine_metric, AffineBasis, AffineDegree, Damping};
pub use delta::{delta_mixture_distances, delta_mixture_w1, DeltaDistances, Divergence};
pub use elliptic::{elliptic_metric_1d_grid, MEAN_TOLERANCE};
pub use measure::{DiscreteMeasure, MASS_TOLERANCE};
pub use metric::{
    affine_pullback_metric, delta_mixture_metric, metric_tensor_1d, metric_tensor_1d_on,
    pullback_on, MetricTag, MetricTensor,
};
pub use penalty::{
    exact1d_penalty, exact1d_tape, o1sbe_penalty, o1sbe_tape, o2diag_displayed_tape,
    o2diag_penalty, o2diag_penalty_at, o2diag_tape, rwp_penalty, rwp_tape, MidpointRule,
    PenaltyKind, ProximalPenalty, VARIANCE_FLOOR,
};
pub use transport::{exact_wp_discrete, MAX_SUPPORT};
