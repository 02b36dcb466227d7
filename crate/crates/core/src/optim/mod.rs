//! Time discretizations of the Wasserstein natural gradient flow.

mod flow;
mod inner;
mod step;

pub use flow::{flow_integrate, FlowPoint, Trajectory};
pub use inner::{InnerOptimizer, OptimizerConfig, OptimizerRule};
pub use step::{
    backward_euler_step, forward_euler_step, sbe_step, FlowConfig, InnerMode, InnerRecord,
    StepOutcome, DIVERGENCE_FACTOR,
};
