//! Configuration, artifacts and drivers of reproducible experiments.

mod config;
mod plot;
mod run;
mod snapshot;
mod toy;

pub use crate::adversarial::EvalSet;
pub use config::{ExperimentConfig, FlowObjective, FlowScheme, FlowSettings};
pub use plot::{envelope, envelope_svg, vector_field_svg, EnvelopeSeries};
pub use run::{
    flow_problem, iterate_distance, run_experiment, run_flow, snapshot_metric, train_once,
    write_toy_artifacts, ExperimentReport, FlowProblem, RunSummary, PLOT_ALPHA,
};
pub use snapshot::{
    read_snapshot, snapshot_from_str, snapshot_to_string, write_snapshot, SNAPSHOT_HEADER,
};
pub use toy::{mean_angles, toy_example1, write_toy_csv, ToyRow, ToySettings};
