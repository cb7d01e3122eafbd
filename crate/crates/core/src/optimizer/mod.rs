//! Stochastic gradient descent on `c(μ) = ½‖G(μ)‖²`.

mod budget;
mod policy;
mod run;

pub use budget::{estimate_local_constants, stability_budget, LocalConstants, ProbeConfig, StabilityBudget};
pub use policy::{hurwitz_zeta, validate_policy, PolicyReport, Schedule, Segment, SegmentRule, StepSizePolicy};
pub use run::{
    sgd_run, CheckpointRecord, Checkpoints, CostFn, GradientFn, GradientMode, RunOptions, RunRecord, StepRecord,
    Termination,
};
