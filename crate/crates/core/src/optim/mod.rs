//! Step rules (SGD, SAM, GAM), schedules and the training loop.

mod schedule;
mod step;
mod train;

pub use schedule::{schedule_value, Schedule};
pub use step::{
    gam_step, gam_step_traced, sam_step, sgd_step, GamTrace, Hyperparams, OptimizerState,
    StepReport, ALPHA_GRID, DEFAULT_ALPHA, DEFAULT_RHO, RHO_GRID,
};
pub use train::{train_run, AccuracyFn, MetricsRow, OptimizerKind, TrainOutcome, TrainSetup};
