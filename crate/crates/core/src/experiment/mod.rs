//! The regression experiment: data, initial conditions, training with co-integrated
//! tangent dynamics, ensembles and their on-disk formats.

mod config;
mod dataset;
mod ensemble;
mod init;
pub mod persist;
mod seeding;
mod table;
mod train;

pub use config::{Seeds, TrainConfig, DEFAULT_CHECKPOINTS};
pub use dataset::{generate_dataset, regression_target, Dataset};
pub use ensemble::{run_ensemble, run_ensemble_records};
pub use init::{init_he, init_wide, Initializer, DEFAULT_WIDE_SIGMA};
pub use seeding::{stream_rng, Stream};
pub use table::{OutcomeRow, OutcomeTable};
pub use train::{
    epochs_for_steps, steps_per_epoch, train_run, train_run_observed, CheckpointRecord, GinelliSummary, RunRecord,
    StepEvent, TrainObserver, Trajectory, GINELLI_TAIL_FRACTION,
};
