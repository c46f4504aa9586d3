//! Weight dynamics of three-layer feed-forward networks treated as a dynamical system.
//!
//! Gradient-flow training `θ̇ = −∇C(θ)` is integrated with explicit Euler steps while the
//! tangent space is co-integrated with the analytic Jacobian of the flow. From the tangent
//! dynamics the crate extracts finite-time and whole-run Lyapunov exponents and covariant
//! Lyapunov vectors, and uses them to forecast whether a training run will end with a
//! very low or very high loss.
//!
//! Module map:
//! - [`net`]: activations, forward pass, cost and vector field
//! - [`state`] and [`jacobian`]: flat state layout, analytic and finite-difference Jacobians
//! - [`stability`]: Benettin propagation, FTLEs, Ginelli and online CLVs, CLV angles
//! - [`experiment`]: regression dataset, initializers, training loop, ensembles, persistence
//! - [`prediction`]: outcome labels, binned naive Bayes, ROC/AUC, contingency tables

// Index loops mirror the block formulas; `!(a < b)` comparisons deliberately reject NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiment;
pub mod jacobian;
pub mod net;
pub mod prediction;
pub mod stability;
pub mod state;

pub use error::{Error, Result};
pub use experiment::{
    generate_dataset, init_he, init_wide, run_ensemble, run_ensemble_records, train_run, train_run_observed,
    Dataset, Initializer, OutcomeTable, RunRecord, Seeds, TrainConfig, TrainObserver,
};
pub use jacobian::{check_jacobian, jacobian_analytic, jacobian_fd, JacobianMatrix, JacobianReport};
pub use net::{cost, forward, vector_field, Activation, Batch, Dims, ForwardTrace, Params};
pub use prediction::{evaluate, 
    contingency_table, fit_naive_bayes, label_outcomes, predict_posterior, roc_curve, BayesModel, Contingency,
    Direction, LabeledFeatures, RocCurve,
};
pub use stability::{ClvSet, FtleVector, RSequence, TangentFrame};
pub use state::{flatten, unflatten, StateIndexMap};
