//! Tangent-space stability analysis of a trajectory: QR-reorthonormalized propagation,
//! finite-time and whole-run Lyapunov exponents, covariant Lyapunov vectors and the
//! angles between them.

mod clv;
mod lyapunov;
mod tangent;

pub use clv::{
    clv_angles, estimate_clvs_online, ginelli_clvs, subspace_angle, AngleStats, ClvMethod, ClvSet,
};
pub use lyapunov::{ftle, ftle_from_log_diagonals, lyapunov_spectrum, FtleVector, RSequence};
pub(crate) use lyapunov::log_diagonal;
pub use tangent::{propagate_interval, TangentFrame, TangentPropagator};
