//! Classical dynamics of a finite-size charged particle with a delayed
//! self-interaction, its local asymptotic approximations, and the kinetic
//! and fluid descriptions built on them.
//!
//! Units have c = 1 and the metric is η = diag(1, −1, −1, −1). Four-vectors
//! are stored contravariant; forces and potentials are returned covariant.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Tensor code reads best with explicit index loops.
#![allow(clippy::needless_range_loop)]

pub mod bessel;
pub mod error;
pub mod fields;
pub mod fluid;
pub mod geometry;
pub mod history;
pub mod integrator;
pub mod kinetic;
pub mod roots;
pub mod selfforce;
pub mod studies;

pub use error::{Error, Result};
pub use fields::{eval_field, lorentz_force, ExternalFieldModel, FieldEval, PlaneWavePulse};
pub use geometry::{lower_index, minkowski_dot, renormalize_velocity, FaradayTensor, FourVector, METRIC};
pub use history::{find_retarded_time, retarded_point, RetardedPoint, WorldlineHistory, WorldlineSample};
pub use integrator::{
    run_scenario, run_with_source, ConstraintMode, InitialState, IntegratorConfig, RunOutput,
};
pub use selfforce::{ForceTerms, ParticleParams, SelfForceModel};

/// Engine version recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
