//! Robust ICP with an optional semantic upright prior.
//!
//! Each iteration matches model samples to the scene, relaxes the gates when
//! too few pairs survive, trims the worst residuals, reweights with Huber
//! weights, solves the rigid update in closed form, applies the gravity
//! prior, optionally keeps only the yaw component, and composes the update
//! onto the pose. Several yaw-jittered restarts run independently and the
//! best-scoring one wins.

mod icp;
mod pairs;
mod params;
mod solve;

pub use icp::{converged, run_registration, score_pose, yaw_restarts, IterationRecord, Registration, RegistrationResult, RestartDiagnostic};
pub use pairs::{
    match_pairs, relax_if_few, robust_weights, trim_pairs, IndexedScene, MatchGate, PairSet, SceneCloud, MIN_PAIRS,
    MIN_SCENE_POINTS, RELAX_BELOW,
};
pub use params::{BiasMode, GravityPrior, GravityScaling, IcpParams};
pub use solve::{
    apply_bias, gravity_pair_weight, gravity_penalty, objective_value, project_yaw, refit_translation, rotation_between,
    solve_rigid, Delta,
};
