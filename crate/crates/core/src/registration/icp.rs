//! The restart-and-iterate registration driver.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::pairs::{match_pairs, relax_if_few, robust_weights, trim_pairs, IndexedScene, MatchGate, PairSet, SceneCloud};
use super::params::{GravityPrior, IcpParams};
use super::solve::{apply_bias, gravity_pair_weight, objective_value, project_yaw, refit_translation, solve_rigid, Delta};
use crate::error::{Error, Result};
use crate::geometry::{RigidTransform, Rotation, UnitVec3, Vec3};
use crate::mesh::{sample_mesh_with_normals, OrientedSampleSet, TriangleMesh};
use crate::rng::{derive_seed, seeded};

/// True when the step rotated by at most `eps_rot` degrees and translated by
/// at most `eps_trans` meters.
pub fn converged(delta: &Delta, eps_rot: f64, eps_trans: f64) -> bool {
    delta.angle_deg() <= eps_rot && delta.translation.norm() <= eps_trans
}

/// Inlier fraction minus the inlier RMS residual relative to
/// `max_pair_distance`. Samples are in model coordinates.
pub fn score_pose(model: &OrientedSampleSet, pose: &RigidTransform, scene: &IndexedScene, max_pair_distance: f64) -> f64 {
    if model.is_empty() {
        return 0.0;
    }
    let (mut inliers, mut sq) = (0usize, 0.0);
    for p in &model.points {
        if let Some(nn) = scene.tree.nearest(&pose.apply(p)) {
            if nn.dist_sq <= max_pair_distance * max_pair_distance {
                inliers += 1;
                sq += nn.dist_sq;
            }
        }
    }
    if inliers == 0 {
        return 0.0;
    }
    let fraction = inliers as f64 / model.len() as f64;
    fraction - (sq / inliers as f64).sqrt() / max_pair_distance
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct IterationRecord {
    pub iteration: usize,
    pub pair_count: usize,
    /// Objective of the step's pairs at the identity update.
    pub objective_before: f64,
    /// Objective at the solved (and biased) update.
    pub objective_after: f64,
    pub gravity_weight: f64,
    pub rotation_delta_deg: f64,
    pub translation_delta: f64,
    pub tilt_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RestartDiagnostic {
    pub restart: usize,
    pub initial_yaw_deg: f64,
    pub final_score: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RegistrationResult {
    pub pose: RigidTransform,
    pub score: f64,
    pub iterations: usize,
    pub restart_index: usize,
    pub final_pair_count: usize,
    pub converged: bool,
    pub per_restart: Vec<RestartDiagnostic>,
    /// Iteration log of the winning restart.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<IterationRecord>,
}

struct RestartOutcome {
    pose: RigidTransform,
    score: f64,
    iterations: usize,
    converged: bool,
    final_pairs: usize,
    trace: Vec<IterationRecord>,
}

/// Yaw offsets for each restart: 0 first, then uniform in `±jitter`.
pub fn yaw_restarts(restarts: usize, jitter_deg: f64, seed: u64) -> Vec<f64> {
    let mut rng = seeded(derive_seed(seed, 0x5941_5721));
    (0..restarts)
        .map(|k| if k == 0 { 0.0 } else { rng.random_range(-1.0..=1.0) * jitter_deg })
        .collect()
}

/// Everything a registration run needs besides the initial pose.
pub struct Registration<'a> {
    pub params: &'a IcpParams,
    pub prior: Option<&'a GravityPrior>,
    pub record_trace: bool,
}

/// Registers `model` (posed at `initial`) to `scene`.
///
/// With `prior = None` the run is plain robust ICP: same samples, same
/// restart schedule, no gravity term.
pub fn run_registration(
    model: &TriangleMesh,
    initial: &RigidTransform,
    scene: &SceneCloud,
    params: &IcpParams,
    prior: Option<&GravityPrior>,
) -> Result<RegistrationResult> {
    Registration { params, prior, record_trace: false }.run(model, initial, scene)
}

impl Registration<'_> {
    pub fn run(&self, model: &TriangleMesh, initial: &RigidTransform, scene: &SceneCloud) -> Result<RegistrationResult> {
        self.params.validate()?;
        if let Some(p) = self.prior {
            p.validate()?;
        }
        let scene = IndexedScene::new(scene.clone())?;
        let samples = sample_mesh_with_normals(model, self.params.sample_count, self.params.seed)?;
        self.run_indexed(&samples, initial, &scene)
    }

    /// As [`Registration::run`], with pre-sampled model points (model frame)
    /// and a pre-built scene index.
    pub fn run_indexed(
        &self,
        samples: &OrientedSampleSet,
        initial: &RigidTransform,
        scene: &IndexedScene,
    ) -> Result<RegistrationResult> {
        let params = self.params;
        let gravity = self.prior.map(|p| p.gravity_world).unwrap_or_else(crate::geometry::world_up);
        let yaws = yaw_restarts(params.restarts, params.yaw_jitter_deg, params.seed);
        let centroid = samples.points.iter().sum::<Vec3>() / samples.len().max(1) as f64;
        let pivot = initial.apply(&centroid);

        let outcomes: Vec<Result<RestartOutcome>> = yaws
            .par_iter()
            .map(|&yaw_deg| {
                let jitter = Rotation::from_axis_angle(&gravity, yaw_deg.to_radians());
                let about_pivot = RigidTransform::new(jitter, pivot - jitter * pivot);
                self.refine(samples, &about_pivot.compose(initial), scene)
            })
            .collect();

        let mut per_restart = Vec::with_capacity(yaws.len());
        let mut best: Option<(usize, RestartOutcome)> = None;
        for (k, (outcome, &yaw_deg)) in outcomes.into_iter().zip(&yaws).enumerate() {
            match outcome {
                Ok(o) => {
                    per_restart.push(RestartDiagnostic {
                        restart: k,
                        initial_yaw_deg: yaw_deg,
                        final_score: Some(o.score),
                        iterations: o.iterations,
                        converged: o.converged,
                        error: None,
                    });
                    if best.as_ref().is_none_or(|(_, b)| o.score > b.score) {
                        best = Some((k, o));
                    }
                }
                Err(e) => per_restart.push(RestartDiagnostic {
                    restart: k,
                    initial_yaw_deg: yaw_deg,
                    final_score: None,
                    iterations: 0,
                    converged: false,
                    error: Some(e.to_string()),
                }),
            }
        }
        let Some((restart_index, b)) = best else {
            let detail: Vec<String> = per_restart
                .iter()
                .map(|d| format!("restart {} (yaw {:+.2}°): {}", d.restart, d.initial_yaw_deg, d.error.as_deref().unwrap_or("?")))
                .collect();
            return Err(Error::Infeasible(format!("all restarts failed: {}", detail.join("; "))));
        };
        Ok(RegistrationResult {
            pose: b.pose,
            score: b.score,
            iterations: b.iterations,
            restart_index,
            final_pair_count: b.final_pairs,
            converged: b.converged,
            per_restart,
            trace: if self.record_trace { b.trace } else { Vec::new() },
        })
    }

    fn refine(&self, samples: &OrientedSampleSet, start: &RigidTransform, scene: &IndexedScene) -> Result<RestartOutcome> {
        let params = self.params;
        let gravity = self.prior.map(|p| p.gravity_world).unwrap_or_else(crate::geometry::world_up);
        let gate = MatchGate {
            max_pair_distance: params.max_pair_distance,
            normal_gate: Some(params.normal_gate),
            behind_surface: params.behind_surface_gate,
            huber_delta: params.huber_delta,
        };
        let mut pose = *start;
        let mut trace = Vec::new();
        let mut iterations = 0;
        let mut done = false;
        let mut final_pairs = 0;

        for k in 1..=params.max_iterations {
            iterations = k;
            let world = samples.transformed(&pose);
            let pairs = match_pairs(&world, scene, &gate)?;
            let pairs = relax_if_few(pairs, scene, &world, &gate)?;
            let pairs = trim_pairs(&pairs, params.trim_fraction);
            let pairs: PairSet = robust_weights(&pairs, params.huber_delta);
            final_pairs = pairs.len();

            let data = solve_rigid(&pairs)?;
            let (delta, world_prior, gamma) = match self.prior {
                Some(prior) => {
                    let up_now = UnitVec3::new_normalize(pose.rotation * prior.upright_model.into_inner());
                    let world_prior = prior.with_upright(up_now);
                    let gamma = gravity_pair_weight(&pairs, &world_prior, params.gravity_scaling);
                    let biased = apply_bias(&pairs, &world_prior, &data, &pose.translation, params.gravity_scaling)?;
                    (biased, Some(world_prior), gamma)
                }
                None => (data, None, 0.0),
            };

            if self.record_trace {
                let eval_prior = world_prior
                    .map(|p| GravityPrior { effective_weight: gamma, ..p })
                    .unwrap_or_else(GravityPrior::neutral);
                let model_up = self.prior.map(|p| p.upright_model).unwrap_or_else(crate::geometry::world_up);
                let tilt = crate::geometry::tilt_angle(&(delta.rotation * pose.rotation), &model_up, &gravity);
                trace.push(IterationRecord {
                    iteration: k,
                    pair_count: pairs.len(),
                    objective_before: objective_value(&pairs, &Delta::identity(), &eval_prior),
                    objective_after: objective_value(&pairs, &delta, &eval_prior),
                    gravity_weight: gamma,
                    rotation_delta_deg: delta.angle_deg(),
                    translation_delta: delta.translation.norm(),
                    tilt_deg: tilt,
                });
            }

            let yaw_only = self.prior.is_some_and(|p| p.yaw_only);
            let delta = if yaw_only {
                let rotation = project_yaw(&delta.rotation, &gravity, true);
                let translation = refit_translation(&pairs, &rotation, &delta.translation);
                Delta { rotation, translation }
            } else {
                delta
            };

            pose = RigidTransform::new(delta.rotation, delta.translation).compose(&pose);
            if converged(&delta, params.eps_rot, params.eps_trans) {
                done = true;
                break;
            }
        }
        let score = score_pose(samples, &pose, scene, params.max_pair_distance);
        Ok(RestartOutcome { pose, score, iterations, converged: done, final_pairs, trace })
    }
}
