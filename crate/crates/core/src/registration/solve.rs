//! Closed-form rigid solves, the gravity penalty, and the regularized
//! objective they minimize.
//!
//! The data term is `½ Σ wᵢ‖bᵢ − (R rᵢ + t)‖²` and the gravity term is
//! `(γ/2)‖g_m − R g₀‖²`, which equals `γ(1 − g_mᵀ R g₀)` for unit vectors.
//! After eliminating `t`, both terms are linear in `R` through
//! `tr(R·H)`, so the gravity term is one more rank-1 contribution to the
//! cross-covariance `H`: a direction pair `(g₀, g_m)` weighted by `γ`, kept
//! out of the centroids.

use nalgebra::{Matrix3, Rotation3, SVD};

use super::pairs::{PairSet, MIN_PAIRS};
use super::params::{BiasMode, GravityPrior, GravityScaling};
use crate::error::{Error, Result};
use crate::geometry::{geodesic_angle, tilt_angle, Rotation, UnitVec3, Vec3};

/// Incremental rigid update `x ↦ R·x + t` in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Delta {
    pub rotation: Rotation,
    pub translation: Vec3,
}

impl Delta {
    pub fn identity() -> Self {
        Self { rotation: Rotation::identity(), translation: Vec3::zeros() }
    }

    pub fn angle_deg(&self) -> f64 {
        geodesic_angle(&self.rotation, &Rotation::identity())
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }
}

/// Weighted centroids and cross-covariance `Σ wᵢ (rᵢ − r̄)(bᵢ − b̄)ᵀ`.
struct Moments {
    model_centroid: Vec3,
    scene_centroid: Vec3,
    cross: Matrix3<f64>,
    total_weight: f64,
    /// `Σ wᵢ ‖rᵢ − r̄‖ ‖bᵢ − b̄‖`
    spread: f64,
}

fn moments(pairs: &PairSet) -> Option<Moments> {
    let total_weight: f64 = pairs.weights.iter().sum();
    if pairs.is_empty() || !(total_weight > 0.0) {
        return None;
    }
    let wsum = |pts: &[Vec3]| {
        pts.iter()
            .zip(&pairs.weights)
            .fold(Vec3::zeros(), |acc, (p, w)| acc + p * *w)
            / total_weight
    };
    let model_centroid = wsum(&pairs.model_points);
    let scene_centroid = wsum(&pairs.scene_points);
    let mut cross = Matrix3::zeros();
    let mut spread = 0.0;
    for i in 0..pairs.len() {
        let w = pairs.weights[i];
        let r = pairs.model_points[i] - model_centroid;
        let b = pairs.scene_points[i] - scene_centroid;
        cross += (r * b.transpose()) * w;
        spread += w * r.norm() * b.norm();
    }
    Some(Moments { model_centroid, scene_centroid, cross, total_weight, spread })
}

/// Rotation maximizing `tr(R·H)`, with the reflection excluded.
fn rotation_from_cross(h: &Matrix3<f64>) -> Result<Rotation> {
    let svd = SVD::new(*h, true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut s = svd.singular_values.as_slice().to_vec();
    s.sort_by(|a, b| b.total_cmp(a));
    if !(s[0] > 0.0) || s[1] <= 1e-12 * s[0] {
        return Err(Error::DegenerateGeometry(format!(
            "cross-covariance rank < 2 (singular values {:.3e}, {:.3e}, {:.3e})",
            s[0], s[1], s[2]
        )));
    }
    let v = v_t.transpose();
    let d = (v * u.transpose()).determinant().signum();
    let r = v * Matrix3::from_diagonal(&Vec3::new(1.0, 1.0, d)) * u.transpose();
    Ok(Rotation::from_rotation_matrix(&Rotation3::from_matrix_unchecked(r)))
}

/// Weighted Kabsch solve of `min Σ wᵢ‖bᵢ − (R rᵢ + t)‖²`.
pub fn solve_rigid(pairs: &PairSet) -> Result<Delta> {
    if pairs.len() < MIN_PAIRS {
        return Err(Error::DegenerateGeometry(format!("{} pairs, need {MIN_PAIRS}", pairs.len())));
    }
    let m = moments(pairs).ok_or_else(|| Error::DegenerateGeometry("zero total weight".into()))?;
    let rotation = rotation_from_cross(&m.cross)?;
    Ok(Delta {
        rotation,
        translation: m.scene_centroid - rotation * m.model_centroid,
    })
}

/// `γ(1 − g_m · (R·g₀))`.
pub fn gravity_penalty(r: &Rotation, prior: &GravityPrior) -> f64 {
    let up = r * prior.upright_model.into_inner();
    prior.effective_weight * (1.0 - prior.gravity_world.dot(&up))
}

/// `½ Σ wᵢ‖bᵢ − (R rᵢ + t)‖² + (γ/2)‖g_m − R g₀‖²`, evaluated literally.
///
/// `pairs.model_points` and `prior.upright_model` must be expressed in the
/// frame the delta maps from.
pub fn objective_value(pairs: &PairSet, delta: &Delta, prior: &GravityPrior) -> f64 {
    let data: f64 = (0..pairs.len())
        .map(|i| {
            let e = pairs.scene_points[i] - delta.apply(&pairs.model_points[i]);
            0.5 * pairs.weights[i] * e.norm_squared()
        })
        .sum();
    let g = prior.gravity_world.into_inner() - delta.rotation * prior.upright_model.into_inner();
    data + 0.5 * prior.effective_weight * g.norm_squared()
}

/// Weight given to the gravity direction pair in the rotation solve.
pub fn gravity_pair_weight(pairs: &PairSet, prior: &GravityPrior, scaling: GravityScaling) -> f64 {
    if prior.effective_weight == 0.0 {
        return 0.0;
    }
    let Some(m) = moments(pairs) else {
        return prior.effective_weight;
    };
    match scaling {
        GravityScaling::DataMoment => prior.effective_weight * m.spread,
        GravityScaling::MeanWeight => prior.effective_weight * m.total_weight / pairs.len() as f64,
    }
}

/// Rotation carrying direction `from` onto `to` about `from × to`; a half
/// turn about a fixed perpendicular axis when they are opposite.
pub fn rotation_between(from: &Vec3, to: &Vec3) -> Rotation {
    Rotation::rotation_between(from, to).unwrap_or_else(|| {
        Rotation::from_axis_angle(&perpendicular(to), std::f64::consts::PI)
    })
}

fn perpendicular(v: &Vec3) -> UnitVec3 {
    let a = v.abs();
    let e = if a.x <= a.y && a.x <= a.z {
        Vec3::x()
    } else if a.y <= a.z {
        Vec3::y()
    } else {
        Vec3::z()
    };
    UnitVec3::new_normalize(v.cross(&e))
}

/// Applies the upright prior to one ICP step.
///
/// `prior.upright_model` is the body's up direction in world coordinates at
/// the current pose. Penalty mode re-solves the rotation with the gravity
/// pair added to the cross-covariance (the translation still comes from the
/// data centroids). Corrective mode then rotates the result toward upright by
/// `β` times its remaining tilt, about the scene centroid of the pairs (or
/// `pivot` when there are no pairs).
pub fn apply_bias(
    pairs: &PairSet,
    prior: &GravityPrior,
    data_delta: &Delta,
    pivot: &Vec3,
    scaling: GravityScaling,
) -> Result<Delta> {
    let gm = prior.gravity_world.into_inner();
    let up = prior.upright_model.into_inner();
    let mut delta = *data_delta;
    let gamma = gravity_pair_weight(pairs, prior, scaling);

    if gamma > 0.0 {
        match moments(pairs) {
            Some(m) if pairs.len() >= MIN_PAIRS => {
                let h = m.cross + (up * gm.transpose()) * gamma;
                let rotation = rotation_from_cross(&h)?;
                delta = Delta {
                    rotation,
                    translation: m.scene_centroid - rotation * m.model_centroid,
                };
            }
            // Without data the penalty alone is minimized by the shortest
            // rotation onto gravity.
            _ => {
                let rotation = rotation_between(&up, &gm);
                delta = Delta { rotation, translation: pivot - rotation * pivot };
            }
        }
    }

    if prior.mode == BiasMode::Corrective && prior.upright_bias > 0.0 {
        let current = delta.rotation * up;
        let tilt = tilt_angle(&Rotation::identity(), &UnitVec3::new_normalize(current), &prior.gravity_world);
        if tilt > 0.0 {
            let axis = UnitVec3::try_new(current.cross(&gm), 1e-12).unwrap_or_else(|| perpendicular(&gm));
            let correction = Rotation::from_axis_angle(&axis, (prior.upright_bias * tilt).to_radians());
            let center = match moments(pairs) {
                Some(m) => m.scene_centroid,
                None => delta.apply(pivot),
            };
            delta = Delta {
                rotation: correction * delta.rotation,
                translation: correction * (delta.translation - center) + center,
            };
        }
    }
    Ok(delta)
}

/// Twist of `delta` about `gravity` when `yaw_only`, else `delta` unchanged.
pub fn project_yaw(delta: &Rotation, gravity: &UnitVec3, yaw_only: bool) -> Rotation {
    if !yaw_only {
        return *delta;
    }
    let q = delta.quaternion();
    let along = gravity.into_inner() * q.imag().dot(gravity);
    let twist = nalgebra::Quaternion::new(q.w, along.x, along.y, along.z);
    if twist.norm() < 1e-12 {
        return Rotation::identity();
    }
    Rotation::from_quaternion(twist)
}

/// Re-fits the translation for a fixed rotation from the data centroids.
pub fn refit_translation(pairs: &PairSet, rotation: &Rotation, fallback: &Vec3) -> Vec3 {
    match moments(pairs) {
        Some(m) => m.scene_centroid - rotation * m.model_centroid,
        None => *fallback,
    }
}
