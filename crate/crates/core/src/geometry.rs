//! Rigid-body primitives shared by every other module.
//!
//! Points and directions are `nalgebra` vectors; rotations are unit
//! quaternions and only become matrices inside the solvers.

use nalgebra::{Matrix3, Unit, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

pub type Vec3 = Vector3<f64>;
pub type UnitVec3 = Unit<Vector3<f64>>;
pub type Rotation = UnitQuaternion<f64>;

/// World "up". Gravity priors align the model's canonical up with this axis.
pub fn world_up() -> UnitVec3 {
    Vec3::z_axis()
}

/// Rotation of `deg` degrees about the world z axis.
pub fn yaw(deg: f64) -> Rotation {
    Rotation::from_axis_angle(&Vec3::z_axis(), deg.to_radians())
}

/// A rotation followed by a translation: `p ↦ R·p + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Rotation,
    pub translation: Vec3,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn new(rotation: Rotation, translation: Vec3) -> Self {
        Self { rotation, translation }
    }

    pub fn identity() -> Self {
        Self::new(Rotation::identity(), Vec3::zeros())
    }

    pub fn from_translation(translation: Vec3) -> Self {
        Self::new(Rotation::identity(), translation)
    }

    pub fn from_rotation(rotation: Rotation) -> Self {
        Self::new(rotation, Vec3::zeros())
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    pub fn apply_dir(&self, d: &Vec3) -> Vec3 {
        self.rotation * d
    }

    /// `self ∘ other`: applies `other` first, then `self`.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        let mut rotation = self.rotation * other.rotation;
        rotation.renormalize();
        RigidTransform {
            rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let inv = self.rotation.inverse();
        RigidTransform {
            rotation: inv,
            translation: -(inv * self.translation),
        }
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        self.rotation.to_rotation_matrix().into_inner()
    }
}

pub fn compose(a: &RigidTransform, b: &RigidTransform) -> RigidTransform {
    a.compose(b)
}

pub fn apply(t: &RigidTransform, p: &Vec3) -> Vec3 {
    t.apply(p)
}

/// Angle of `a·b⁻¹` in degrees, in `[0, 180]`.
pub fn geodesic_angle(a: &Rotation, b: &Rotation) -> f64 {
    let rel = a * b.inverse();
    // |w| handles the quaternion double cover.
    let w = rel.scalar().abs().min(1.0);
    let v = rel.imag().norm();
    (2.0 * v.atan2(w)).to_degrees()
}

/// Angle in degrees between the rotated model up `R·g0` and world up `gm`.
pub fn tilt_angle(r: &Rotation, g0: &UnitVec3, gm: &UnitVec3) -> f64 {
    let up = r * g0.into_inner();
    gm.dot(&up).clamp(-1.0, 1.0).acos().to_degrees()
}

/// Wire form of a pose: quaternion `[w, x, y, z]` plus translation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseRecord {
    pub quaternion: [f64; 4],
    pub translation: [f64; 3],
}

impl From<&RigidTransform> for PoseRecord {
    fn from(t: &RigidTransform) -> Self {
        let q = t.rotation.quaternion();
        PoseRecord {
            quaternion: [q.w, q.i, q.j, q.k],
            translation: [t.translation.x, t.translation.y, t.translation.z],
        }
    }
}

impl From<&PoseRecord> for RigidTransform {
    fn from(p: &PoseRecord) -> Self {
        let [w, x, y, z] = p.quaternion;
        let q = nalgebra::Quaternion::new(w, x, y, z);
        // unit to rounding: keep the bits so poses round-trip exactly
        let unit = if (q.norm_squared() - 1.0).abs() <= 1e-12 {
            UnitQuaternion::new_unchecked(q)
        } else {
            UnitQuaternion::from_quaternion(q)
        };
        RigidTransform::new(
            unit,
            Vec3::new(p.translation[0], p.translation[1], p.translation[2]),
        )
    }
}

impl Serialize for RigidTransform {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        PoseRecord::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for RigidTransform {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let rec = PoseRecord::deserialize(d)?;
        let [w, x, y, z] = rec.quaternion;
        let n = (w * w + x * x + y * y + z * z).sqrt();
        if !n.is_finite() || n < 1e-12 {
            return Err(serde::de::Error::custom("quaternion must be non-zero"));
        }
        Ok(RigidTransform::from(&rec))
    }
}
