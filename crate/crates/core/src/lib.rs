//! Point-cloud-to-model registration with object-specific upright priors,
//! and the tooling around it: synthetic construction-site scenes, alignment
//! metrics, corner features from RGB-D frames, and hand-arm vibration
//! exposure tracking.

pub mod error;
pub mod evaluation;
pub mod features;
pub mod geometry;
pub mod hav;
pub mod io;
pub mod mesh;
pub mod priors;
pub mod registration;
pub mod rng;
pub mod scenes;
pub mod spatial;

pub use error::{Error, Result};
pub use geometry::{RigidTransform, Rotation, UnitVec3, Vec3};
pub use mesh::{sample_mesh_with_normals, OrientedSampleSet, TriangleMesh};
