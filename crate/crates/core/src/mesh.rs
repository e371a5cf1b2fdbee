//! Triangle meshes and area-weighted surface sampling.

use rand::Rng;

use crate::error::{Error, Result};
use crate::geometry::{RigidTransform, UnitVec3, Vec3};
use crate::rng::seeded;

/// Triangles with area below this are dropped at construction.
pub const MIN_TRIANGLE_AREA: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Vec3>,
    triangles: Vec<[usize; 3]>,
}

impl TriangleMesh {
    /// Validates indices and drops degenerate triangles.
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        if let Some(v) = vertices.iter().find(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(Error::invalid(format!("non-finite vertex {v:?}")));
        }
        let n = vertices.len();
        let mut kept = Vec::with_capacity(triangles.len());
        for (i, tri) in triangles.into_iter().enumerate() {
            if tri.iter().any(|&k| k >= n) {
                return Err(Error::invalid(format!(
                    "triangle {i} references vertex out of range ({n} vertices)"
                )));
            }
            if triangle_area(&vertices[tri[0]], &vertices[tri[1]], &vertices[tri[2]]) >= MIN_TRIANGLE_AREA {
                kept.push(tri);
            }
        }
        Ok(Self { vertices, triangles: kept })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn corners(&self, tri: usize) -> [Vec3; 3] {
        let [a, b, c] = self.triangles[tri];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn face_normal(&self, tri: usize) -> UnitVec3 {
        let [a, b, c] = self.corners(tri);
        UnitVec3::new_normalize((b - a).cross(&(c - a)))
    }

    pub fn area(&self, tri: usize) -> f64 {
        let [a, b, c] = self.corners(tri);
        triangle_area(&a, &b, &c)
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.triangles.len()).map(|i| self.area(i)).sum()
    }

    pub fn transformed(&self, pose: &RigidTransform) -> TriangleMesh {
        TriangleMesh {
            vertices: self.vertices.iter().map(|v| pose.apply(v)).collect(),
            triangles: self.triangles.clone(),
        }
    }

    /// Axis-aligned bounds `(min, max)`; `None` for a mesh without vertices.
    pub fn bounds(&self) -> Option<(Vec3, Vec3)> {
        let first = *self.vertices.first()?;
        Some(self.vertices.iter().fold((first, first), |(lo, hi), v| {
            (lo.inf(v), hi.sup(v))
        }))
    }

    /// Appends `other`, offsetting its indices.
    pub fn merge(&mut self, other: &TriangleMesh) {
        let base = self.vertices.len();
        self.vertices.extend_from_slice(&other.vertices);
        self.triangles
            .extend(other.triangles.iter().map(|t| [t[0] + base, t[1] + base, t[2] + base]));
    }
}

pub fn triangle_area(a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    0.5 * (b - a).cross(&(c - a)).norm()
}

/// Surface points with their face normals (parallel arrays).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OrientedSampleSet {
    pub points: Vec<Vec3>,
    pub normals: Vec<UnitVec3>,
}

impl OrientedSampleSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn transformed(&self, pose: &RigidTransform) -> OrientedSampleSet {
        OrientedSampleSet {
            points: self.points.iter().map(|p| pose.apply(p)).collect(),
            normals: self
                .normals
                .iter()
                .map(|n| UnitVec3::new_unchecked(pose.rotation * n.into_inner()))
                .collect(),
        }
    }
}

/// Cumulative triangle areas, used to draw triangles proportionally to area.
pub(crate) struct AreaTable {
    cumulative: Vec<f64>,
}

impl AreaTable {
    pub(crate) fn new(mesh: &TriangleMesh) -> Self {
        let mut acc = 0.0;
        let cumulative = (0..mesh.triangles().len())
            .map(|i| {
                acc += mesh.area(i);
                acc
            })
            .collect();
        Self { cumulative }
    }

    pub(crate) fn total(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    pub(crate) fn pick<R: Rng>(&self, rng: &mut R) -> usize {
        let u = rng.random::<f64>() * self.total();
        self.cumulative
            .partition_point(|&c| c <= u)
            .min(self.cumulative.len() - 1)
    }
}

/// Uniform point on triangle `tri` via the square-root barycentric map.
pub(crate) fn point_on_triangle<R: Rng>(mesh: &TriangleMesh, tri: usize, rng: &mut R) -> Vec3 {
    let [a, b, c] = mesh.corners(tri);
    let r1 = rng.random::<f64>().sqrt();
    let r2 = rng.random::<f64>();
    a * (1.0 - r1) + b * (r1 * (1.0 - r2)) + c * (r1 * r2)
}

pub fn sample_mesh_with_normals(mesh: &TriangleMesh, count: usize, seed: u64) -> Result<OrientedSampleSet> {
    if mesh.is_empty() {
        return Err(Error::UnusableModel("mesh has no non-degenerate triangles".into()));
    }
    if count == 0 {
        return Err(Error::invalid("sample count must be positive"));
    }
    let table = AreaTable::new(mesh);
    let mut rng = seeded(seed);
    let mut out = OrientedSampleSet {
        points: Vec::with_capacity(count),
        normals: Vec::with_capacity(count),
    };
    for _ in 0..count {
        let tri = table.pick(&mut rng);
        out.points.push(point_on_triangle(mesh, tri, &mut rng));
        out.normals.push(mesh.face_normal(tri));
    }
    Ok(out)
}
