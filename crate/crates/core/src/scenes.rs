//! Synthetic construction-site scenes: primitive object meshes, partial views
//! rendered from a viewpoint, slab occlusion and perturbed initial poses.

use std::f64::consts::{PI, TAU};
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{world_up, RigidTransform, Rotation, UnitVec3, Vec3};
use crate::mesh::{sample_mesh_with_normals, OrientedSampleSet, TriangleMesh};
use crate::registration::SceneCloud;
use crate::rng::{derive_seed, seeded};

const SEGMENTS: usize = 64;
const TUBE_SEGMENTS: usize = 12;

/// Object geometry in meters. All shapes stand on z = 0 centered on the
/// z axis, with +z up.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Shape {
    Crate { size: [f64; 3] },
    Cone { radius: f64, height: f64 },
    Barrel { radius: f64, height: f64 },
    Tripod { height: f64, spread: f64, leg_radius: f64 },
    Pallet { length: f64, width: f64, height: f64 },
    Scaffold { width: f64, depth: f64, height: f64, tube: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct PrimitiveSpec {
    pub label: String,
    pub shape: Shape,
}

impl PrimitiveSpec {
    pub fn new(label: &str, shape: Shape) -> Self {
        Self { label: label.to_string(), shape }
    }

    pub fn validate(&self) -> Result<()> {
        let dims: Vec<f64> = match &self.shape {
            Shape::Crate { size } => size.to_vec(),
            Shape::Cone { radius, height } | Shape::Barrel { radius, height } => vec![*radius, *height],
            Shape::Tripod { height, spread, leg_radius } => vec![*height, *spread, *leg_radius],
            Shape::Pallet { length, width, height } => vec![*length, *width, *height],
            Shape::Scaffold { width, depth, height, tube } => vec![*width, *depth, *height, *tube],
        };
        if dims.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(Error::invalid(format!("'{}' has a non-positive dimension", self.label)));
        }
        Ok(())
    }
}

/// Orients every triangle of a convex part so its normal points away from
/// `inside`.
fn convex_part(vertices: Vec<Vec3>, mut triangles: Vec<[usize; 3]>, inside: Vec3) -> TriangleMesh {
    for t in &mut triangles {
        let [a, b, c] = [vertices[t[0]], vertices[t[1]], vertices[t[2]]];
        let n = (b - a).cross(&(c - a));
        if n.dot(&((a + b + c) / 3.0 - inside)) < 0.0 {
            t.swap(1, 2);
        }
    }
    TriangleMesh::new(vertices, triangles).expect("primitive construction yields valid indices")
}

fn box_mesh(min: Vec3, max: Vec3) -> TriangleMesh {
    let v: Vec<Vec3> = (0..8)
        .map(|i| {
            Vec3::new(
                if i & 1 == 0 { min.x } else { max.x },
                if i & 2 == 0 { min.y } else { max.y },
                if i & 4 == 0 { min.z } else { max.z },
            )
        })
        .collect();
    let quads = [[0, 2, 6, 4], [1, 3, 7, 5], [0, 1, 5, 4], [2, 3, 7, 6], [0, 1, 3, 2], [4, 5, 7, 6]];
    let tris = quads.iter().flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]]).collect();
    convex_part(v, tris, (min + max) / 2.0)
}

fn ring(radius: f64, z: f64, segments: usize) -> impl Iterator<Item = Vec3> {
    (0..segments).map(move |i| {
        let a = TAU * i as f64 / segments as f64;
        Vec3::new(radius * a.cos(), radius * a.sin(), z)
    })
}

fn cone_mesh(radius: f64, height: f64) -> TriangleMesh {
    let n = SEGMENTS;
    let mut v: Vec<Vec3> = ring(radius, 0.0, n).collect();
    v.push(Vec3::new(0.0, 0.0, height));
    v.push(Vec3::zeros());
    let (apex, base) = (n, n + 1);
    let tris = (0..n).flat_map(|i| [[apex, i, (i + 1) % n], [base, (i + 1) % n, i]]).collect();
    convex_part(v, tris, Vec3::new(0.0, 0.0, height / 4.0))
}

fn cylinder_mesh(radius: f64, height: f64, segments: usize) -> TriangleMesh {
    let n = segments;
    let mut v: Vec<Vec3> = ring(radius, 0.0, n).chain(ring(radius, height, n)).collect();
    v.push(Vec3::zeros());
    v.push(Vec3::new(0.0, 0.0, height));
    let (bottom, top) = (2 * n, 2 * n + 1);
    let tris = (0..n)
        .flat_map(|i| {
            let j = (i + 1) % n;
            [[i, j, n + j], [i, n + j, n + i], [bottom, j, i], [top, n + i, n + j]]
        })
        .collect();
    convex_part(v, tris, Vec3::new(0.0, 0.0, height / 2.0))
}

/// Closed tube of radius `r` from `a` to `b`.
fn tube(a: Vec3, b: Vec3, r: f64) -> TriangleMesh {
    let axis = b - a;
    let rot = Rotation::rotation_between(&Vec3::z(), &axis)
        .unwrap_or_else(|| Rotation::from_axis_angle(&Vec3::x_axis(), PI));
    cylinder_mesh(r, axis.norm(), TUBE_SEGMENTS).transformed(&RigidTransform::new(rot, a))
}

fn merged(parts: impl IntoIterator<Item = TriangleMesh>) -> TriangleMesh {
    let mut out = TriangleMesh::new(Vec::new(), Vec::new()).expect("empty mesh is valid");
    for p in parts {
        out.merge(&p);
    }
    out
}

pub fn make_primitive(spec: &PrimitiveSpec) -> Result<TriangleMesh> {
    spec.validate()?;
    Ok(match spec.shape {
        Shape::Crate { size: [x, y, z] } => box_mesh(Vec3::new(-x / 2.0, -y / 2.0, 0.0), Vec3::new(x / 2.0, y / 2.0, z)),
        Shape::Cone { radius, height } => cone_mesh(radius, height),
        Shape::Barrel { radius, height } => cylinder_mesh(radius, height, SEGMENTS),
        Shape::Tripod { height, spread, leg_radius } => {
            let head = 0.06_f64.min(height / 4.0);
            let top = Vec3::new(0.0, 0.0, height - head);
            let legs = (0..3).map(|k| {
                let a = PI / 2.0 + TAU * k as f64 / 3.0;
                tube(Vec3::new(spread * a.cos(), spread * a.sin(), 0.0), top, leg_radius)
            });
            let apex = box_mesh(top - Vec3::new(head, head, 0.0) / 2.0 - Vec3::z() * (head / 2.0), top + Vec3::new(head / 2.0, head / 2.0, head));
            merged(legs.chain(std::iter::once(apex)))
        }
        Shape::Pallet { length, width, height } => {
            let t = (height * 0.15).min(0.025);
            let (hl, hw) = (length / 2.0, width / 2.0);
            let slat_w = width / 9.0;
            let slats = (0..5).map(|k| {
                let y = -hw + slat_w / 2.0 + k as f64 * (width - slat_w) / 4.0;
                box_mesh(Vec3::new(-hl, y - slat_w / 2.0, height - t), Vec3::new(hl, y + slat_w / 2.0, height))
            });
            let stringer_w = width / 10.0;
            let stringers = (0..3).map(|k| {
                let y = -hw + stringer_w / 2.0 + k as f64 * (width - stringer_w) / 2.0;
                box_mesh(Vec3::new(-hl, y - stringer_w / 2.0, t), Vec3::new(hl, y + stringer_w / 2.0, height - t))
            });
            let bottoms = (0..3).map(|k| {
                let x = -hl + slat_w / 2.0 + k as f64 * (length - slat_w) / 2.0;
                box_mesh(Vec3::new(x - slat_w / 2.0, -hw, 0.0), Vec3::new(x + slat_w / 2.0, hw, t))
            });
            merged(slats.chain(stringers).chain(bottoms))
        }
        Shape::Scaffold { width, depth, height, tube: s } => {
            let (hx, hy) = (width / 2.0, depth / 2.0);
            let mut parts = Vec::new();
            for (x, y) in [(-hx, -hy), (hx, -hy), (hx, hy), (-hx, hy)] {
                parts.push(box_mesh(Vec3::new(x - s / 2.0, y - s / 2.0, 0.0), Vec3::new(x + s / 2.0, y + s / 2.0, height)));
            }
            for z in [0.15 * height, 0.55 * height, height - s] {
                for y in [-hy, hy] {
                    parts.push(box_mesh(Vec3::new(-hx, y - s / 2.0, z), Vec3::new(hx, y + s / 2.0, z + s)));
                }
                for x in [-hx, hx] {
                    parts.push(box_mesh(Vec3::new(x - s / 2.0, -hy, z), Vec3::new(x + s / 2.0, hy, z + s)));
                }
            }
            // Working deck at mid height.
            let z = 0.55 * height + s;
            parts.push(box_mesh(Vec3::new(-hx, -hy, z), Vec3::new(hx, hy, z + 0.03)));
            merged(parts)
        }
    })
}

/// Area-weighted surface centroid.
pub fn surface_centroid(mesh: &TriangleMesh) -> Vec3 {
    let mut acc = Vec3::zeros();
    let mut total = 0.0;
    for t in 0..mesh.triangles().len() {
        let [a, b, c] = mesh.corners(t);
        let w = mesh.area(t);
        acc += (a + b + c) / 3.0 * w;
        total += w;
    }
    if total > 0.0 {
        acc / total
    } else {
        Vec3::zeros()
    }
}

/// Samples the posed mesh surface at `density` points/m², keeps the points
/// whose face normal faces `viewpoint`, then adds isotropic Gaussian noise.
pub fn render_partial_view(
    mesh: &TriangleMesh,
    pose: &RigidTransform,
    viewpoint: &Vec3,
    density: f64,
    noise_sigma: f64,
    seed: u64,
) -> Result<OrientedSampleSet> {
    if !(density > 0.0 && density.is_finite()) || !(noise_sigma >= 0.0) {
        return Err(Error::invalid("density must be positive and noise non-negative"));
    }
    let count = (density * mesh.surface_area()).round().max(1.0) as usize;
    let all = sample_mesh_with_normals(mesh, count, derive_seed(seed, 1))?.transformed(pose);
    let noise = Normal::new(0.0, noise_sigma).map_err(|e| Error::invalid(e.to_string()))?;
    let mut rng = seeded(derive_seed(seed, 2));
    let mut out = OrientedSampleSet { points: Vec::new(), normals: Vec::new() };
    for (p, n) in all.points.iter().zip(&all.normals) {
        if n.dot(&(viewpoint - p)) > 0.0 {
            let jitter = if noise_sigma > 0.0 {
                Vec3::new(noise.sample(&mut rng), noise.sample(&mut rng), noise.sample(&mut rng))
            } else {
                Vec3::zeros()
            };
            out.points.push(p + jitter);
            out.normals.push(*n);
        }
    }
    Ok(out)
}

fn random_horizontal_axis<R: Rng>(rng: &mut R, gravity: &UnitVec3) -> UnitVec3 {
    let phi = rng.random_range(0.0..TAU);
    let seed_dir = if gravity.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let e1 = gravity.cross(&seed_dir).normalize();
    let e2 = gravity.cross(&e1);
    UnitVec3::new_normalize(e1 * phi.cos() + e2 * phi.sin())
}

fn random_direction<R: Rng>(rng: &mut R) -> Vec3 {
    let z: f64 = rng.random_range(-1.0..=1.0);
    let phi = rng.random_range(0.0..TAU);
    let r = (1.0 - z * z).max(0.0).sqrt();
    Vec3::new(r * phi.cos(), r * phi.sin(), z)
}

/// `truth` rotated by `tilt_deg` about a random horizontal axis and
/// `yaw_deg` about gravity (both through `pivot`), then shifted by a random
/// vector of length `translation`.
pub fn perturb_pose_about(
    truth: &RigidTransform,
    pivot: &Vec3,
    tilt_deg: f64,
    yaw_deg: f64,
    translation: f64,
    seed: u64,
) -> RigidTransform {
    let up = world_up();
    let mut rng = seeded(seed);
    let axis = random_horizontal_axis(&mut rng, &up);
    let dir = random_direction(&mut rng);
    let rot = Rotation::from_axis_angle(&axis, tilt_deg.to_radians()) * Rotation::from_axis_angle(&up, yaw_deg.to_radians());
    let about = RigidTransform::new(rot, pivot - rot * pivot + dir * translation);
    about.compose(truth)
}

/// [`perturb_pose_about`] pivoting on the pose origin.
pub fn perturb_pose(truth: &RigidTransform, tilt_deg: f64, yaw_deg: f64, translation: f64, seed: u64) -> RigidTransform {
    perturb_pose_about(truth, &truth.translation, tilt_deg, yaw_deg, translation, seed)
}

/// How initial poses deviate from the truth. Yaw is drawn uniformly from
/// `±yaw_deg`; tilt and translation magnitude are exact.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Perturbation {
    pub tilt_deg: f64,
    pub yaw_deg: f64,
    pub translation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SceneObject {
    pub primitive: PrimitiveSpec,
    pub truth: RigidTransform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    pub objects: Vec<SceneObject>,
    pub viewpoint: Vec3,
    /// points/m² of surface before culling
    pub density: f64,
    pub noise_sigma: f64,
    pub occlusion_fraction: f64,
    pub perturbation: Perturbation,
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<()> {
        if self.objects.is_empty() {
            return Err(Error::invalid("scenario has no objects"));
        }
        if !(0.0..1.0).contains(&self.occlusion_fraction) {
            return Err(Error::invalid("occlusionFraction must lie in [0, 1)"));
        }
        if !(self.density > 0.0) || !(self.noise_sigma >= 0.0) {
            return Err(Error::invalid("density must be positive and noiseSigma non-negative"));
        }
        self.objects.iter().try_for_each(|o| o.primitive.validate())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_perturbation(mut self, p: Perturbation) -> Self {
        self.perturbation = p;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ObjectInstance {
    pub label: String,
    pub primitive: PrimitiveSpec,
    pub truth: RigidTransform,
    pub initial: RigidTransform,
    /// Half-open index range of this object's points in the scene cloud.
    pub points: [usize; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedScene {
    pub spec: ScenarioSpec,
    pub cloud: SceneCloud,
    pub objects: Vec<ObjectInstance>,
}

impl GeneratedScene {
    /// The scene points attributed to object `i`, with normals.
    pub fn segment(&self, i: usize) -> SceneCloud {
        let [a, b] = self.objects[i].points;
        SceneCloud {
            points: self.cloud.points[a..b].to_vec(),
            normals: self.cloud.normals.as_ref().map(|n| n[a..b].to_vec()),
        }
    }
}

/// Indices of points outside a slab `|d·p − c| ≤ w/2` whose width is bisected
/// so that about `fraction` of the points fall inside it.
fn slab_keep(points: &[Vec3], fraction: f64, seed: u64) -> Vec<bool> {
    if fraction <= 0.0 || points.is_empty() {
        return vec![true; points.len()];
    }
    let mut rng = seeded(seed);
    let d = random_direction(&mut rng);
    let proj: Vec<f64> = points.iter().map(|p| d.dot(p)).collect();
    let center = proj[rng.random_range(0..proj.len())];
    let span = proj.iter().fold(0.0_f64, |m, v| m.max((v - center).abs()));
    let removed = |w: f64| proj.iter().filter(|v| (*v - center).abs() <= w / 2.0).count() as f64 / proj.len() as f64;
    let (mut lo, mut hi) = (0.0, 2.0 * span + 1e-9);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if removed(mid) < fraction {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // Pick whichever bracket lands closer to the target.
    let w = if (removed(lo) - fraction).abs() <= (removed(hi) - fraction).abs() { lo } else { hi };
    proj.iter().map(|v| (v - center).abs() > w / 2.0).collect()
}

/// Renders every object from the viewpoint, occludes each object's points
/// with its own seeded slab, and draws perturbed initial poses pivoting on
/// each object's surface centroid.
pub fn generate_scenario(spec: &ScenarioSpec) -> Result<GeneratedScene> {
    spec.validate()?;
    let mut points = Vec::new();
    let mut normals = Vec::new();
    let mut objects = Vec::new();
    for (i, obj) in spec.objects.iter().enumerate() {
        let k = i as u64;
        let mesh = make_primitive(&obj.primitive)?;
        let view = render_partial_view(
            &mesh,
            &obj.truth,
            &spec.viewpoint,
            spec.density,
            spec.noise_sigma,
            derive_seed(spec.seed, 100 + k),
        )?;
        let keep = slab_keep(&view.points, spec.occlusion_fraction, derive_seed(spec.seed, 200 + k));
        let start = points.len();
        for ((p, n), k) in view.points.iter().zip(&view.normals).zip(&keep) {
            if *k {
                points.push(*p);
                normals.push(*n);
            }
        }
        let mut rng = seeded(derive_seed(spec.seed, 300 + k));
        let pert = spec.perturbation;
        let yaw = if pert.yaw_deg > 0.0 { rng.random_range(-pert.yaw_deg..=pert.yaw_deg) } else { 0.0 };
        let pivot = obj.truth.apply(&surface_centroid(&mesh));
        let initial = perturb_pose_about(&obj.truth, &pivot, pert.tilt_deg, yaw, pert.translation, rng.random());
        objects.push(ObjectInstance {
            label: obj.primitive.label.clone(),
            primitive: obj.primitive.clone(),
            truth: obj.truth,
            initial,
            points: [start, points.len()],
        });
    }
    if points.is_empty() {
        return Err(Error::invalid("scenario produced an empty scene cloud"));
    }
    Ok(GeneratedScene { spec: spec.clone(), cloud: SceneCloud { points, normals: Some(normals) }, objects })
}

pub const PRESET_NAMES: &[&str] = &["scenario1", "scenario2", "scenario3", "scenario4", "scenario2-mild", "flip"];

fn placed(label: &str, shape: Shape, x: f64, y: f64, yaw_deg: f64) -> SceneObject {
    SceneObject {
        primitive: PrimitiveSpec::new(label, shape),
        truth: RigidTransform::new(crate::geometry::yaw(yaw_deg), Vec3::new(x, y, 0.0)),
    }
}

fn site_objects() -> Vec<SceneObject> {
    vec![
        placed("wooden crate", Shape::Crate { size: [0.6, 0.4, 0.45] }, 0.0, 0.0, 20.0),
        placed("traffic cone", Shape::Cone { radius: 0.2, height: 0.7 }, 1.3, 0.4, 0.0),
        placed("steel barrel", Shape::Barrel { radius: 0.29, height: 0.88 }, -1.1, 0.7, 0.0),
        placed("wooden pallet", Shape::Pallet { length: 1.2, width: 0.8, height: 0.144 }, 0.3, -1.4, -15.0),
    ]
}

fn family_mix() -> Vec<SceneObject> {
    vec![
        placed("camera tripod", Shape::Tripod { height: 1.1, spread: 0.4, leg_radius: 0.015 }, 0.0, 0.0, 10.0),
        placed("wooden pallet", Shape::Pallet { length: 1.2, width: 0.8, height: 0.144 }, 1.4, 0.3, 30.0),
        placed(
            "scaffolding",
            Shape::Scaffold { width: 1.0, depth: 0.6, height: 1.6, tube: 0.04 },
            -1.4,
            0.5,
            -10.0,
        ),
    ]
}

/// Built-in scenarios. `seed` drives sampling, noise, occlusion and the
/// initial-pose draw.
pub fn preset(name: &str, seed: u64) -> Result<ScenarioSpec> {
    let tilted = Perturbation { tilt_deg: 150.0, yaw_deg: 30.0, translation: 0.05 };
    let base = |name: &str, objects, viewpoint: Vec3, perturbation| ScenarioSpec {
        name: name.to_string(),
        objects,
        viewpoint,
        density: 3000.0,
        noise_sigma: 0.003,
        occlusion_fraction: 0.25,
        perturbation,
        seed,
    };
    Ok(match name {
        "scenario1" => base(name, site_objects(), Vec3::new(4.0, -3.0, 2.0), tilted),
        "scenario2" => base(name, site_objects(), Vec3::new(-3.5, -3.0, 1.5), tilted),
        "scenario3" => base(name, site_objects(), Vec3::new(0.5, 4.0, 3.0), tilted),
        "scenario2-mild" => base(
            name,
            site_objects(),
            Vec3::new(-3.5, -3.0, 1.5),
            Perturbation { tilt_deg: 3.0, yaw_deg: 10.0, translation: 0.03 },
        ),
        "scenario4" => base(
            name,
            family_mix(),
            Vec3::new(3.0, -3.5, 1.8),
            Perturbation { tilt_deg: 20.0, yaw_deg: 20.0, translation: 0.05 },
        ),
        "flip" => ScenarioSpec {
            occlusion_fraction: 0.0,
            ..base(
                name,
                vec![
                    placed("camera tripod", Shape::Tripod { height: 1.1, spread: 0.4, leg_radius: 0.015 }, 0.0, 0.0, 0.0),
                    placed("traffic cone", Shape::Cone { radius: 0.2, height: 0.7 }, 1.5, 0.0, 0.0),
                ],
                Vec3::new(3.0, -3.0, 2.0),
                Perturbation { tilt_deg: 180.0, yaw_deg: 30.0, translation: 0.05 },
            )
        },
        other => {
            return Err(Error::invalid(format!("unknown preset '{other}'; available: {}", PRESET_NAMES.join(", "))))
        }
    })
}

/// Manifest written next to the cloud: the spec plus per-object poses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SceneManifest {
    pub spec: ScenarioSpec,
    pub cloud: String,
    pub objects: Vec<ObjectInstance>,
}

fn mesh_file_name(i: usize, label: &str) -> String {
    format!("mesh_{i:02}_{}.obj", label.replace(|c: char| !c.is_ascii_alphanumeric(), "_"))
}

/// Writes `cloud.ply`, `scene.json` and one OBJ per object into `dir`.
pub fn export_scene(scene: &GeneratedScene, dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let cloud_path = dir.join("cloud.ply");
    let normals: Option<Vec<Vec3>> = scene.cloud.normals.as_ref().map(|n| n.iter().map(|u| u.into_inner()).collect());
    crate::io::save_points(&cloud_path, &scene.cloud.points, normals.as_deref())?;
    written.push(cloud_path);
    for (i, obj) in scene.objects.iter().enumerate() {
        let path = dir.join(mesh_file_name(i, &obj.label));
        crate::io::save_mesh(&path, &make_primitive(&obj.primitive)?)?;
        written.push(path);
    }
    let manifest = SceneManifest { spec: scene.spec.clone(), cloud: "cloud.ply".into(), objects: scene.objects.clone() };
    let path = dir.join("scene.json");
    crate::io::write_file(&path, (serde_json::to_string_pretty(&manifest)? + "\n").as_bytes())?;
    written.push(path);
    Ok(written)
}

/// Reads a directory written by [`export_scene`].
pub fn load_scene(dir: &Path) -> Result<GeneratedScene> {
    let manifest: SceneManifest = serde_json::from_str(&std::fs::read_to_string(dir.join("scene.json"))?)?;
    let ply = crate::io::load_points(&dir.join(&manifest.cloud))?;
    let normals = ply.normals.map(|n| n.into_iter().map(UnitVec3::new_normalize).collect());
    let cloud = SceneCloud { points: ply.points, normals };
    if let Some(o) = manifest.objects.iter().find(|o| o.points[0] > o.points[1] || o.points[1] > cloud.len()) {
        return Err(Error::parse(format!("object '{}' indexes past the cloud", o.label)));
    }
    Ok(GeneratedScene { spec: manifest.spec, cloud, objects: manifest.objects })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::tilt_angle;

    fn unit_box() -> PrimitiveSpec {
        PrimitiveSpec::new("crate", Shape::Crate { size: [1.0, 1.0, 1.0] })
    }

    #[test]
    fn unit_box_construction() {
        let m = make_primitive(&unit_box()).unwrap();
        assert_eq!(m.triangles().len(), 12);
        assert_eq!(m.vertices().len(), 8);
        let (lo, hi) = m.bounds().unwrap();
        assert_eq!(hi - lo, Vec3::new(1.0, 1.0, 1.0));
        assert_eq!(lo.z, 0.0);
        assert!((m.surface_area() - 6.0).abs() < 1e-12);
        // Outward normals.
        for t in 0..12 {
            let [a, b, c] = m.corners(t);
            let centroid = (a + b + c) / 3.0 - Vec3::new(0.0, 0.0, 0.5);
            assert!(m.face_normal(t).dot(&centroid) > 0.0);
        }
    }

    #[test]
    fn cone_apex_height() {
        let m = make_primitive(&PrimitiveSpec::new("cone", Shape::Cone { radius: 0.2, height: 0.7 })).unwrap();
        let (lo, hi) = m.bounds().unwrap();
        assert_eq!(hi.z, 0.7);
        assert_eq!(lo.z, 0.0);
        assert!(m.vertices().contains(&Vec3::new(0.0, 0.0, 0.7)));
    }

    #[test]
    fn barrel_area_matches_closed_form() {
        let (r, h) = (0.29, 0.88);
        let m = make_primitive(&PrimitiveSpec::new("barrel", Shape::Barrel { radius: r, height: h })).unwrap();
        let exact = TAU * r * (r + h);
        assert!((m.surface_area() - exact).abs() / exact < 0.02);
    }

    #[test]
    fn all_shapes_build_upright() {
        for obj in site_objects().into_iter().chain(family_mix()) {
            let m = make_primitive(&obj.primitive).unwrap();
            let (lo, hi) = m.bounds().unwrap();
            // Slanted tripod legs dip below the floor by at most their radius.
            assert!(lo.z.abs() < 0.02 && hi.z > 0.1, "{}", obj.primitive.label);
            assert!(m.surface_area() > 0.0);
        }
        let bad = PrimitiveSpec::new("x", Shape::Cone { radius: 0.0, height: 1.0 });
        assert!(make_primitive(&bad).is_err());
    }

    #[test]
    fn culling_and_noise_free_views() {
        let m = make_primitive(&unit_box()).unwrap();
        let pose = RigidTransform::identity();
        let view = render_partial_view(&m, &pose, &Vec3::new(10.0, 0.3, 0.4), 4000.0, 0.0, 1).unwrap();
        assert!(!view.is_empty());
        // Only the +x face is visible: no point on the -x face, all on x = 0.5.
        assert!(view.points.iter().all(|p| (p.x - 0.5).abs() < 1e-9));
        assert!(view.normals.iter().all(|n| n.x > 0.99));
    }

    #[test]
    fn density_proportionality() {
        let m = make_primitive(&unit_box()).unwrap();
        let vp = Vec3::new(3.0, 2.0, 4.0);
        let a = render_partial_view(&m, &RigidTransform::identity(), &vp, 500.0, 0.0, 3).unwrap().len() as f64;
        let b = render_partial_view(&m, &RigidTransform::identity(), &vp, 1000.0, 0.0, 3).unwrap().len() as f64;
        assert!((b / a - 2.0).abs() < 0.2, "{a} {b}");
    }

    #[test]
    fn perturbation_examples() {
        let truth = RigidTransform::new(crate::geometry::yaw(30.0), Vec3::new(1.0, 2.0, 0.0));
        assert_eq!(perturb_pose(&truth, 0.0, 0.0, 0.0, 5), truth);
        let up = world_up();
        for seed in 0..20 {
            let flipped = perturb_pose(&truth, 180.0, 0.0, 0.0, seed);
            assert!((tilt_angle(&flipped.rotation, &up, &up) - 180.0).abs() < 1e-6);
            let moved = perturb_pose(&truth, 0.0, 0.0, 0.1, seed);
            assert!(((moved.translation - truth.translation).norm() - 0.1).abs() < 1e-9);
            let tilted = perturb_pose(&truth, 35.0, 50.0, 0.0, seed);
            assert!((tilt_angle(&tilted.rotation, &up, &up) - 35.0).abs() < 1e-9);
        }
    }

    fn point_to_surface(m: &TriangleMesh, p: &Vec3) -> f64 {
        (0..m.triangles().len())
            .map(|t| {
                let [a, b, c] = m.corners(t);
                crate::evaluation::point_triangle_distance(p, &a, &b, &c)
            })
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn noise_free_scene_points_on_surfaces() {
        let spec = ScenarioSpec {
            noise_sigma: 0.0,
            occlusion_fraction: 0.0,
            density: 400.0,
            ..preset("scenario1", 2).unwrap()
        };
        let scene = generate_scenario(&spec).unwrap();
        for (i, obj) in scene.objects.iter().enumerate() {
            let m = make_primitive(&obj.primitive).unwrap().transformed(&obj.truth);
            for p in &scene.segment(i).points {
                assert!(point_to_surface(&m, p) < 1e-9);
            }
        }
    }

    #[test]
    fn presets_have_enough_points_and_are_deterministic() {
        for name in PRESET_NAMES {
            let spec = preset(name, 7).unwrap();
            let a = generate_scenario(&spec).unwrap();
            assert!(a.objects.iter().all(|o| o.points[1] - o.points[0] >= 6), "{name}");
            let b = generate_scenario(&spec).unwrap();
            assert_eq!(a, b);
        }
        let err = preset("scenario9", 0).unwrap_err().to_string();
        assert!(err.contains("scenario1") && err.contains("flip"));
    }

    #[test]
    fn occlusion_hits_target_fraction() {
        for seed in 0..10 {
            let base = ScenarioSpec { occlusion_fraction: 0.0, ..preset("scenario2", seed).unwrap() };
            let full = generate_scenario(&base).unwrap();
            for f in [0.1, 0.3, 0.5] {
                let occ = generate_scenario(&ScenarioSpec { occlusion_fraction: f, ..base.clone() }).unwrap();
                for (a, b) in full.objects.iter().zip(&occ.objects) {
                    let n0 = (a.points[1] - a.points[0]) as f64;
                    let n1 = (b.points[1] - b.points[0]) as f64;
                    let removed = 1.0 - n1 / n0;
                    assert!((removed - f).abs() <= 0.15, "seed {seed} f {f}: {removed}");
                }
            }
        }
    }

    #[test]
    fn scenario4_contains_family_mix() {
        let labels: Vec<String> = preset("scenario4", 0).unwrap().objects.iter().map(|o| o.primitive.label.clone()).collect();
        for want in ["tripod", "pallet", "scaffold"] {
            assert!(labels.iter().any(|l| l.contains(want)), "{labels:?}");
        }
    }

    #[test]
    fn export_and_reload() {
        let scene = generate_scenario(&preset("flip", 1).unwrap()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let files = export_scene(&scene, dir.path()).unwrap();
        assert_eq!(files.len(), 2 + scene.objects.len());
        let back = load_scene(dir.path()).unwrap();
        assert_eq!(back.objects, scene.objects);
        assert_eq!(back.cloud.len(), scene.cloud.len());
        for (a, b) in back.cloud.points.iter().zip(&scene.cloud.points) {
            assert!((a - b).norm() < 1e-5);
        }
    }
}
