//! Correspondence search and per-pair filtering: matching, relaxation,
//! trimming and Huber reweighting.

use crate::error::{Error, Result};
use crate::geometry::{UnitVec3, Vec3};
use crate::mesh::OrientedSampleSet;
use crate::spatial::KdTree;

/// Minimum scene size accepted by registration.
pub const MIN_SCENE_POINTS: usize = 6;
/// Below this many pairs the matcher is re-run with relaxed gates.
pub const RELAX_BELOW: usize = 6;
/// Fewest pairs a rigid solve is attempted with.
pub const MIN_PAIRS: usize = 3;

/// Scene points with optional per-point unit normals.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SceneCloud {
    pub points: Vec<Vec3>,
    pub normals: Option<Vec<UnitVec3>>,
}

impl SceneCloud {
    pub fn new(points: Vec<Vec3>) -> Self {
        Self { points, normals: None }
    }

    pub fn with_normals(points: Vec<Vec3>, normals: Vec<UnitVec3>) -> Result<Self> {
        if points.len() != normals.len() {
            return Err(Error::invalid("scene points and normals differ in length"));
        }
        Ok(Self { points, normals: Some(normals) })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

impl From<Vec<Vec3>> for SceneCloud {
    fn from(points: Vec<Vec3>) -> Self {
        SceneCloud::new(points)
    }
}

/// A scene cloud with its spatial index.
#[derive(Debug, Clone)]
pub struct IndexedScene {
    pub cloud: SceneCloud,
    pub tree: KdTree,
}

impl IndexedScene {
    pub fn new(cloud: SceneCloud) -> Result<Self> {
        if cloud.len() < MIN_SCENE_POINTS {
            return Err(Error::InsufficientScene { got: cloud.len(), need: MIN_SCENE_POINTS });
        }
        let tree = KdTree::new(&cloud.points);
        Ok(Self { cloud, tree })
    }
}

/// Matched model/scene pairs with robust weights (parallel arrays).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PairSet {
    pub model_points: Vec<Vec3>,
    pub scene_points: Vec<Vec3>,
    pub model_normals: Vec<UnitVec3>,
    pub weights: Vec<f64>,
}

impl PairSet {
    pub fn len(&self) -> usize {
        self.model_points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.model_points.is_empty()
    }

    pub fn push(&mut self, model: Vec3, scene: Vec3, normal: UnitVec3, weight: f64) {
        self.model_points.push(model);
        self.scene_points.push(scene);
        self.model_normals.push(normal);
        self.weights.push(weight);
    }

    pub fn residual(&self, i: usize) -> f64 {
        (self.scene_points[i] - self.model_points[i]).norm()
    }

    pub fn residuals(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.residual(i)).collect()
    }

    fn select(&self, keep: &[usize]) -> PairSet {
        let mut out = PairSet::default();
        for &i in keep {
            out.push(self.model_points[i], self.scene_points[i], self.model_normals[i], self.weights[i]);
        }
        out
    }
}

/// Gating thresholds for one matching pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchGate {
    /// meters
    pub max_pair_distance: f64,
    /// degrees; `None` disables normal gating
    pub normal_gate: Option<f64>,
    /// Reject scene points lying more than `180° − gate` from the model
    /// normal, as seen from the model point.
    pub behind_surface: bool,
    /// Residuals at or below this are never rejected by the behind-surface test.
    pub huber_delta: f64,
}

fn angle_deg(a: &Vec3, b: &Vec3) -> f64 {
    a.dot(b).clamp(-1.0, 1.0).acos().to_degrees()
}

/// Nearest-scene-point matching for every world-frame model sample.
///
/// A pair survives when its distance is within `max_pair_distance` and the
/// normal gate passes. The gate rejects a pair when the direction from model
/// point to scene point lies more than `180° − gate` from the model normal
/// (the scene point sits behind the surface) and the residual exceeds
/// `huber_delta`, or when a scene normal is available and deviates from the
/// model normal by more than `gate`.
pub fn match_pairs(model: &OrientedSampleSet, scene: &IndexedScene, gate: &MatchGate) -> Result<PairSet> {
    if scene.cloud.len() < MIN_SCENE_POINTS {
        return Err(Error::InsufficientScene { got: scene.cloud.len(), need: MIN_SCENE_POINTS });
    }
    let mut pairs = PairSet::default();
    for (p, n) in model.points.iter().zip(&model.normals) {
        let nn = scene.tree.nearest(p).expect("scene is non-empty");
        let d = nn.dist();
        if d > gate.max_pair_distance {
            continue;
        }
        let q = scene.cloud.points[nn.index];
        if let Some(g) = gate.normal_gate {
            if gate.behind_surface && d > gate.huber_delta && angle_deg(n, &((q - p) / d)) > 180.0 - g {
                continue;
            }
            if let Some(sn) = &scene.cloud.normals {
                if angle_deg(n, &sn[nn.index]) > g {
                    continue;
                }
            }
        }
        pairs.push(*p, q, *n, 1.0);
    }
    Ok(pairs)
}

/// Re-matches with doubled distance and no normal gate when fewer than six
/// pairs survived.
pub fn relax_if_few(
    pairs: PairSet,
    scene: &IndexedScene,
    model_world: &OrientedSampleSet,
    gate: &MatchGate,
) -> Result<PairSet> {
    if pairs.len() >= RELAX_BELOW {
        return Ok(pairs);
    }
    let relaxed = MatchGate {
        max_pair_distance: 2.0 * gate.max_pair_distance,
        normal_gate: None,
        behind_surface: false,
        huber_delta: gate.huber_delta,
    };
    let out = match_pairs(model_world, scene, &relaxed)?;
    if out.len() < MIN_PAIRS {
        return Err(Error::Infeasible(format!(
            "only {} pairs after relaxing to {:.3} m",
            out.len(),
            relaxed.max_pair_distance
        )));
    }
    Ok(out)
}

/// Drops the `ceil(fraction·n)` largest-residual pairs, keeping at least three.
/// The result is ordered by ascending residual (stable on ties).
pub fn trim_pairs(pairs: &PairSet, fraction: f64) -> PairSet {
    let n = pairs.len();
    let residuals = pairs.residuals();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| residuals[a].total_cmp(&residuals[b]).then(a.cmp(&b)));
    let drop = (fraction * n as f64).ceil() as usize;
    let keep = n.saturating_sub(drop).max(MIN_PAIRS.min(n));
    pairs.select(&order[..keep])
}

/// Huber IRLS weights: 1 up to `delta`, `delta / r` beyond.
pub fn robust_weights(pairs: &PairSet, delta: f64) -> PairSet {
    let mut out = pairs.clone();
    for (i, w) in out.weights.iter_mut().enumerate() {
        let r = pairs.residual(i);
        *w = if r <= delta { 1.0 } else { delta / r };
    }
    out
}
