use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{world_up, UnitVec3, Vec3};

/// Tuning knobs for one registration run. Field defaults are the values used
/// throughout the scenario presets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "camelCase", deny_unknown_fields)]
pub struct IcpParams {
    pub sample_count: usize,
    pub max_iterations: usize,
    /// meters
    pub max_pair_distance: f64,
    /// degrees
    pub normal_gate: f64,
    pub trim_fraction: f64,
    /// meters
    pub huber_delta: f64,
    /// degrees
    pub eps_rot: f64,
    /// meters
    pub eps_trans: f64,
    pub restarts: usize,
    /// degrees
    pub yaw_jitter_deg: f64,
    pub gravity_weight_initial: f64,
    pub gravity_scaling: GravityScaling,
    /// Also reject pairs whose scene point lies behind the model surface
    /// (beyond `huber_delta`). Off by default: it discards the true matches
    /// of any face displaced outward along its normal.
    pub behind_surface_gate: bool,
    pub seed: u64,
}

impl Default for IcpParams {
    fn default() -> Self {
        Self {
            sample_count: 600,
            max_iterations: 60,
            max_pair_distance: 0.25,
            normal_gate: 60.0,
            trim_fraction: 0.2,
            huber_delta: 0.02,
            eps_rot: 0.05,
            eps_trans: 0.0005,
            restarts: 8,
            yaw_jitter_deg: 45.0,
            gravity_weight_initial: 1.0,
            gravity_scaling: GravityScaling::default(),
            behind_surface_gate: false,
            seed: 0,
        }
    }
}

impl IcpParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("maxPairDistance", self.max_pair_distance),
            ("huberDelta", self.huber_delta),
            ("epsRot", self.eps_rot),
            ("epsTrans", self.eps_trans),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::invalid(format!("{name} must be positive")));
        }
        if self.sample_count == 0 || self.max_iterations == 0 || self.restarts == 0 {
            return Err(Error::invalid("sampleCount, maxIterations and restarts must be positive"));
        }
        if !(0.0..1.0).contains(&self.trim_fraction) {
            return Err(Error::invalid("trimFraction must lie in [0, 1)"));
        }
        if !(0.0..=180.0).contains(&self.normal_gate) {
            return Err(Error::invalid("normalGate must lie in [0, 180] degrees"));
        }
        if !(self.yaw_jitter_deg >= 0.0) || !(self.gravity_weight_initial >= 0.0) {
            return Err(Error::invalid("yawJitterDeg and gravityWeightInitial must be non-negative"));
        }
        Ok(())
    }
}

/// How the gravity pseudo-correspondence is weighted against the data pairs
/// in the rotation solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum GravityScaling {
    /// `γ · Σ wᵢ‖xᵢ − x̄‖‖bᵢ − b̄‖`: the prior is measured against the
    /// total second moment of the matched data, so `γ = 1` is on par with
    /// the whole data term.
    #[default]
    DataMoment,
    /// `γ · mean(wᵢ)`: the gravity pair counts like a single data pair.
    MeanWeight,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum BiasMode {
    /// Gravity enters the rotation solve as a weighted direction pair.
    #[default]
    Penalty,
    /// Penalty solve followed by a rotation toward upright by a fraction β of
    /// the remaining tilt.
    Corrective,
}

/// Upright prior for one body.
///
/// Convention: `gravity_world` is the world *up* direction (`+z`), and
/// `upright_model` is the body's canonical up in model coordinates. The prior
/// pulls `R·upright_model` toward `gravity_world`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GravityPrior {
    #[serde(with = "unit_serde")]
    pub gravity_world: UnitVec3,
    #[serde(with = "unit_serde")]
    pub upright_model: UnitVec3,
    /// β ∈ [0, 1]: fraction of tilt removed per iteration in corrective mode.
    pub upright_bias: f64,
    /// γ_new ≥ 0: weight of the gravity term.
    pub effective_weight: f64,
    #[serde(default)]
    pub yaw_only: bool,
    #[serde(default)]
    pub mode: BiasMode,
}

impl GravityPrior {
    pub fn new(upright_bias: f64, effective_weight: f64) -> Result<Self> {
        let p = Self {
            gravity_world: world_up(),
            upright_model: world_up(),
            upright_bias,
            effective_weight,
            yaw_only: false,
            mode: BiasMode::Penalty,
        };
        p.validate()?;
        Ok(p)
    }

    /// A prior that exerts no influence (γ = 0, β = 0).
    pub fn neutral() -> Self {
        Self {
            gravity_world: world_up(),
            upright_model: world_up(),
            upright_bias: 0.0,
            effective_weight: 0.0,
            yaw_only: false,
            mode: BiasMode::Penalty,
        }
    }

    pub fn with_mode(mut self, mode: BiasMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_yaw_only(mut self, yaw_only: bool) -> Self {
        self.yaw_only = yaw_only;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.upright_bias) {
            return Err(Error::invalid("uprightBias must lie in [0, 1]"));
        }
        if !(self.effective_weight >= 0.0 && self.effective_weight.is_finite()) {
            return Err(Error::invalid("effectiveWeight must be finite and non-negative"));
        }
        Ok(())
    }

    /// Same prior with the model up vector re-expressed in another frame.
    pub fn with_upright(mut self, upright: UnitVec3) -> Self {
        self.upright_model = upright;
        self
    }
}

mod unit_serde {
    use super::{UnitVec3, Vec3};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &UnitVec3, s: S) -> Result<S::Ok, S::Error> {
        [v.x, v.y, v.z].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<UnitVec3, D::Error> {
        let [x, y, z] = <[f64; 3]>::deserialize(d)?;
        let v = Vec3::new(x, y, z);
        if !(v.norm() > 1e-12) {
            return Err(serde::de::Error::custom("direction must be non-zero"));
        }
        Ok(UnitVec3::new_normalize(v))
    }
}
