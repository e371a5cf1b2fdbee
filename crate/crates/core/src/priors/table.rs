use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_BIAS: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorSource {
    Llm,
    Fallback,
    Override,
}

/// Upright bias β ∈ [0, 1] per simplified label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SemanticPriorTable {
    pub entries: BTreeMap<String, f64>,
    pub source: PriorSource,
    pub default_bias: f64,
    /// Labels whose updates are restricted to yaw about gravity.
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub yaw_only: BTreeSet<String>,
}

impl SemanticPriorTable {
    pub fn new(entries: BTreeMap<String, f64>, source: PriorSource) -> Result<Self> {
        let t = Self { entries, source, default_bias: DEFAULT_BIAS, yaw_only: BTreeSet::new() };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        let in_range = |v: f64| (0.0..=1.0).contains(&v);
        if !in_range(self.default_bias) {
            return Err(Error::invalid("defaultBias must lie in [0, 1]"));
        }
        if let Some((k, v)) = self.entries.iter().find(|(_, v)| !in_range(**v)) {
            return Err(Error::invalid(format!("bias for '{k}' is {v}, outside [0, 1]")));
        }
        Ok(())
    }

    /// β for `label`, or the table default for unknown labels.
    pub fn bias(&self, label: &str) -> f64 {
        self.entries.get(label).copied().unwrap_or(self.default_bias)
    }

    pub fn is_yaw_only(&self, label: &str) -> bool {
        self.yaw_only.contains(label)
    }

    /// Applies manual overrides: explicit β values and yaw-only flags.
    pub fn apply_overrides(&mut self, overrides: &BTreeMap<String, PriorOverride>) -> Result<()> {
        for (label, o) in overrides {
            if let Some(b) = o.bias {
                if !(0.0..=1.0).contains(&b) {
                    return Err(Error::invalid(format!("override bias for '{label}' outside [0, 1]")));
                }
                self.entries.insert(label.clone(), b);
                self.source = PriorSource::Override;
            }
            if o.yaw_only {
                self.yaw_only.insert(label.clone());
            } else {
                self.yaw_only.remove(label);
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct PriorOverride {
    #[serde(default)]
    pub bias: Option<f64>,
    #[serde(default)]
    pub yaw_only: bool,
}

/// Keywords for objects that readily tip or are placed at odd angles.
const TIPPABLE: &[(&str, f64)] = &[
    ("tripod", 0.2),
    ("cone", 0.3),
    ("sign", 0.35),
    ("ladder", 0.35),
    ("board", 0.4),
    ("bucket", 0.4),
];

/// Keywords for heavy or structural objects that almost always stand upright.
const STABLE: &[(&str, f64)] = &[
    ("wall", 0.95),
    ("column", 0.9),
    ("pillar", 0.9),
    ("beam", 0.85),
    ("crate", 0.8),
    ("equipment", 0.8),
    ("generator", 0.8),
    ("barrel", 0.75),
    ("scaffold", 0.75),
    ("scaffolding", 0.75),
    ("pallet", 0.7),
];

fn keyword_bias(label: &str) -> Option<f64> {
    let words: Vec<String> = label
        .to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(|w| w.strip_suffix('s').filter(|s| s.len() > 2).unwrap_or(w).to_string())
        .collect();
    let hit = |table: &[(&str, f64)]| {
        table
            .iter()
            .find(|(k, _)| words.iter().any(|w| w == k))
            .map(|(_, v)| *v)
    };
    // A tippable keyword wins over a stable one ("sign board on column").
    hit(TIPPABLE).or_else(|| hit(STABLE))
}

/// Deterministic offline priors from a keyword table.
pub fn fallback_priors(labels: &[String]) -> SemanticPriorTable {
    let entries = labels
        .iter()
        .map(|l| (l.clone(), keyword_bias(l).unwrap_or(DEFAULT_BIAS)))
        .collect();
    SemanticPriorTable { entries, source: PriorSource::Fallback, default_bias: DEFAULT_BIAS, yaw_only: BTreeSet::new() }
}

/// `γ_new = β · γ_initial`.
pub fn effective_gravity_weight(gamma_initial: f64, family_bias: f64) -> Result<f64> {
    if !(gamma_initial >= 0.0) || !(0.0..=1.0).contains(&family_bias) {
        return Err(Error::invalid("gammaInitial must be ≥ 0 and familyBias in [0, 1]"));
    }
    Ok(gamma_initial * family_bias)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn fallback_examples() {
        let t = fallback_priors(&labels(&["wooden crate", "traffic cone", "zzz-unknown"]));
        assert_eq!(t.bias("wooden crate"), 0.8);
        assert_eq!(t.bias("traffic cone"), 0.3);
        assert_eq!(t.bias("zzz-unknown"), 0.5);
        assert_eq!(t.bias("never seen"), 0.5);
        assert_eq!(t.source, PriorSource::Fallback);
    }

    #[test]
    fn fallback_classes() {
        for heavy in ["steel barrel", "concrete pillar", "Column", "concrete wall", "steel i-beam", "heavy equipment"] {
            assert!(fallback_priors(&labels(&[heavy])).bias(heavy) >= 0.7, "{heavy}");
        }
        for light in ["camera tripod", "traffic cones", "warning sign", "white board"] {
            assert!(fallback_priors(&labels(&[light])).bias(light) <= 0.4, "{light}");
        }
    }

    #[test]
    fn gravity_weight_examples() {
        assert_eq!(effective_gravity_weight(1.0, 0.0).unwrap(), 0.0);
        assert_eq!(effective_gravity_weight(1.0, 1.0).unwrap(), 1.0);
        assert!((effective_gravity_weight(2.0, 0.3).unwrap() - 0.6).abs() < 1e-15);
        assert!(effective_gravity_weight(1.0, 1.5).is_err());
    }

    #[test]
    fn overrides() {
        let mut t = fallback_priors(&labels(&["tripod"]));
        let mut o = BTreeMap::new();
        o.insert("tripod".to_string(), PriorOverride { bias: Some(0.9), yaw_only: true });
        t.apply_overrides(&o).unwrap();
        assert_eq!(t.bias("tripod"), 0.9);
        assert!(t.is_yaw_only("tripod"));
        assert_eq!(t.source, PriorSource::Override);
    }
}
