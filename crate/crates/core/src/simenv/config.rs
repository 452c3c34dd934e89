use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::SimError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisConfig {
    pub name: String,
    pub pv_name: String,
    /// units / second
    #[serde(default = "defaults::velocity")]
    pub velocity: f64,
    /// seconds charged per move command, zero-length moves included
    #[serde(default = "defaults::move_overhead")]
    pub move_overhead: f64,
    #[serde(default)]
    pub initial_position: f64,
    #[serde(default)]
    pub soft_limits: Option<[f64; 2]>,
}

impl AxisConfig {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            pv_name: format!("SIM:MTR:{}", name.to_uppercase()),
            velocity: defaults::velocity(),
            move_overhead: defaults::move_overhead(),
            initial_position: 0.0,
            soft_limits: Some([-50.0, 50.0]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorConfig {
    pub acquire_pv: String,
    pub exposure_pv: String,
    pub trigger_overhead: f64,
    pub initial_exposure: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            acquire_pv: "SIM:DET:Acquire".into(),
            exposure_pv: "SIM:DET:AcquireTime".into(),
            trigger_overhead: 5.0,
            initial_exposure: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TemperatureConfig {
    pub setpoint_pv: String,
    pub power_pv: String,
    pub readback_pv: String,
    /// °C / second
    pub ramp_rate: f64,
    /// seconds between temperature log samples
    pub sample_interval: f64,
    pub initial_temperature: f64,
}

impl Default for TemperatureConfig {
    fn default() -> Self {
        Self {
            setpoint_pv: "SIM:TEMP:SP".into(),
            power_pv: "SIM:TEMP:PWR".into(),
            readback_pv: "SIM:TEMP:RB".into(),
            ramp_rate: 0.5,
            sample_interval: 1.0,
            initial_temperature: 25.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct JitterConfig {
    /// Each time advance is scaled by `1 + u`, `u ~ U[-bound, bound]`.
    pub bound: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvConfig {
    pub axes: Vec<AxisConfig>,
    pub detector: DetectorConfig,
    pub temperature: TemperatureConfig,
    pub jitter: JitterConfig,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            axes: ["x", "y", "z"].iter().map(|n| AxisConfig::new(n)).collect(),
            detector: DetectorConfig::default(),
            temperature: TemperatureConfig::default(),
            jitter: JitterConfig::default(),
        }
    }
}

mod defaults {
    pub fn velocity() -> f64 {
        1.0
    }
    pub fn move_overhead() -> f64 {
        0.5
    }
}

impl EnvConfig {
    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let cfg: EnvConfig = serde_json::from_str(text).map_err(|e| SimError::Config {
            field: "document".into(),
            reason: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.jitter.seed = seed;
        self
    }

    pub fn with_jitter(mut self, bound: f64) -> Self {
        self.jitter.bound = bound;
        self
    }

    pub fn axis(&self, name: &str) -> Option<&AxisConfig> {
        self.axes.iter().find(|a| a.name == name)
    }

    /// Every pv the twin owns, readback included.
    pub fn pv_names(&self) -> BTreeSet<&str> {
        self.initial_pv_values().into_keys().collect()
    }

    pub(crate) fn initial_pv_values(&self) -> BTreeMap<&str, f64> {
        let mut m = BTreeMap::new();
        for a in &self.axes {
            m.insert(a.pv_name.as_str(), a.initial_position);
        }
        m.insert(self.detector.acquire_pv.as_str(), 0.0);
        m.insert(self.detector.exposure_pv.as_str(), self.detector.initial_exposure);
        let t = &self.temperature;
        m.insert(t.setpoint_pv.as_str(), t.initial_temperature);
        m.insert(t.power_pv.as_str(), 0.0);
        m.insert(t.readback_pv.as_str(), t.initial_temperature);
        m
    }

    /// Hex SHA-256 of the canonical JSON form; used in cache keys.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let err = |field: String, reason: &str| {
            Err(SimError::Config {
                field,
                reason: reason.to_string(),
            })
        };

        let mut seen_pvs = BTreeSet::new();
        let mut seen_axes = BTreeSet::new();
        let mut pvs: Vec<(String, &str)> = Vec::new();
        for (i, a) in self.axes.iter().enumerate() {
            let f = |name: &str| format!("axes[{i}].{name}");
            if a.name.is_empty() || !is_identifier(&a.name) {
                return err(f("name"), "must be an identifier");
            }
            if !seen_axes.insert(a.name.as_str()) {
                return err(f("name"), "duplicate axis name");
            }
            if !(a.velocity.is_finite() && a.velocity > 0.0) {
                return err(f("velocity"), "must be finite and > 0");
            }
            if !(a.move_overhead.is_finite() && a.move_overhead >= 0.0) {
                return err(f("move_overhead"), "must be finite and >= 0");
            }
            if !a.initial_position.is_finite() {
                return err(f("initial_position"), "must be finite");
            }
            if let Some([lo, hi]) = a.soft_limits {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return err(f("soft_limits"), "need finite lo < hi");
                }
                if a.initial_position < lo || a.initial_position > hi {
                    return err(f("soft_limits"), "must contain initial_position");
                }
            }
            pvs.push((f("pv_name"), &a.pv_name));
        }

        let d = &self.detector;
        if !(d.trigger_overhead.is_finite() && d.trigger_overhead >= 0.0) {
            return err("detector.trigger_overhead".into(), "must be finite and >= 0");
        }
        if !(d.initial_exposure.is_finite() && d.initial_exposure >= 0.0) {
            return err("detector.initial_exposure".into(), "must be finite and >= 0");
        }
        pvs.push(("detector.acquire_pv".into(), &d.acquire_pv));
        pvs.push(("detector.exposure_pv".into(), &d.exposure_pv));

        let t = &self.temperature;
        if !(t.ramp_rate.is_finite() && t.ramp_rate > 0.0) {
            return err("temperature.ramp_rate".into(), "must be finite and > 0");
        }
        if !(t.sample_interval.is_finite() && t.sample_interval > 0.0) {
            return err("temperature.sample_interval".into(), "must be finite and > 0");
        }
        if !t.initial_temperature.is_finite() {
            return err("temperature.initial_temperature".into(), "must be finite");
        }
        pvs.push(("temperature.setpoint_pv".into(), &t.setpoint_pv));
        pvs.push(("temperature.power_pv".into(), &t.power_pv));
        pvs.push(("temperature.readback_pv".into(), &t.readback_pv));

        // the multiplier 1 + u must stay positive so time never runs backwards
        if !(self.jitter.bound.is_finite() && (0.0..1.0).contains(&self.jitter.bound)) {
            return err("jitter.bound".into(), "must be in [0, 1)");
        }

        for (field, pv) in pvs {
            if pv.is_empty() {
                return err(field, "pv name must not be empty");
            }
            if !seen_pvs.insert(pv) {
                return err(field, "duplicate pv name");
            }
        }
        Ok(())
    }
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Instrument state to preload before a run, e.g. replayed from an archiver.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSnapshot {
    #[serde(default)]
    pub pvs: BTreeMap<String, f64>,
    /// Readback temperature, °C.
    #[serde(default)]
    pub temperature: Option<f64>,
}

impl StateSnapshot {
    pub fn from_json(text: &str) -> Result<Self, SimError> {
        serde_json::from_str(text).map_err(|e| SimError::Snapshot(e.to_string()))
    }
}
