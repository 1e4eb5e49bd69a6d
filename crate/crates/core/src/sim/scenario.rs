use std::collections::BTreeSet;
use std::path::{Path as FsPath, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::Params;
use crate::costs::UncertaintyParams;
use crate::error::{Error, Result};
use crate::rldm::{MapFile, MapGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VehicleMode {
    /// Ego steered by live commands; zero acceleration when none arrive.
    HumanEgo,
    /// Ego that follows the committed advice.
    FollowAdvice,
    ConstantVelocity,
    /// Velocity schedule `[t, v]`, linearly interpolated and held past the ends.
    Scripted,
}

impl VehicleMode {
    pub fn is_ego(self) -> bool {
        matches!(self, VehicleMode::HumanEgo | VehicleMode::FollowAdvice)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleSpec {
    pub id: String,
    pub lane: String,
    /// Start arclength on `lane`, m.
    pub arclength: f64,
    /// Initial speed, m/s.
    pub velocity: f64,
    pub mode: VehicleMode,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub schedule: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uncertainty: Option<UncertaintyParams>,
}

impl VehicleSpec {
    /// Scheduled speed at time `t`.
    pub fn scheduled_velocity(&self, t: f64) -> f64 {
        let s = &self.schedule;
        match s.as_slice() {
            [] => self.velocity,
            [first, ..] if t <= first[0] => first[1],
            [.., last] if t >= last[0] => last[1],
            _ => {
                let k = s.partition_point(|p| p[0] <= t);
                let (a, b) = (s[k - 1], s[k]);
                let w = if b[0] > a[0] { (t - a[0]) / (b[0] - a[0]) } else { 1.0 };
                a[1] + w * (b[1] - a[1])
            }
        }
    }
}

/// Observation noise added to vehicle states before map ingestion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseModel {
    pub enabled: bool,
    pub position_sigma_m: f64,
    pub velocity_sigma_mps: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self {
            enabled: false,
            position_sigma_m: 0.5,
            velocity_sigma_mps: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    /// Run length, s.
    pub duration: f64,
    /// Planner and world rate, Hz.
    #[serde(default = "default_rate")]
    pub rate_hz: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub noise: NoiseModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map_file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<MapFile>,
    pub vehicles: Vec<VehicleSpec>,
    #[serde(default)]
    pub params: Params,
}

fn default_rate() -> f64 {
    10.0
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Scenario(msg.into())
}

impl Scenario {
    /// Parses and validates a scenario. A relative `map_file` is resolved
    /// against `base_dir`.
    pub fn from_toml(text: &str, base_dir: Option<&FsPath>) -> Result<Scenario> {
        let mut sc: Scenario = toml::from_str(text)?;
        if let Some(file) = sc.map_file.take() {
            if sc.map.is_some() {
                return Err(bad("give either `map` or `map_file`, not both"));
            }
            let path = match base_dir {
                Some(dir) if file.is_relative() => dir.join(&file),
                _ => file.clone(),
            };
            let text =
                std::fs::read_to_string(&path).map_err(|e| bad(format!("map_file `{}`: {e}", path.display())))?;
            sc.map = Some(MapFile::from_toml(&text)?);
        }
        sc.validate()?;
        Ok(sc)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| bad(e.to_string()))
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.rate_hz
    }

    /// Number of planning cycles in a full run.
    pub fn cycles(&self) -> usize {
        (self.duration * self.rate_hz - 1e-9).ceil().max(0.0) as usize
    }

    pub fn map(&self) -> Result<&MapFile> {
        self.map.as_ref().ok_or_else(|| bad("no map"))
    }

    pub fn graph(&self) -> Result<MapGraph> {
        self.map()?.to_graph()
    }

    pub fn ego(&self) -> Result<&VehicleSpec> {
        self.vehicles
            .iter()
            .find(|v| v.mode.is_ego())
            .ok_or_else(|| bad("no ego vehicle (mode human_ego or follow_advice)"))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(bad("duration must be > 0"));
        }
        if !(self.rate_hz.is_finite() && self.rate_hz > 0.0) {
            return Err(bad("rate_hz must be > 0"));
        }
        let n = &self.noise;
        if !(n.position_sigma_m >= 0.0 && n.velocity_sigma_mps >= 0.0) {
            return Err(bad("noise std devs must be >= 0"));
        }
        self.params.validate()?;
        let graph = self.graph()?;
        let egos = self.vehicles.iter().filter(|v| v.mode.is_ego()).count();
        if egos != 1 {
            return Err(bad(format!("expected exactly one ego vehicle, found {egos}")));
        }
        let mut ids = BTreeSet::new();
        for v in &self.vehicles {
            let at = |msg: &str| bad(format!("vehicles[{}]: {msg}", v.id));
            if !ids.insert(v.id.as_str()) {
                return Err(at("duplicate vehicle id"));
            }
            let path = graph
                .lane_path(&v.lane)
                .map_err(|_| at(&format!("unknown lane `{}`", v.lane)))?;
            if !(v.arclength >= 0.0 && v.arclength <= path.length()) {
                return Err(at("arclength outside the lane"));
            }
            if !(v.velocity.is_finite() && v.velocity >= 0.0) {
                return Err(at("velocity must be >= 0"));
            }
            if v.mode.is_ego() && v.velocity > self.params.probe.v_max {
                return Err(at("ego velocity above v_max"));
            }
            if v.mode == VehicleMode::Scripted && v.schedule.is_empty() {
                return Err(at("scripted vehicle needs a schedule"));
            }
            if v.schedule.windows(2).any(|w| w[1][0] < w[0][0]) {
                return Err(at("schedule must be time-sorted"));
            }
            if v.schedule
                .iter()
                .any(|p| !p[0].is_finite() || p[1].is_nan() || p[1] < 0.0)
            {
                return Err(at("schedule entries must be finite with v >= 0"));
            }
            if let Some(u) = &v.uncertainty {
                u.validate()?;
            }
        }
        Ok(())
    }
}

pub fn load_scenario(path: &FsPath) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)?;
    Scenario::from_toml(&text, path.parent())
}
