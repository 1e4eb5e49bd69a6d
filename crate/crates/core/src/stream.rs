//! Live stream schema: one JSON `state` message per planning cycle out,
//! ego commands and session control in.

use serde::{Deserialize, Serialize};

use crate::planner::{Direction, SpeedAdvice};
use crate::rldm::Side;
use crate::sim::{RiskField, TraceRecord, World};

pub const STREAM_VERSION: u32 = 1;

/// Below this rate a risk-field cell is drawn blue, %/s.
pub const BLUE_MAX_PCT_PER_S: f64 = 0.5;
/// From this rate on a cell is drawn saturated red, %/s.
pub const RED_MIN_PCT_PER_S: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleView {
    pub id: String,
    pub lane: String,
    pub x_m: f64,
    pub y_m: f64,
    pub v_mps: f64,
    pub a_mps2: f64,
    pub heading_rad: f64,
    pub is_ego: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarningView {
    pub speed: SpeedAdvice,
    pub direction: Direction,
    pub magnitude_mps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelocityScale {
    pub v0_mps: f64,
    pub v_tar_mps: f64,
    pub v_max_mps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColorThresholds {
    pub blue_max_pct_per_s: f64,
    pub red_min_pct_per_s: f64,
}

impl Default for ColorThresholds {
    fn default() -> Self {
        Self {
            blue_max_pct_per_s: BLUE_MAX_PCT_PER_S,
            red_min_pct_per_s: RED_MIN_PCT_PER_S,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateMessage {
    pub version: u32,
    pub scenario: String,
    pub cycle: usize,
    /// Scenario time, s.
    pub t: f64,
    pub paused: bool,
    pub vehicles: Vec<VehicleView>,
    pub warning: WarningView,
    pub velocity_scale: VelocityScale,
    pub direction: Direction,
    pub target_lane: String,
    pub risk_field: RiskField,
    pub color_thresholds: ColorThresholds,
}

impl StateMessage {
    pub fn from_record(scenario: &str, record: &TraceRecord, v_max: f64, paused: bool) -> StateMessage {
        StateMessage {
            version: STREAM_VERSION,
            scenario: scenario.to_string(),
            cycle: record.cycle,
            t: record.t,
            paused,
            vehicles: record
                .vehicles
                .iter()
                .map(|v| VehicleView {
                    id: v.id.clone(),
                    lane: v.lane.clone(),
                    x_m: v.x,
                    y_m: v.y,
                    v_mps: v.v,
                    a_mps2: v.a,
                    heading_rad: v.heading,
                    is_ego: v.is_ego,
                })
                .collect(),
            warning: WarningView {
                speed: record.warning.speed,
                direction: record.warning.direction,
                magnitude_mps: record.warning.magnitude,
            },
            velocity_scale: VelocityScale {
                v0_mps: record.v0,
                v_tar_mps: record.committed.v_tar,
                v_max_mps: v_max,
            },
            direction: record.warning.direction,
            target_lane: record.committed.p_tar.clone(),
            risk_field: record.risk_field.clone(),
            color_thresholds: ColorThresholds::default(),
        }
    }

    pub fn from_world(world: &World, record: &TraceRecord, paused: bool) -> StateMessage {
        Self::from_record(&world.scenario().name, record, world.params().probe.v_max, paused)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Outbound {
    State(Box<StateMessage>),
    /// Sent once the scenario has run its full duration.
    Finished {
        version: u32,
        cycles: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Inbound {
    Command {
        #[serde(default)]
        acceleration_mps2: f64,
        #[serde(default)]
        lane_request: Option<Side>,
    },
    Pause,
    Resume,
    Reset,
}

impl Inbound {
    pub fn parse(text: &str) -> serde_json::Result<Inbound> {
        serde_json::from_str(text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inbound_parses() {
        assert_eq!(
            Inbound::parse(r#"{"type":"command","acceleration_mps2":1.5,"lane_request":"left"}"#).unwrap(),
            Inbound::Command {
                acceleration_mps2: 1.5,
                lane_request: Some(Side::Left)
            }
        );
        assert_eq!(
            Inbound::parse(r#"{"type":"command"}"#).unwrap(),
            Inbound::Command {
                acceleration_mps2: 0.0,
                lane_request: None
            }
        );
        assert_eq!(Inbound::parse(r#"{"type":"pause"}"#).unwrap(), Inbound::Pause);
        assert!(Inbound::parse(r#"{"type":"fly"}"#).is_err());
        assert!(Inbound::parse("not json").is_err());
    }

    #[test]
    fn state_message_is_tagged() {
        let mut world = World::new(crate::sim::make_gap_scenario()).unwrap();
        let rec = world.step(None).unwrap();
        let msg = Outbound::State(Box::new(StateMessage::from_world(&world, &rec, false)));
        let v: serde_json::Value = serde_json::to_value(&msg).unwrap();
        assert_eq!(v["type"], "state");
        assert_eq!(v["version"], STREAM_VERSION);
        assert_eq!(v["color_thresholds"]["blue_max_pct_per_s"], 0.5);
        assert_eq!(v["velocity_scale"]["v0_mps"], 7.0);
        let back: Outbound = serde_json::from_value(v).unwrap();
        assert_eq!(back, msg);
    }
}
