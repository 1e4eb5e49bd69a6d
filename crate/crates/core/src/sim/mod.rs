//! Deterministic scenario engine: vehicles move along lane paths at a fixed
//! rate, are observed (optionally with noise) into the map, and the planner
//! runs once per cycle.

mod generators;
mod scenario;
mod trace;
mod world;

pub use generators::{make_gap_scenario, make_no_gap_scenario, two_lane_map};
pub use scenario::{load_scenario, NoiseModel, Scenario, VehicleMode, VehicleSpec};
pub use trace::{
    direction_str, export_risk_field, percentile, speed_str, write_risk_fields, write_trace_csv, AdviceChange,
    RiskField, RiskRow, Summary, TraceRecord, VehicleRecord,
};
pub use world::{EgoCommand, World};
