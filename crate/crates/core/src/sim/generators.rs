use std::collections::BTreeMap;

use super::scenario::{NoiseModel, Scenario, VehicleMode, VehicleSpec};
use crate::config::Params;
use crate::rldm::{AttrValue, LaneSpec, MapFile, MapFrame, ObstacleSpec, ROUTE};

/// Lane width, m.
const LANE_OFFSET_M: f64 = 3.5;
/// World x where the ending lane stops, m.
const ENDING_LANE_END_M: f64 = 70.0;

/// Straight two-lane road: `R` ends, `L` (left of it) is the through lane
/// the route requires.
pub fn two_lane_map() -> MapFile {
    let mut route = BTreeMap::new();
    route.insert(ROUTE.to_string(), AttrValue::Bool(true));
    MapFile {
        frame: MapFrame::World,
        lat0_deg: 0.0,
        earth_radius_m: crate::geo::MEAN_EARTH_RADIUS_M,
        lanes: vec![
            LaneSpec {
                id: "R".into(),
                centerline: vec![[0.0, 0.0], [ENDING_LANE_END_M, 0.0]],
                successors: vec![],
                left: Some("L".into()),
                right: None,
                half_road: None,
                attributes: BTreeMap::new(),
                obstacles: vec![ObstacleSpec {
                    id: "cones".into(),
                    position: [ENDING_LANE_END_M, 0.0],
                    kind: "cones".into(),
                }],
            },
            LaneSpec {
                id: "L".into(),
                centerline: vec![[-150.0, LANE_OFFSET_M], [600.0, LANE_OFFSET_M]],
                successors: vec![],
                left: None,
                right: Some("R".into()),
                half_road: None,
                attributes: route,
                obstacles: vec![],
            },
        ],
    }
}

fn vehicle(id: &str, lane: &str, x: f64, v: f64, mode: VehicleMode) -> VehicleSpec {
    // lane L starts at x = -150
    let arclength = if lane == "L" { x + 150.0 } else { x };
    VehicleSpec {
        id: id.into(),
        lane: lane.into(),
        arclength,
        velocity: v,
        mode,
        schedule: vec![],
        uncertainty: None,
    }
}

fn scenario(name: &str, vehicles: Vec<VehicleSpec>) -> Scenario {
    Scenario {
        name: name.into(),
        duration: 12.0,
        rate_hz: 10.0,
        seed: 0,
        noise: NoiseModel::default(),
        map_file: None,
        map: Some(two_lane_map()),
        vehicles,
        params: Params::default(),
    }
}

/// Ego at 7 m/s on the ending lane; the neighbor lane has a wide gap
/// between two vehicles around the merge point.
pub fn make_gap_scenario() -> Scenario {
    scenario(
        "gap",
        vec![
            vehicle("ego", "R", 20.0, 7.0, VehicleMode::FollowAdvice),
            vehicle("front", "L", 45.0, 9.0, VehicleMode::ConstantVelocity),
            vehicle("rear", "L", -5.0, 9.0, VehicleMode::ConstantVelocity),
        ],
    )
}

/// Ego at 5 m/s on the ending lane with two closely spaced, faster
/// vehicles alongside; the gap opens only after they pass.
pub fn make_no_gap_scenario() -> Scenario {
    scenario(
        "no_gap",
        vec![
            vehicle("ego", "R", 20.0, 5.0, VehicleMode::FollowAdvice),
            vehicle("front", "L", 25.0, 8.0, VehicleMode::ConstantVelocity),
            vehicle("rear", "L", 15.0, 8.0, VehicleMode::ConstantVelocity),
        ],
    )
}
