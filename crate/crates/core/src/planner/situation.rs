use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::Direction;
use crate::config::Params;
use crate::costs::{OtherPrediction, UncertaintyParams};
use crate::error::{Error, Result};
use crate::motion::{blend_paths, path_from, predict_other, BlendSpec};
use crate::rldm::{
    filter_obstacles, retrieve_paths, EntityState, LanePath, MapGraph, Path, PathRelation, Side, TrackedEntity,
};

/// One ego path option: staying in lane or a blended lane change.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidatePath {
    /// Lane the path ends up in; identifies the option across cycles.
    pub target_lane: String,
    pub direction: Direction,
    pub path: Path,
    /// Ego arclength on `path`.
    pub start: f64,
    pub on_route: bool,
    /// Blend interval `[l_start, l_end]` measured from the ego, for lane changes.
    pub blend: Option<(f64, f64)>,
}

impl CandidatePath {
    pub fn is_stay(&self) -> bool {
        self.direction == Direction::Straight
    }
}

/// Another vehicle that passed the geofence, predicted along its lane.
#[derive(Debug, Clone, PartialEq)]
pub struct SituationEntity {
    pub tracked: TrackedEntity,
    pub lane: String,
    pub prediction: OtherPrediction,
}

/// Immutable planning snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct Situation {
    pub timestamp: f64,
    pub ego: EntityState,
    pub ego_lane: String,
    pub lane_paths: Vec<LanePath>,
    pub candidates: Vec<CandidatePath>,
    pub others: Vec<SituationEntity>,
}

fn side_direction(side: Side) -> Direction {
    match side {
        Side::Left => Direction::Left,
        Side::Right => Direction::Right,
    }
}

impl Situation {
    /// Localizes the ego, retrieves its lane paths, blends one lane-change
    /// path per neighbor and predicts every geofenced other vehicle at
    /// constant velocity along its nearest lane. Static obstacles of the map
    /// join the others with zero speed and no behavior uncertainty.
    pub fn build(
        graph: &MapGraph,
        ego: &EntityState,
        others: &[EntityState],
        params: &Params,
        uncertainty: &BTreeMap<String, UncertaintyParams>,
    ) -> Result<Situation> {
        let probe = &params.probe;
        let ego_lane = graph
            .lane_of(&ego.id)
            .or_else(|| graph.nearest_lane(ego.position).map(|(l, _)| l))
            .ok_or_else(|| Error::NotLocalized(ego.id.clone()))?
            .to_string();
        let mut ego = ego.clone();
        ego.v = ego.v.clamp(0.0, probe.v_max);

        // every retrieved path must reach past the farthest point the ego
        // or another vehicle can get to from the ego's projection on it
        let mut lanes = vec![ego_lane.as_str()];
        lanes.extend(
            [Side::Left, Side::Right]
                .into_iter()
                .filter_map(|side| graph.neighbor(&ego_lane, side)),
        );
        let mut behind = 0.0f64;
        for lane in lanes {
            behind = behind.max(graph.lane_path(lane)?.project(ego.position).arclength);
        }
        let horizon = behind + probe.v_max * probe.s_h + params.planner.path_margin_m;
        let lane_paths = retrieve_paths(graph, &ego_lane, horizon)?;

        let stay = &lane_paths[0];
        let ego_start = stay.path.project(ego.position).arclength;
        let route = |lp: &LanePath| lp.path.lanes().last().is_some_and(|l| graph.is_route_lane(l));
        let mut candidates = vec![CandidatePath {
            target_lane: stay.lane.clone(),
            direction: Direction::Straight,
            path: stay.path.clone(),
            start: ego_start,
            on_route: route(stay),
            blend: None,
        }];
        // an ego stopped at the very end of its lane can only stay
        let ego_ahead = path_from(&stay.path, ego_start).ok();
        for lp in lane_paths[1..].iter().filter(|_| ego_ahead.is_some()) {
            let ego_ahead = ego_ahead.as_ref().expect("filtered above");
            let PathRelation::Neighbor(side) = lp.relation else {
                continue;
            };
            let proj = lp.path.project(ego.position);
            let other_ahead = match path_from(&lp.path, proj.arclength) {
                Ok(p) => p,
                Err(_) => continue,
            };
            let spec = BlendSpec {
                s_start: params.blend.s_start,
                l_c: params.blend.l_c,
                k: params.blend.k,
                d_path: proj.d_proj.abs(),
            };
            let blend = blend_paths(ego_ahead, &other_ahead, ego.v, &spec)?;
            candidates.push(CandidatePath {
                target_lane: lp.lane.clone(),
                direction: side_direction(side),
                path: blend.path.clone(),
                start: 0.0,
                on_route: route(lp),
                blend: Some((blend.l_start, blend.l_end)),
            });
        }

        let center_paths: Vec<Path> = lane_paths.iter().map(|lp| lp.path.clone()).collect();
        let mut states: Vec<EntityState> = others.iter().filter(|o| o.id != ego.id).cloned().collect();
        let obstacles = graph.static_obstacles();
        states.extend(obstacles.iter().cloned());
        let mut entities = Vec::new();
        for tracked in filter_obstacles(&states, &center_paths) {
            let lp = &lane_paths[tracked.path_index];
            let v = tracked.state.v.max(0.0);
            let sample = predict_other(v, &lp.path, tracked.projection.arclength, probe)?;
            let is_static = obstacles.iter().any(|o| o.id == tracked.state.id);
            let unc = match uncertainty.get(&tracked.state.id) {
                Some(u) => *u,
                None if is_static => UncertaintyParams {
                    sigma_b: 0.0,
                    ..params.uncertainty
                },
                None => params.uncertainty,
            };
            entities.push(SituationEntity {
                lane: lp.lane.clone(),
                prediction: OtherPrediction {
                    id: tracked.state.id.clone(),
                    sample,
                    uncertainty: unc,
                },
                tracked,
            });
        }

        Ok(Situation {
            timestamp: ego.timestamp,
            ego,
            ego_lane,
            lane_paths,
            candidates,
            others: entities,
        })
    }

    pub fn path_count(&self) -> usize {
        self.candidates.len()
    }

    pub fn candidate(&self, target_lane: &str) -> Option<&CandidatePath> {
        self.candidates.iter().find(|c| c.target_lane == target_lane)
    }
}
