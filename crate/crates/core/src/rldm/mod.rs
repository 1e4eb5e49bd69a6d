//! Relational local dynamic map: a labeled graph of static road geometry and
//! measured dynamic entities, with path retrieval, projection and obstacle
//! geofencing on top.

mod graph;
mod mapfile;
mod path;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

pub use graph::{
    AttrValue, EntityState, GraphSnapshot, IngestOutcome, MapGraph, Node, NodeId, NodeLabel, Relation, RelationLabel,
    Side, TrackingGains, CENTERLINE, LANE_KEEP_MARGIN_M, OBSTACLE, ROUTE, SENSOR_TYPE,
};
pub use mapfile::{LaneSpec, MapFile, MapFrame, ObstacleSpec};
pub use path::{Path, ProjectionResult, RESAMPLE_SPACING_M};

use crate::error::{Error, Result};

/// Entities farther than this from every path are dropped.
pub const GEOFENCE_M: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathRelation {
    Stay,
    Neighbor(Side),
}

/// A retrieved lane-following path and how it relates to the query lane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LanePath {
    pub lane: NodeId,
    pub relation: PathRelation,
    pub path: Path,
}

fn lane_chain_points(graph: &MapGraph, lane: &str, horizon: f64) -> Result<(Vec<crate::geo::WorldPoint>, Vec<String>)> {
    let mut points = Vec::new();
    let mut lanes = Vec::new();
    let mut seen = BTreeSet::new();
    let mut current = Some(lane.to_string());
    let mut length = 0.0;
    while let Some(id) = current.take() {
        if !seen.insert(id.clone()) {
            break;
        }
        let node = graph.node(&id).ok_or_else(|| Error::UnknownNode(id.clone()))?;
        let Some(AttrValue::Polyline(line)) = node.attributes.get(CENTERLINE) else {
            return Err(Error::MissingCenterline(id));
        };
        length += graph.lane_path(&id)?.length();
        points.extend_from_slice(line);
        lanes.push(id.clone());
        if length >= horizon {
            break;
        }
        current = graph.targets(&id, RelationLabel::Successor).next().map(str::to_string);
    }
    Ok((points, lanes))
}

/// Successor chain of `lane` up to `horizon` meters, resampled.
pub fn stay_path(graph: &MapGraph, lane: &str, horizon: f64) -> Result<Path> {
    let (points, lanes) = lane_chain_points(graph, lane, horizon)?;
    Path::resampled(&points, RESAMPLE_SPACING_M, Some(horizon), lanes)
}

/// The stay path of `lane` followed by one path per neighbor relation of
/// `lane` (left before right).
pub fn retrieve_paths(graph: &MapGraph, lane: &str, horizon: f64) -> Result<Vec<LanePath>> {
    if horizon.is_nan() || horizon <= 0.0 {
        return Err(Error::param("horizon", "must be positive"));
    }
    let mut out = vec![LanePath {
        lane: lane.to_string(),
        relation: PathRelation::Stay,
        path: stay_path(graph, lane, horizon)?,
    }];
    let neighbors: Vec<(Side, String)> = graph
        .relations()
        .filter(|r| r.from == lane)
        .filter_map(|r| match r.label {
            RelationLabel::Neighbor(side) => Some((side, r.to.clone())),
            _ => None,
        })
        .collect();
    for (side, other) in neighbors {
        out.push(LanePath {
            path: stay_path(graph, &other, horizon)?,
            lane: other,
            relation: PathRelation::Neighbor(side),
        });
    }
    Ok(out)
}

/// Nearest point of `point` on `path`.
pub fn project_to_path(point: crate::geo::WorldPoint, path: &Path) -> ProjectionResult {
    path.project(point)
}

/// An entity that passed the geofence, with its nearest path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackedEntity {
    pub state: EntityState,
    pub path_index: usize,
    pub projection: ProjectionResult,
}

/// Keeps entities within [`GEOFENCE_M`] (inclusive) of any path. Each kept
/// entity is annotated with its nearest path; ties go to the lower index.
pub fn filter_obstacles(states: &[EntityState], paths: &[Path]) -> Vec<TrackedEntity> {
    states
        .iter()
        .filter_map(|s| {
            let (idx, proj) = paths
                .iter()
                .enumerate()
                .map(|(i, p)| (i, p.project(s.position)))
                .min_by(|a, b| a.1.d_proj.abs().total_cmp(&b.1.d_proj.abs()))?;
            (proj.d_proj.abs() <= GEOFENCE_M).then(|| TrackedEntity {
                state: s.clone(),
                path_index: idx,
                projection: proj,
            })
        })
        .collect()
}
