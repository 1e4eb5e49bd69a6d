use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::path::{Path, RESAMPLE_SPACING_M};
use crate::error::{Error, Result};
use crate::geo::WorldPoint;

pub type NodeId = String;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NodeLabel {
    Road,
    HalfRoad,
    LaneSegment,
    Sensor,
    Vehicle,
    Marking,
    /// Reserved for the transient layer; no operations use it.
    TrafficSignal,
    /// Reserved for the quasi-static layer; no operations use it.
    Building,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "kind", content = "side")]
pub enum RelationLabel {
    HasPart,
    HasMeasurement,
    Contains,
    Successor,
    Neighbor(Side),
}

impl fmt::Display for RelationLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RelationLabel::HasPart => f.write_str("hasPart"),
            RelationLabel::HasMeasurement => f.write_str("hasMeasurement"),
            RelationLabel::Contains => f.write_str("contains"),
            RelationLabel::Successor => f.write_str("successor"),
            RelationLabel::Neighbor(Side::Left) => f.write_str("neighbor(left)"),
            RelationLabel::Neighbor(Side::Right) => f.write_str("neighbor(right)"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AttrValue {
    Bool(bool),
    Number(f64),
    Text(String),
    Polyline(Vec<WorldPoint>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub label: NodeLabel,
    #[serde(default)]
    pub attributes: BTreeMap<String, AttrValue>,
}

impl Node {
    pub fn new(id: impl Into<NodeId>, label: NodeLabel) -> Self {
        Self {
            id: id.into(),
            label,
            attributes: BTreeMap::new(),
        }
    }

    pub fn with_attr(mut self, key: impl Into<String>, value: AttrValue) -> Self {
        self.attributes.insert(key.into(), value);
        self
    }

    pub fn lane(id: impl Into<NodeId>, centerline: Vec<WorldPoint>) -> Self {
        Node::new(id, NodeLabel::LaneSegment).with_attr(CENTERLINE, AttrValue::Polyline(centerline))
    }

    pub fn sensor(id: impl Into<NodeId>, kind: &str) -> Self {
        Node::new(id, NodeLabel::Sensor).with_attr(SENSOR_TYPE, AttrValue::Text(kind.into()))
    }

    pub fn number(&self, key: &str) -> Option<f64> {
        match self.attributes.get(key) {
            Some(AttrValue::Number(v)) => Some(*v),
            _ => None,
        }
    }

    pub fn flag(&self, key: &str) -> bool {
        matches!(self.attributes.get(key), Some(AttrValue::Bool(true)))
    }
}

pub const CENTERLINE: &str = "centerline";
pub const SENSOR_TYPE: &str = "type";
/// Lane attribute marking lanes that satisfy the route intent.
pub const ROUTE: &str = "route";
/// Flag on markings that block the lane they are part of.
pub const OBSTACLE: &str = "obstacle";
/// A vehicle keeps its lane until another lane centerline is closer by
/// more than this, m.
pub const LANE_KEEP_MARGIN_M: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Relation {
    pub from: NodeId,
    pub label: RelationLabel,
    pub to: NodeId,
}

/// Measured state of a dynamic entity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityState {
    pub id: NodeId,
    pub position: WorldPoint,
    /// Speed along the path, m/s.
    pub v: f64,
    pub heading: f64,
    pub timestamp: f64,
}

impl EntityState {
    pub fn new(id: impl Into<NodeId>, position: WorldPoint, v: f64, heading: f64, timestamp: f64) -> Self {
        Self {
            id: id.into(),
            position,
            v,
            heading,
            timestamp,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IngestOutcome {
    /// Pushed to the graph; `created` when the entity node is new.
    Applied { created: bool },
    /// Held back because the push period has not elapsed; the latest such
    /// measurement is applied on the next push.
    Coalesced,
}

#[derive(Debug, Clone, Default)]
struct PushState {
    last_push: Option<f64>,
    pending: Option<EntityState>,
}

/// Alpha-beta gains for fusing successive measurements of one entity.
/// A gain of 1 takes every measurement as is.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackingGains {
    pub enabled: bool,
    /// Position correction gain, (0, 1].
    pub alpha: f64,
    /// Speed correction gain, (0, 1].
    pub beta: f64,
}

impl Default for TrackingGains {
    fn default() -> Self {
        Self {
            enabled: true,
            alpha: 0.3,
            beta: 0.3,
        }
    }
}

impl TrackingGains {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0 && self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::param("tracking", "alpha and beta must lie in (0, 1]"));
        }
        Ok(())
    }

    /// Corrects the constant-velocity prediction from `prev` with `meas`.
    pub fn fuse(&self, prev: &EntityState, meas: &EntityState) -> EntityState {
        let dt = meas.timestamp - prev.timestamp;
        if !self.enabled || dt <= 0.0 {
            return meas.clone();
        }
        let (sin, cos) = prev.heading.sin_cos();
        let px = prev.position.x + prev.v * dt * cos;
        let py = prev.position.y + prev.v * dt * sin;
        EntityState {
            id: meas.id.clone(),
            position: WorldPoint::new(
                px + self.alpha * (meas.position.x - px),
                py + self.alpha * (meas.position.y - py),
            ),
            v: (prev.v + self.beta * (meas.v - prev.v)).max(0.0),
            heading: meas.heading,
            timestamp: meas.timestamp,
        }
    }
}

/// Relational local dynamic map: labeled nodes plus directed labeled
/// relations, with cached centerline paths for every lane segment.
#[derive(Debug, Clone, Default)]
pub struct MapGraph {
    nodes: BTreeMap<NodeId, Node>,
    relations: BTreeSet<Relation>,
    lane_paths: BTreeMap<NodeId, Path>,
    push: BTreeMap<(NodeId, NodeId), PushState>,
    tracking: Option<TrackingGains>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphSnapshot {
    pub nodes: Vec<Node>,
    pub relations: Vec<Relation>,
}

impl MapGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, node: Node) -> Result<NodeId> {
        if self.nodes.contains_key(&node.id) {
            return Err(Error::DuplicateNode(node.id));
        }
        match node.label {
            NodeLabel::LaneSegment => {
                let Some(AttrValue::Polyline(line)) = node.attributes.get(CENTERLINE) else {
                    return Err(Error::MissingCenterline(node.id));
                };
                let path = Path::resampled(line, RESAMPLE_SPACING_M, None, vec![node.id.clone()])?;
                self.lane_paths.insert(node.id.clone(), path);
            }
            NodeLabel::Sensor if !node.attributes.contains_key(SENSOR_TYPE) => {
                return Err(Error::param(
                    "sensor",
                    format!("`{}` lacks the `type` attribute", node.id),
                ));
            }
            _ => {}
        }
        let id = node.id.clone();
        self.nodes.insert(id.clone(), node);
        Ok(id)
    }

    pub fn node(&self, id: &str) -> Option<&Node> {
        self.nodes.get(id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values()
    }

    pub fn relations(&self) -> impl Iterator<Item = &Relation> {
        self.relations.iter()
    }

    fn label_of(&self, id: &str) -> Result<NodeLabel> {
        self.nodes
            .get(id)
            .map(|n| n.label)
            .ok_or_else(|| Error::UnknownNode(id.to_string()))
    }

    fn schema_allows(&self, from: NodeLabel, label: RelationLabel, to: NodeLabel) -> bool {
        use NodeLabel::*;
        match label {
            RelationLabel::Contains => from == LaneSegment && to == Vehicle,
            RelationLabel::HasMeasurement => from == Sensor && to != Sensor,
            RelationLabel::HasPart => matches!(
                (from, to),
                (Road, HalfRoad)
                    | (HalfRoad, LaneSegment)
                    | (Road | HalfRoad | LaneSegment, Marking | TrafficSignal)
                    | (Vehicle, Sensor)
            ),
            RelationLabel::Successor | RelationLabel::Neighbor(_) => from == LaneSegment && to == LaneSegment,
        }
    }

    /// Adds a relation after checking the map schema. Adding an existing
    /// relation again is a no-op.
    pub fn add_relation(&mut self, from: &str, label: RelationLabel, to: &str) -> Result<()> {
        let (fl, tl) = (self.label_of(from)?, self.label_of(to)?);
        let rel = Relation {
            from: from.to_string(),
            label,
            to: to.to_string(),
        };
        if self.relations.contains(&rel) {
            return Ok(());
        }
        let half_roads = || {
            self.relations
                .iter()
                .filter(|r| r.from == from && r.label == RelationLabel::HasPart)
                .filter(|r| self.nodes[&r.to].label == NodeLabel::HalfRoad)
                .count()
        };
        let over_capacity = fl == NodeLabel::Road && tl == NodeLabel::HalfRoad && half_roads() >= 2;
        if !self.schema_allows(fl, label, tl) || over_capacity || (from == to && label != RelationLabel::HasPart) {
            return Err(Error::SchemaViolation {
                label: label.to_string(),
                from: from.to_string(),
                from_label: format!("{fl:?}"),
                to: to.to_string(),
                to_label: format!("{tl:?}"),
            });
        }
        self.relations.insert(rel);
        Ok(())
    }

    pub fn remove_relation(&mut self, from: &str, label: RelationLabel, to: &str) -> bool {
        self.relations.remove(&Relation {
            from: from.to_string(),
            label,
            to: to.to_string(),
        })
    }

    pub fn targets<'a>(&'a self, from: &'a str, label: RelationLabel) -> impl Iterator<Item = &'a str> + 'a {
        self.relations
            .iter()
            .filter(move |r| r.from == from && r.label == label)
            .map(|r| r.to.as_str())
    }

    pub fn sources<'a>(&'a self, to: &'a str, label: RelationLabel) -> impl Iterator<Item = &'a str> + 'a {
        self.relations
            .iter()
            .filter(move |r| r.to == to && r.label == label)
            .map(|r| r.from.as_str())
    }

    pub fn lane_path(&self, lane: &str) -> Result<&Path> {
        match self.label_of(lane)? {
            NodeLabel::LaneSegment => self
                .lane_paths
                .get(lane)
                .ok_or_else(|| Error::MissingCenterline(lane.to_string())),
            _ => Err(Error::MissingCenterline(lane.to_string())),
        }
    }

    pub fn lanes(&self) -> impl Iterator<Item = &str> {
        self.lane_paths.keys().map(String::as_str)
    }

    pub fn neighbor(&self, lane: &str, side: Side) -> Option<&str> {
        let label = RelationLabel::Neighbor(side);
        self.relations
            .iter()
            .find(|r| r.from == lane && r.label == label)
            .map(|r| r.to.as_str())
    }

    pub fn is_route_lane(&self, lane: &str) -> bool {
        self.nodes.get(lane).is_some_and(|n| n.flag(ROUTE))
    }

    /// Lane whose centerline lies closest to `p`; ties go to the smaller id.
    pub fn nearest_lane(&self, p: WorldPoint) -> Option<(&str, f64)> {
        let mut best: Option<(&str, f64)> = None;
        for (id, path) in &self.lane_paths {
            let d = path.project(p).d_proj.abs();
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((id.as_str(), d));
            }
        }
        best
    }

    /// Lane holding a `contains` edge to `entity`.
    pub fn lane_of(&self, entity: &str) -> Option<&str> {
        self.relations
            .iter()
            .find(|r| r.to == entity && r.label == RelationLabel::Contains)
            .map(|r| r.from.as_str())
    }

    pub fn entity_state(&self, id: &str) -> Result<EntityState> {
        let node = self.nodes.get(id).ok_or_else(|| Error::UnknownNode(id.to_string()))?;
        let (Some(x), Some(y)) = (node.number("x"), node.number("y")) else {
            return Err(Error::MissingPosition(id.to_string()));
        };
        Ok(EntityState {
            id: id.to_string(),
            position: WorldPoint::new(x, y),
            v: node.number("v").unwrap_or(0.0),
            heading: node.number("heading").unwrap_or(0.0),
            timestamp: node.number("timestamp").unwrap_or(0.0),
        })
    }

    /// Positioned markings flagged as obstacles, as stationary entities.
    pub fn static_obstacles(&self) -> Vec<EntityState> {
        self.nodes
            .values()
            .filter(|n| n.label == NodeLabel::Marking && n.flag(OBSTACLE))
            .filter_map(|n| {
                let (x, y) = (n.number("x")?, n.number("y")?);
                Some(EntityState::new(n.id.clone(), WorldPoint::new(x, y), 0.0, 0.0, 0.0))
            })
            .collect()
    }

    /// Euclidean distance between two entities in the world frame.
    pub fn distance_between(&self, a: &str, b: &str) -> Result<f64> {
        let pa = self.entity_state(a)?.position;
        let pb = self.entity_state(b)?.position;
        Ok(pa.distance(&pb))
    }

    /// Records a measurement of `state` by `sensor`. Measurements arriving
    /// within `push_period` of the last push for the same sensor/entity pair
    /// are held back; the latest held one is pushed by [`Self::flush_pending`].
    pub fn ingest_measurement(&mut self, sensor: &str, state: EntityState, push_period: f64) -> Result<IngestOutcome> {
        if self.label_of(sensor)? != NodeLabel::Sensor {
            return Err(Error::param("sensor", format!("`{sensor}` is not a sensor node")));
        }
        if !state.position.is_finite() || !state.v.is_finite() || !state.timestamp.is_finite() {
            return Err(Error::NonFinite("entity state"));
        }
        let key = (sensor.to_string(), state.id.clone());
        let entry = self.push.entry(key).or_default();
        if let Some(last) = entry.last_push {
            if state.timestamp < last {
                return Err(Error::param("timestamp", format!("non-monotone for `{}`", state.id)));
            }
            if state.timestamp - last < push_period - 1e-9 {
                entry.pending = Some(state);
                return Ok(IngestOutcome::Coalesced);
            }
        }
        entry.last_push = Some(state.timestamp);
        entry.pending = None;
        let created = self.apply_state(sensor, &state)?;
        Ok(IngestOutcome::Applied { created })
    }

    /// Pushes held-back measurements whose push period has elapsed by `now`.
    pub fn flush_pending(&mut self, now: f64, push_period: f64) -> Result<usize> {
        let due: Vec<(NodeId, EntityState)> = self
            .push
            .iter_mut()
            .filter(|(_, p)| p.last_push.is_none_or(|t| now - t >= push_period - 1e-9))
            .filter_map(|((sensor, _), p)| p.pending.take().map(|s| (sensor.clone(), s)))
            .collect();
        for (sensor, state) in &due {
            if let Some(p) = self.push.get_mut(&(sensor.clone(), state.id.clone())) {
                p.last_push = Some(now);
            }
            self.apply_state(sensor, state)?;
        }
        Ok(due.len())
    }

    /// Fuses new measurements with the entity's last state instead of
    /// overwriting it.
    pub fn set_tracking(&mut self, gains: Option<TrackingGains>) {
        self.tracking = gains;
    }

    fn apply_state(&mut self, sensor: &str, state: &EntityState) -> Result<bool> {
        let created = !self.nodes.contains_key(&state.id);
        let fused;
        let state = match (self.tracking, created) {
            (Some(g), false) => match self.entity_state(&state.id) {
                Ok(prev) => {
                    fused = g.fuse(&prev, state);
                    &fused
                }
                Err(_) => state,
            },
            _ => state,
        };
        if created {
            self.add_node(Node::new(state.id.clone(), NodeLabel::Vehicle))?;
        } else if self.label_of(&state.id)? != NodeLabel::Vehicle {
            return Err(Error::param("entity", format!("`{}` is not a vehicle node", state.id)));
        }
        let node = self.nodes.get_mut(&state.id).expect("inserted above");
        for (k, v) in [
            ("x", state.position.x),
            ("y", state.position.y),
            ("v", state.v),
            ("heading", state.heading),
            ("timestamp", state.timestamp),
        ] {
            node.attributes.insert(k.to_string(), AttrValue::Number(v));
        }
        self.add_relation(sensor, RelationLabel::HasMeasurement, &state.id)?;
        let old: Vec<NodeId> = self
            .sources(&state.id, RelationLabel::Contains)
            .map(str::to_string)
            .collect();
        let Some((nearest, d_nearest)) = self.nearest_lane(state.position) else {
            for lane in old {
                self.remove_relation(&lane, RelationLabel::Contains, &state.id);
            }
            return Ok(created);
        };
        // keep the current lane unless another one is clearly closer
        let keep = old.first().filter(|lane| {
            self.lane_paths
                .get(lane.as_str())
                .is_some_and(|p| p.project(state.position).d_proj.abs() <= d_nearest + LANE_KEEP_MARGIN_M)
        });
        let lane = keep.cloned().unwrap_or_else(|| nearest.to_string());
        for l in old.iter().filter(|l| **l != lane) {
            self.remove_relation(l, RelationLabel::Contains, &state.id);
        }
        self.add_relation(&lane, RelationLabel::Contains, &state.id)?;
        Ok(created)
    }

    pub fn snapshot(&self) -> GraphSnapshot {
        GraphSnapshot {
            nodes: self.nodes.values().cloned().collect(),
            relations: self.relations.iter().cloned().collect(),
        }
    }

    pub fn from_snapshot(snapshot: GraphSnapshot) -> Result<Self> {
        let mut g = MapGraph::new();
        for n in snapshot.nodes {
            g.add_node(n)?;
        }
        for r in snapshot.relations {
            g.add_relation(&r.from, r.label, &r.to)?;
        }
        Ok(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_lanes() -> MapGraph {
        let mut g = MapGraph::new();
        g.add_node(Node::lane(
            "L1",
            vec![WorldPoint::new(0.0, 0.0), WorldPoint::new(100.0, 0.0)],
        ))
        .unwrap();
        g.add_node(Node::lane(
            "L2",
            vec![WorldPoint::new(0.0, 3.5), WorldPoint::new(100.0, 3.5)],
        ))
        .unwrap();
        g.add_node(Node::sensor("S1", "camera")).unwrap();
        g
    }

    #[test]
    fn schema_enforced() {
        let mut g = two_lanes();
        g.add_node(Node::new("V1", NodeLabel::Vehicle)).unwrap();
        g.add_node(Node::new("V2", NodeLabel::Vehicle)).unwrap();
        g.add_relation("L1", RelationLabel::Contains, "V1").unwrap();
        assert!(matches!(
            g.add_relation("V1", RelationLabel::Contains, "L1"),
            Err(Error::SchemaViolation { .. })
        ));
        g.add_relation("S1", RelationLabel::HasMeasurement, "V2").unwrap();
        assert!(matches!(
            g.add_relation("S1", RelationLabel::HasMeasurement, "nope"),
            Err(Error::UnknownNode(_))
        ));
        // idempotent
        g.add_relation("L1", RelationLabel::Contains, "V1").unwrap();
        assert_eq!(g.relations().count(), 2);
    }

    #[test]
    fn road_has_at_most_two_half_roads() {
        let mut g = MapGraph::new();
        g.add_node(Node::new("road", NodeLabel::Road)).unwrap();
        for h in ["h1", "h2", "h3"] {
            g.add_node(Node::new(h, NodeLabel::HalfRoad)).unwrap();
        }
        g.add_relation("road", RelationLabel::HasPart, "h1").unwrap();
        g.add_relation("road", RelationLabel::HasPart, "h2").unwrap();
        assert!(g.add_relation("road", RelationLabel::HasPart, "h3").is_err());
    }

    #[test]
    fn node_invariants() {
        let mut g = MapGraph::new();
        assert!(matches!(
            g.add_node(Node::new("lane", NodeLabel::LaneSegment)),
            Err(Error::MissingCenterline(_))
        ));
        assert!(g.add_node(Node::new("s", NodeLabel::Sensor)).is_err());
        g.add_node(Node::new("x", NodeLabel::Road)).unwrap();
        assert!(matches!(
            g.add_node(Node::new("x", NodeLabel::Road)),
            Err(Error::DuplicateNode(_))
        ));
    }

    #[test]
    fn first_sighting_creates_node_and_edges() {
        let mut g = two_lanes();
        let s = EntityState::new("V3", WorldPoint::new(10.0, 0.4), 5.0, 0.0, 0.0);
        assert_eq!(
            g.ingest_measurement("S1", s, 0.1).unwrap(),
            IngestOutcome::Applied { created: true }
        );
        assert_eq!(g.node("V3").unwrap().label, NodeLabel::Vehicle);
        assert_eq!(g.lane_of("V3"), Some("L1"));
        assert_eq!(
            g.targets("S1", RelationLabel::HasMeasurement).collect::<Vec<_>>(),
            vec!["V3"]
        );
        assert_eq!(g.relations().count(), 2);
    }

    #[test]
    fn resighting_moves_contains_edge() {
        let mut g = two_lanes();
        g.ingest_measurement(
            "S1",
            EntityState::new("V3", WorldPoint::new(10.0, 0.4), 5.0, 0.0, 0.0),
            0.1,
        )
        .unwrap();
        let p = WorldPoint::new(20.0, 3.1);
        g.ingest_measurement("S1", EntityState::new("V3", p, 5.0, 0.0, 1.0), 0.1)
            .unwrap();
        // re-projection oracle
        let expected = ["L1", "L2"]
            .into_iter()
            .min_by(|a, b| {
                let da = g.lane_path(a).unwrap().project(p).d_proj.abs();
                let db = g.lane_path(b).unwrap().project(p).d_proj.abs();
                da.total_cmp(&db)
            })
            .unwrap();
        assert_eq!(g.lane_of("V3"), Some(expected));
        assert_eq!(g.sources("V3", RelationLabel::Contains).count(), 1);
    }

    #[test]
    fn lane_kept_near_the_boundary() {
        let mut g = two_lanes();
        let at = |y: f64, t: f64| EntityState::new("V4", WorldPoint::new(10.0 + t, y), 1.0, 0.0, t);
        g.ingest_measurement("S1", at(0.0, 0.0), 0.1).unwrap();
        // past the midline but within the margin
        g.ingest_measurement("S1", at(1.75 + 0.4, 1.0), 0.1).unwrap();
        assert_eq!(g.lane_of("V4"), Some("L1"));
        // clearly closer to L2
        g.ingest_measurement("S1", at(1.75 + 0.6, 2.0), 0.1).unwrap();
        assert_eq!(g.lane_of("V4"), Some("L2"));
        assert_eq!(g.sources("V4", RelationLabel::Contains).count(), 1);
        g.ingest_measurement("S1", at(1.5, 3.0), 0.1).unwrap();
        assert_eq!(g.lane_of("V4"), Some("L2"));
    }

    #[test]
    fn tracking_blends_prediction_and_measurement() {
        let gains = TrackingGains {
            enabled: true,
            alpha: 0.25,
            beta: 0.5,
        };
        gains.validate().unwrap();
        let prev = EntityState::new("V", WorldPoint::new(0.0, 0.0), 10.0, 0.0, 0.0);
        let meas = EntityState::new("V", WorldPoint::new(2.0, 0.4), 12.0, 0.1, 0.1);
        let f = gains.fuse(&prev, &meas);
        // prediction (1, 0), corrected by a quarter of the innovation
        assert!((f.position.x - 1.25).abs() < 1e-12);
        assert!((f.position.y - 0.1).abs() < 1e-12);
        assert!((f.v - 11.0).abs() < 1e-12);
        assert_eq!(f.heading, 0.1);
        let raw = TrackingGains {
            enabled: false,
            ..gains
        }
        .fuse(&prev, &meas);
        assert_eq!(raw, meas);
        assert!(TrackingGains { alpha: 0.0, ..gains }.validate().is_err());

        let mut g = two_lanes();
        g.set_tracking(Some(gains));
        g.ingest_measurement("S1", prev.clone(), 0.1).unwrap();
        g.ingest_measurement("S1", meas, 0.1).unwrap();
        let st = g.entity_state("V").unwrap();
        assert!((st.position.x - 1.25).abs() < 1e-12);
    }

    #[test]
    fn push_period_coalesces_high_rate_input() {
        let mut g = two_lanes();
        let mut applied = 0;
        for k in 0..100 {
            let t = k as f64 * 0.01;
            let s = EntityState::new("V1", WorldPoint::new(t * 5.0, 0.0), 5.0, 0.0, t);
            if let IngestOutcome::Applied { .. } = g.ingest_measurement("S1", s, 0.1).unwrap() {
                applied += 1;
            }
        }
        assert!(applied <= 10, "{applied}");
        assert!(applied >= 9);
        // the last measurement (t = 0.99) was coalesced; flushing pushes it
        assert_eq!(g.flush_pending(1.0, 0.1).unwrap(), 1);
        assert!((g.entity_state("V1").unwrap().timestamp - 0.99).abs() < 1e-12);
    }

    #[test]
    fn ingest_errors() {
        let mut g = two_lanes();
        let s = EntityState::new("V1", WorldPoint::new(1.0, 0.0), 5.0, 0.0, 1.0);
        assert!(matches!(
            g.ingest_measurement("nope", s.clone(), 0.1),
            Err(Error::UnknownNode(_))
        ));
        assert!(g.ingest_measurement("L1", s.clone(), 0.1).is_err());
        g.ingest_measurement("S1", s, 0.1).unwrap();
        let earlier = EntityState::new("V1", WorldPoint::new(1.0, 0.0), 5.0, 0.0, 0.5);
        assert!(g.ingest_measurement("S1", earlier, 0.1).is_err());
    }

    #[test]
    fn distances() {
        let mut g = two_lanes();
        g.ingest_measurement(
            "S1",
            EntityState::new("A", WorldPoint::new(0.0, 0.0), 0.0, 0.0, 0.0),
            0.1,
        )
        .unwrap();
        g.ingest_measurement(
            "S1",
            EntityState::new("B", WorldPoint::new(3.0, 4.0), 0.0, 0.0, 0.0),
            0.1,
        )
        .unwrap();
        g.ingest_measurement(
            "S1",
            EntityState::new("C", WorldPoint::new(0.0, 0.0), 0.0, 0.0, 0.0),
            0.1,
        )
        .unwrap();
        assert_eq!(g.distance_between("A", "B").unwrap(), 5.0);
        assert_eq!(g.distance_between("A", "C").unwrap(), 0.0);
        g.add_node(Node::new("D", NodeLabel::Vehicle)).unwrap();
        assert!(matches!(g.distance_between("A", "D"), Err(Error::MissingPosition(_))));
    }

    #[test]
    fn snapshot_round_trip() {
        let mut g = two_lanes();
        g.add_relation("L1", RelationLabel::Neighbor(Side::Left), "L2").unwrap();
        g.ingest_measurement(
            "S1",
            EntityState::new("A", WorldPoint::new(5.0, 3.0), 4.0, 0.0, 0.0),
            0.1,
        )
        .unwrap();
        let json = serde_json::to_string(&g.snapshot()).unwrap();
        let back = MapGraph::from_snapshot(serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back.snapshot().relations, g.snapshot().relations);
        assert_eq!(back.snapshot().nodes, g.snapshot().nodes);
        assert_eq!(back.lane_of("A"), Some("L2"));
    }
}
