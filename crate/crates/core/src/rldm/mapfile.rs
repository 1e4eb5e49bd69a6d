//! Text map format: a list of lanes with centerlines, topology and
//! attributes. Parsed from TOML (or JSON) into a [`MapGraph`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::graph::{AttrValue, MapGraph, Node, NodeLabel, RelationLabel, Side, OBSTACLE, SENSOR_TYPE};
use crate::error::{Error, Result};
use crate::geo::{geodetic_to_world, GeoPoint, ProjectionConfig, WorldPoint, MEAN_EARTH_RADIUS_M};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapFrame {
    /// Centerline points are `[x, y]` in meters.
    #[default]
    World,
    /// Centerline points are `[lat, lon]` in degrees.
    Geodetic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaneSpec {
    pub id: String,
    pub centerline: Vec<[f64; 2]>,
    #[serde(default)]
    pub successors: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub left: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub right: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_road: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub attributes: BTreeMap<String, AttrValue>,
    /// Static obstacles on this lane, e.g. cones closing it.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub obstacles: Vec<ObstacleSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleSpec {
    pub id: String,
    /// Position in the map frame.
    pub position: [f64; 2],
    #[serde(default = "default_obstacle_kind")]
    pub kind: String,
}

fn default_obstacle_kind() -> String {
    "cones".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapFile {
    #[serde(default)]
    pub frame: MapFrame,
    /// Reference latitude for the geodetic frame, degrees.
    #[serde(default)]
    pub lat0_deg: f64,
    #[serde(default = "default_radius")]
    pub earth_radius_m: f64,
    pub lanes: Vec<LaneSpec>,
}

fn default_radius() -> f64 {
    MEAN_EARTH_RADIUS_M
}

impl MapFile {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::param("map", e.to_string()))
    }

    fn to_world(&self, p: [f64; 2]) -> Result<WorldPoint> {
        match self.frame {
            MapFrame::World => {
                let w = WorldPoint::new(p[0], p[1]);
                if !w.is_finite() {
                    return Err(Error::NonFinite("centerline point"));
                }
                Ok(w)
            }
            MapFrame::Geodetic => {
                let cfg = ProjectionConfig {
                    r_e: self.earth_radius_m,
                    lat0: self.lat0_deg.to_radians(),
                };
                geodetic_to_world(GeoPoint::from_degrees(p[0], p[1])?, &cfg)
            }
        }
    }

    /// Builds the static layer: one road, a half-road per `half_road` group,
    /// lane segments with their centerlines, and successor/neighbor links.
    pub fn to_graph(&self) -> Result<MapGraph> {
        let mut g = MapGraph::new();
        g.add_node(Node::new("road", NodeLabel::Road))?;
        for lane in &self.lanes {
            let half = format!("road/{}", lane.half_road.as_deref().unwrap_or("forward"));
            if g.node(&half).is_none() {
                g.add_node(Node::new(half.clone(), NodeLabel::HalfRoad))?;
                g.add_relation("road", RelationLabel::HasPart, &half)?;
            }
            let centerline = lane
                .centerline
                .iter()
                .map(|p| self.to_world(*p))
                .collect::<Result<Vec<_>>>()?;
            if centerline.len() < 2 {
                return Err(Error::MissingCenterline(lane.id.clone()));
            }
            let mut node = Node::lane(lane.id.clone(), centerline);
            for (k, v) in &lane.attributes {
                node = node.with_attr(k.clone(), v.clone());
            }
            g.add_node(node)?;
            g.add_relation(&half, RelationLabel::HasPart, &lane.id)?;
            for ob in &lane.obstacles {
                let p = self.to_world(ob.position)?;
                g.add_node(
                    Node::new(ob.id.clone(), NodeLabel::Marking)
                        .with_attr(SENSOR_TYPE, AttrValue::Text(ob.kind.clone()))
                        .with_attr(OBSTACLE, AttrValue::Bool(true))
                        .with_attr("x", AttrValue::Number(p.x))
                        .with_attr("y", AttrValue::Number(p.y)),
                )?;
                g.add_relation(&lane.id, RelationLabel::HasPart, &ob.id)?;
            }
        }
        for lane in &self.lanes {
            for s in &lane.successors {
                g.add_relation(&lane.id, RelationLabel::Successor, s)?;
            }
            if let Some(l) = &lane.left {
                g.add_relation(&lane.id, RelationLabel::Neighbor(Side::Left), l)?;
            }
            if let Some(r) = &lane.right {
                g.add_relation(&lane.id, RelationLabel::Neighbor(Side::Right), r)?;
            }
        }
        Ok(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MAP: &str = r#"
frame = "world"
[[lanes]]
id = "R"
centerline = [[0.0, 0.0], [150.0, 0.0]]
left = "L"
obstacles = [{ id = "cones", position = [150.0, 0.0] }]
[lanes.attributes]
road_type = "highway"
surface = "asphalt"

[[lanes]]
id = "L"
centerline = [[0.0, 3.5], [400.0, 3.5]]
right = "R"
attributes = { route = true, curvature = 0.0 }
"#;

    #[test]
    fn parses_world_map() {
        let g = MapFile::from_toml(MAP).unwrap().to_graph().unwrap();
        assert_eq!(g.neighbor("R", Side::Left), Some("L"));
        assert_eq!(g.neighbor("L", Side::Right), Some("R"));
        assert!(g.is_route_lane("L") && !g.is_route_lane("R"));
        assert_eq!(
            g.node("R").unwrap().attributes.get("surface"),
            Some(&AttrValue::Text("asphalt".into()))
        );
        assert_eq!(g.lanes().count(), 2);
        assert_eq!(g.targets("road/forward", RelationLabel::HasPart).count(), 2);
        let cones = g.static_obstacles();
        assert_eq!(cones.len(), 1);
        assert_eq!(cones[0].id, "cones");
        assert_eq!(cones[0].position, WorldPoint::new(150.0, 0.0));
        assert_eq!(cones[0].v, 0.0);
    }

    #[test]
    fn toml_round_trip() {
        let map = MapFile::from_toml(MAP).unwrap();
        assert_eq!(MapFile::from_toml(&map.to_toml().unwrap()).unwrap(), map);
    }

    #[test]
    fn geodetic_frame_is_converted() {
        let text = r#"
frame = "geodetic"
lat0_deg = 0.0
[[lanes]]
id = "A"
centerline = [[0.0, 0.0], [0.0, 0.001]]
"#;
        let g = MapFile::from_toml(text).unwrap().to_graph().unwrap();
        let len = g.lane_path("A").unwrap().length();
        let expected = MEAN_EARTH_RADIUS_M * 0.001f64.to_radians();
        assert!((len - expected).abs() < 1e-6, "{len}");
    }

    #[test]
    fn rejects_bad_maps() {
        let unknown = r#"
[[lanes]]
id = "A"
centerline = [[0.0, 0.0], [10.0, 0.0]]
left = "Z"
"#;
        assert!(matches!(
            MapFile::from_toml(unknown).unwrap().to_graph(),
            Err(Error::UnknownNode(_))
        ));
        let short = r#"
[[lanes]]
id = "A"
centerline = [[0.0, 0.0]]
"#;
        assert!(MapFile::from_toml(short).unwrap().to_graph().is_err());
        assert!(MapFile::from_toml("lanes = 3").is_err());
    }
}
