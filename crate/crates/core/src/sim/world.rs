use std::collections::BTreeMap;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::scenario::{Scenario, VehicleMode, VehicleSpec};
use super::trace::{RiskField, TraceRecord, VehicleRecord};
use crate::config::Params;
use crate::error::{Error, Result};
use crate::geo::WorldPoint;
use crate::motion::{blend_paths, path_from, BlendSpec};
use crate::planner::{CycleResult, Direction, Planner, Situation};
use crate::rldm::{stay_path, EntityState, MapGraph, Node, Path, Side};

/// Vehicles follow lane chains up to this length.
const LANE_CHAIN_M: f64 = 5_000.0;
/// Lowest acceleration magnitude the autopilot uses to close in on the
/// target speed, m/s².
const MIN_TRACKING_ACCEL: f64 = 0.5;
const EGO_SENSOR: &str = "gnss";
const OTHER_SENSOR: &str = "camera";

/// Live steering input for a human-driven ego.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EgoCommand {
    /// Longitudinal acceleration, m/s². Clamped to `[a_min, a_max]`.
    pub acceleration_mps2: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lane_request: Option<Side>,
}

#[derive(Debug, Clone)]
struct LaneChange {
    target: String,
    target_path: Path,
    l_end: f64,
}

#[derive(Debug, Clone)]
struct Vehicle {
    spec: VehicleSpec,
    lane: String,
    path: Path,
    s: f64,
    v: f64,
    a: f64,
    change: Option<LaneChange>,
}

impl Vehicle {
    fn position(&self) -> WorldPoint {
        self.path.point_at(self.s)
    }

    fn heading(&self) -> f64 {
        self.path.heading_at(self.s)
    }

    fn true_state(&self, t: f64) -> EntityState {
        EntityState::new(self.spec.id.clone(), self.position(), self.v, self.heading(), t)
    }
}

/// One scenario session: true vehicle states, the map they are observed
/// into, and the planner.
#[derive(Debug, Clone)]
pub struct World {
    scenario: Scenario,
    graph: MapGraph,
    vehicles: Vec<Vehicle>,
    ego: usize,
    planner: Planner,
    rng: ChaCha8Rng,
    cycle: usize,
    last: Option<CycleResult>,
}

impl World {
    pub fn new(scenario: Scenario) -> Result<World> {
        scenario.validate()?;
        let mut graph = scenario.graph()?;
        graph.add_node(Node::sensor(EGO_SENSOR, "gnss"))?;
        graph.add_node(Node::sensor(OTHER_SENSOR, "camera"))?;
        graph.set_tracking(scenario.params.tracking.enabled.then_some(scenario.params.tracking));
        let mut vehicles = Vec::with_capacity(scenario.vehicles.len());
        let mut uncertainty = BTreeMap::new();
        for spec in &scenario.vehicles {
            let path = stay_path(&graph, &spec.lane, spec.arclength + LANE_CHAIN_M)?;
            if let Some(u) = spec.uncertainty {
                uncertainty.insert(spec.id.clone(), u);
            }
            vehicles.push(Vehicle {
                spec: spec.clone(),
                lane: spec.lane.clone(),
                s: spec.arclength,
                v: spec.velocity,
                a: 0.0,
                path,
                change: None,
            });
        }
        let ego = vehicles.iter().position(|v| v.spec.mode.is_ego()).expect("validated");
        let mut planner = Planner::new(scenario.params);
        planner.uncertainty = uncertainty;
        Ok(World {
            rng: ChaCha8Rng::seed_from_u64(scenario.seed),
            scenario,
            graph,
            vehicles,
            ego,
            planner,
            cycle: 0,
            last: None,
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn params(&self) -> &Params {
        &self.planner.params
    }

    pub fn graph(&self) -> &MapGraph {
        &self.graph
    }

    pub fn cycle(&self) -> usize {
        self.cycle
    }

    pub fn time(&self) -> f64 {
        self.cycle as f64 * self.scenario.dt()
    }

    pub fn is_finished(&self) -> bool {
        self.cycle >= self.scenario.cycles()
    }

    pub fn ego_id(&self) -> &str {
        &self.vehicles[self.ego].spec.id
    }

    /// Lane the ego is currently assigned to.
    pub fn ego_lane(&self) -> &str {
        &self.vehicles[self.ego].lane
    }

    pub fn ego_changing_lane(&self) -> bool {
        self.vehicles[self.ego].change.is_some()
    }

    pub fn last_cycle(&self) -> Option<&CycleResult> {
        self.last.as_ref()
    }

    /// Advances the world by one period (except before the first cycle),
    /// observes all vehicles into the map and runs one planning cycle.
    /// `command` steers a human ego; it is ignored otherwise.
    pub fn step(&mut self, command: Option<EgoCommand>) -> Result<TraceRecord> {
        let mut clamped = false;
        if self.cycle > 0 {
            clamped = self.advance(command)?;
        } else if let Some(EgoCommand {
            lane_request: Some(side),
            ..
        }) = command
        {
            if self.vehicles[self.ego].spec.mode == VehicleMode::HumanEgo {
                self.start_lane_change(self.ego, side)?;
            }
        }
        let t = self.time();
        let started = Instant::now();
        let observed = self.observe(t)?;
        let ego_id = self.ego_id().to_string();
        // speed from the ego's own measurement, not the lagging track
        let mut ego_obs = self.graph.entity_state(&ego_id)?;
        if let Some(own) = observed.iter().find(|s| s.id == ego_id) {
            ego_obs.v = own.v;
        }
        let others = observed
            .iter()
            .filter(|s| s.id != ego_id)
            .map(|s| self.graph.entity_state(&s.id))
            .collect::<Result<Vec<EntityState>>>()?;
        let situation = Situation::build(
            &self.graph,
            &ego_obs,
            &others,
            &self.planner.params,
            &self.planner.uncertainty,
        )?;
        let result = self.planner.cycle(&situation, t)?;
        let compute_ms = started.elapsed().as_secs_f64() * 1e3;
        let record = self.record(t, &situation, &result, clamped, compute_ms);
        self.last = Some(result);
        self.cycle += 1;
        Ok(record)
    }

    /// Runs the remaining cycles with no live commands.
    pub fn run(&mut self) -> Result<Vec<TraceRecord>> {
        let mut out = Vec::with_capacity(self.scenario.cycles());
        while !self.is_finished() {
            out.push(self.step(None)?);
        }
        Ok(out)
    }

    fn observe(&mut self, t: f64) -> Result<Vec<EntityState>> {
        let noise = self.scenario.noise;
        let dt = self.scenario.dt();
        let mut out = Vec::with_capacity(self.vehicles.len());
        for (i, veh) in self.vehicles.iter().enumerate() {
            let mut st = veh.true_state(t);
            if noise.enabled {
                let pos = Normal::new(0.0, noise.position_sigma_m).map_err(|e| Error::param("noise", e.to_string()))?;
                let vel =
                    Normal::new(0.0, noise.velocity_sigma_mps).map_err(|e| Error::param("noise", e.to_string()))?;
                st.position.x += pos.sample(&mut self.rng);
                st.position.y += pos.sample(&mut self.rng);
                st.v = (st.v + vel.sample(&mut self.rng)).max(0.0);
            }
            let sensor = if i == self.ego { EGO_SENSOR } else { OTHER_SENSOR };
            self.graph.ingest_measurement(sensor, st.clone(), dt)?;
            out.push(st);
        }
        self.graph.flush_pending(t, dt)?;
        Ok(out)
    }

    fn advance(&mut self, command: Option<EgoCommand>) -> Result<bool> {
        let dt = self.scenario.dt();
        let t_next = self.time() + dt;
        let probe = self.planner.params.probe;
        let mut clamped = false;
        let mut lane_request = None;
        for i in 0..self.vehicles.len() {
            let veh = &self.vehicles[i];
            let (v_next, a) = match veh.spec.mode {
                VehicleMode::ConstantVelocity => (veh.v, 0.0),
                VehicleMode::Scripted => {
                    let v = veh.spec.scheduled_velocity(t_next);
                    (v, (v - veh.v) / dt)
                }
                VehicleMode::HumanEgo => {
                    let cmd = command.unwrap_or_default();
                    lane_request = cmd.lane_request;
                    let a_raw = if cmd.acceleration_mps2.is_finite() {
                        cmd.acceleration_mps2
                    } else {
                        0.0
                    };
                    let a = a_raw.clamp(probe.a_min, probe.a_max);
                    clamped |= a != cmd.acceleration_mps2;
                    let v = (veh.v + a * dt).clamp(0.0, probe.v_max);
                    (v, a)
                }
                VehicleMode::FollowAdvice => match &self.last {
                    Some(res) => {
                        let target = res.committed.v_tar;
                        let rate = res
                            .table
                            .find(&res.committed.selection())
                            .map_or(0.0, |c| c.profile.acceleration.abs())
                            .max(MIN_TRACKING_ACCEL);
                        let step = (target - veh.v).clamp(-rate * dt, rate * dt);
                        ((veh.v + step).clamp(0.0, probe.v_max), step / dt)
                    }
                    None => (veh.v, 0.0),
                },
            };
            let veh = &mut self.vehicles[i];
            veh.s += 0.5 * (veh.v + v_next) * dt;
            veh.v = v_next;
            veh.a = a;
            if veh.s >= veh.path.length() {
                veh.s = veh.path.length();
                veh.v = 0.0;
            }
            self.finish_lane_change(i);
        }
        let ego = &self.vehicles[self.ego];
        if ego.change.is_none() {
            let side = match ego.spec.mode {
                VehicleMode::HumanEgo => lane_request,
                VehicleMode::FollowAdvice => self.last.as_ref().and_then(|r| match r.committed.direction {
                    Direction::Left => Some(Side::Left),
                    Direction::Right => Some(Side::Right),
                    Direction::Straight => None,
                }),
                _ => None,
            };
            if let Some(side) = side {
                self.start_lane_change(self.ego, side)?;
            }
        }
        Ok(clamped)
    }

    /// Starts a blended lane change from the vehicle's true pose, right away
    /// for a human ego and after `blend.s_start` otherwise. Returns false
    /// when there is no neighbor on that side.
    pub fn start_lane_change(&mut self, idx: usize, side: Side) -> Result<bool> {
        let Some(target) = self.graph.neighbor(&self.vehicles[idx].lane, side).map(str::to_string) else {
            return Ok(false);
        };
        let veh = &self.vehicles[idx];
        let pos = veh.position();
        let target_path = stay_path(&self.graph, &target, LANE_CHAIN_M)?;
        let proj = target_path.project(pos);
        let (Ok(ahead), Ok(other)) = (path_from(&veh.path, veh.s), path_from(&target_path, proj.arclength)) else {
            return Ok(false);
        };
        let bc = self.planner.params.blend;
        // a driver's own request starts steering at once
        let s_start = if veh.spec.mode == VehicleMode::HumanEgo {
            0.0
        } else {
            bc.s_start
        };
        let spec = BlendSpec {
            s_start,
            l_c: bc.l_c,
            k: bc.k,
            d_path: proj.d_proj.abs(),
        };
        let blend = blend_paths(&ahead, &other, veh.v, &spec)?;
        let veh = &mut self.vehicles[idx];
        veh.path = blend.path;
        veh.s = 0.0;
        veh.change = Some(LaneChange {
            target,
            target_path,
            l_end: blend.l_end,
        });
        self.finish_lane_change(idx);
        Ok(true)
    }

    fn finish_lane_change(&mut self, idx: usize) {
        let veh = &mut self.vehicles[idx];
        let Some(change) = &veh.change else {
            return;
        };
        if veh.s + 1e-9 < change.l_end && veh.s < veh.path.length() {
            return;
        }
        let change = veh.change.take().expect("checked above");
        let pos = veh.position();
        veh.s = change.target_path.project(pos).arclength;
        veh.path = change.target_path;
        veh.lane = change.target;
    }

    fn record(
        &self,
        t: f64,
        situation: &Situation,
        result: &CycleResult,
        clamped: bool,
        compute_ms: f64,
    ) -> TraceRecord {
        let ego_pos = self.vehicles[self.ego].position();
        let vehicles = self
            .vehicles
            .iter()
            .map(|veh| VehicleRecord {
                id: veh.spec.id.clone(),
                lane: veh.lane.clone(),
                x: veh.position().x,
                y: veh.position().y,
                v: veh.v,
                a: veh.a,
                heading: veh.heading(),
                is_ego: veh.spec.mode.is_ego(),
                distance_to_ego: veh.position().distance(&ego_pos),
            })
            .collect();
        TraceRecord {
            cycle: self.cycle,
            t,
            v0: situation.ego.v,
            ego_lane: self.vehicles[self.ego].lane.clone(),
            vehicles,
            raw: result.raw.clone(),
            committed: result.committed.clone(),
            warning: result.warning,
            switched: result.switched,
            command_clamped: clamped,
            compute_ms,
            risk_field: RiskField::from_table(
                self.cycle,
                t,
                &result.table,
                &result.committed,
                self.planner.params.planner.visualization_horizon_s,
            ),
        }
    }
}
