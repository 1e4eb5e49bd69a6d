use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::planner::{CostTable, Direction, PlannerOutput, SpeedAdvice, Warning};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleRecord {
    pub id: String,
    pub lane: String,
    /// World position, m.
    pub x: f64,
    pub y: f64,
    /// Speed, m/s.
    pub v: f64,
    /// Acceleration, m/s².
    pub a: f64,
    /// Heading, rad counter-clockwise from east.
    pub heading: f64,
    pub is_ego: bool,
    /// Center distance to the ego, m.
    pub distance_to_ego: f64,
}

/// One row of the risk field: the critical event rate along one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskRow {
    pub path: usize,
    pub target_lane: String,
    pub direction: Direction,
    pub h: usize,
    /// End velocity of the profile, m/s.
    pub end_velocity: f64,
    /// Critical event rate at `s = k * ds`, %/s.
    pub rate_pct: Vec<f64>,
}

/// Critical event rate over (predicted time, profile) for every path,
/// cut to the visualization horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskField {
    pub cycle: usize,
    pub t: f64,
    /// Grid step, s.
    pub ds: f64,
    /// Last grid time, s.
    pub horizon_s: f64,
    pub rows: Vec<RiskRow>,
    pub chosen_path: usize,
    pub chosen_h: usize,
}

impl RiskField {
    pub fn from_table(cycle: usize, t: f64, table: &CostTable, chosen: &PlannerOutput, horizon_s: f64) -> RiskField {
        let n = ((horizon_s / table.ds) + 1e-9).floor() as usize + 1;
        let rows = table
            .cells
            .iter()
            .map(|c| RiskRow {
                path: c.path,
                target_lane: c.target_lane.clone(),
                direction: c.direction,
                h: c.h,
                end_velocity: c.profile.end_velocity,
                rate_pct: c
                    .costs
                    .as_ref()
                    .map(|b| b.rate_trace.iter().take(n).map(|r| r * 100.0).collect())
                    .unwrap_or_default(),
            })
            .collect();
        RiskField {
            cycle,
            t,
            ds: table.ds,
            horizon_s: (n - 1) as f64 * table.ds,
            rows,
            chosen_path: chosen.path_index,
            chosen_h: chosen.h,
        }
    }

    pub fn chosen(&self) -> Option<&RiskRow> {
        self.rows
            .iter()
            .find(|r| r.path == self.chosen_path && r.h == self.chosen_h)
    }

    pub fn max_rate_pct(&self) -> f64 {
        self.rows.iter().flat_map(|r| &r.rate_pct).fold(0.0, |m, v| m.max(*v))
    }

    /// Text block: a header line, the time grid, then one line per sample.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# cycle={} t={:.3} ds={} horizon_s={} chosen_path={} chosen_h={} unit=%/s",
            self.cycle, self.t, self.ds, self.horizon_s, self.chosen_path, self.chosen_h
        );
        let n = self.rows.first().map_or(0, |r| r.rate_pct.len());
        out.push_str("path,target_lane,direction,h,end_velocity");
        for k in 0..n {
            let _ = write!(out, ",{:.1}", k as f64 * self.ds);
        }
        out.push('\n');
        for row in &self.rows {
            let _ = write!(
                out,
                "{},{},{},{},{:.3}",
                row.path,
                row.target_lane,
                direction_str(row.direction),
                row.h,
                row.end_velocity
            );
            for v in &row.rate_pct {
                let _ = write!(out, ",{v:.6}");
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub cycle: usize,
    pub t: f64,
    /// Observed ego speed used by the planner, m/s.
    pub v0: f64,
    pub ego_lane: String,
    pub vehicles: Vec<VehicleRecord>,
    pub raw: PlannerOutput,
    pub committed: PlannerOutput,
    pub warning: Warning,
    pub switched: bool,
    pub command_clamped: bool,
    /// Wall time of observation plus planning, ms. Not exported to CSV.
    pub compute_ms: f64,
    pub risk_field: RiskField,
}

impl TraceRecord {
    pub fn ego(&self) -> Option<&VehicleRecord> {
        self.vehicles.iter().find(|v| v.is_ego)
    }
}

pub fn direction_str(d: Direction) -> &'static str {
    match d {
        Direction::Left => "left",
        Direction::Straight => "straight",
        Direction::Right => "right",
    }
}

pub fn speed_str(s: SpeedAdvice) -> &'static str {
    match s {
        SpeedAdvice::Accelerate => "accelerate",
        SpeedAdvice::Brake => "brake",
        SpeedAdvice::Keep => "keep",
    }
}

fn f(v: f64) -> String {
    format!("{v:.6}")
}

/// Writes one CSV row per cycle. Per-vehicle columns are `<id>_x`,
/// `<id>_y`, `<id>_v`, `<id>_lane` and, for non-ego vehicles, `d_<id>`.
pub fn write_trace_csv<W: Write>(records: &[TraceRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let Some(first) = records.first() else {
        w.flush()?;
        return Ok(());
    };
    let mut header: Vec<String> = [
        "cycle",
        "t",
        "v0",
        "ego_lane",
        "v_tar",
        "p_tar",
        "direction",
        "speed_advice",
        "advice_magnitude",
        "h",
        "r",
        "c",
        "raw_p_tar",
        "raw_h",
        "switched",
        "command_clamped",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for v in &first.vehicles {
        for col in ["x", "y", "v", "lane"] {
            header.push(format!("{}_{col}", v.id));
        }
    }
    for v in first.vehicles.iter().filter(|v| !v.is_ego) {
        header.push(format!("d_{}", v.id));
    }
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![
            r.cycle.to_string(),
            format!("{:.3}", r.t),
            f(r.v0),
            r.ego_lane.clone(),
            f(r.committed.v_tar),
            r.committed.p_tar.clone(),
            direction_str(r.warning.direction).into(),
            speed_str(r.warning.speed).into(),
            f(r.warning.magnitude),
            r.committed.h.to_string(),
            f(r.committed.r),
            f(r.committed.c),
            r.raw.p_tar.clone(),
            r.raw.h.to_string(),
            r.switched.to_string(),
            r.command_clamped.to_string(),
        ];
        if r.vehicles.len() != first.vehicles.len() {
            return Err(Error::Scenario("vehicle set changed within a trace".into()));
        }
        for v in &r.vehicles {
            row.extend([f(v.x), f(v.y), f(v.v), v.lane.clone()]);
        }
        for v in r.vehicles.iter().filter(|v| !v.is_ego) {
            row.push(f(v.distance_to_ego));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// All cycles' risk-field blocks, separated by blank lines.
pub fn write_risk_fields<W: Write>(records: &[TraceRecord], mut out: W) -> Result<()> {
    for r in records {
        out.write_all(r.risk_field.to_text().as_bytes())?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Risk field of one cycle, or `None` when the cycle is not in the trace.
pub fn export_risk_field(records: &[TraceRecord], cycle: usize) -> Option<&RiskField> {
    records.iter().find(|r| r.cycle == cycle).map(|r| &r.risk_field)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdviceChange {
    pub t: f64,
    pub direction: Direction,
    pub speed: SpeedAdvice,
    pub v_tar: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub scenario: String,
    pub cycles: usize,
    /// Advice at t=0 and at every change of direction or speed advice.
    pub advice: Vec<AdviceChange>,
    /// Minimum center distance from the ego per other vehicle, m.
    pub min_distance_m: Vec<(String, f64)>,
    pub final_ego_lane: String,
    pub compute_ms_p50: f64,
    pub compute_ms_p95: f64,
    pub compute_ms_max: f64,
}

/// Nearest-rank percentile of `values`, `q` in `[0, 1]`.
pub fn percentile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len());
    v[rank - 1]
}

impl Summary {
    pub fn from_trace(scenario: &str, records: &[TraceRecord]) -> Summary {
        let mut advice: Vec<AdviceChange> = Vec::new();
        for r in records {
            let changed = advice
                .last()
                .is_none_or(|a| a.direction != r.warning.direction || a.speed != r.warning.speed);
            if changed {
                advice.push(AdviceChange {
                    t: r.t,
                    direction: r.warning.direction,
                    speed: r.warning.speed,
                    v_tar: r.committed.v_tar,
                });
            }
        }
        let mut min_distance_m: Vec<(String, f64)> = Vec::new();
        for r in records {
            for v in r.vehicles.iter().filter(|v| !v.is_ego) {
                match min_distance_m.iter_mut().find(|(id, _)| *id == v.id) {
                    Some((_, d)) => *d = d.min(v.distance_to_ego),
                    None => min_distance_m.push((v.id.clone(), v.distance_to_ego)),
                }
            }
        }
        let times: Vec<f64> = records.iter().map(|r| r.compute_ms).collect();
        Summary {
            scenario: scenario.to_string(),
            cycles: records.len(),
            advice,
            min_distance_m,
            final_ego_lane: records.last().map(|r| r.ego_lane.clone()).unwrap_or_default(),
            compute_ms_p50: percentile(&times, 0.5),
            compute_ms_p95: percentile(&times, 0.95),
            compute_ms_max: times.iter().copied().fold(f64::NAN, f64::max),
        }
    }

    /// Direction advice with consecutive repeats collapsed.
    pub fn direction_sequence(records: &[TraceRecord]) -> Vec<Direction> {
        let mut out: Vec<Direction> = Vec::new();
        for r in records {
            if out.last() != Some(&r.warning.direction) {
                out.push(r.warning.direction);
            }
        }
        out
    }
}
