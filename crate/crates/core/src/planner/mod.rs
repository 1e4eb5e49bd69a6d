//! Probing loop: cost every (path, velocity profile) sample of a
//! situation, pick the cheapest, filter the choice through hysteresis and
//! turn it into driver advice.

mod hysteresis;
mod situation;

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

pub use hysteresis::{HysteresisState, Selection};
pub use situation::{CandidatePath, Situation, SituationEntity};

use crate::config::Params;
use crate::costs::{evaluate, CostBreakdown, UncertaintyParams};
use crate::error::{Error, Result};
use crate::motion::{roll_out, sample_profiles, VelocityProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Left,
    Straight,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpeedAdvice {
    Accelerate,
    Brake,
    Keep,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Warning {
    pub speed: SpeedAdvice,
    pub direction: Direction,
    /// `|v0 - v_tar|`, m/s.
    pub magnitude: f64,
}

/// Speed advice from the gap between current and target velocity, plus the
/// committed path direction.
pub fn derive_warning(v0: f64, v_tar: f64, direction: Direction, dead_band: f64) -> Warning {
    let speed = if v_tar - v0 > dead_band {
        SpeedAdvice::Accelerate
    } else if v0 - v_tar > dead_band {
        SpeedAdvice::Brake
    } else {
        SpeedAdvice::Keep
    };
    Warning {
        speed,
        direction,
        magnitude: (v0 - v_tar).abs(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostCell {
    pub path: usize,
    pub target_lane: String,
    pub direction: Direction,
    pub h: usize,
    pub profile: VelocityProfile,
    /// `None` when the sample could not be costed; such cells are never
    /// selected.
    pub costs: Option<CostBreakdown>,
    pub overrun: bool,
}

impl CostCell {
    pub fn is_valid(&self) -> bool {
        self.costs.as_ref().is_some_and(|c| c.c.is_finite())
    }

    pub fn total(&self) -> f64 {
        self.costs.as_ref().map_or(f64::NAN, |c| c.c)
    }

    pub fn risk(&self) -> f64 {
        self.costs.as_ref().map_or(f64::NAN, |c| c.r)
    }

    pub fn selection(&self) -> Selection {
        Selection {
            target_lane: self.target_lane.clone(),
            h: self.h,
        }
    }
}

/// All costed samples of one planning cycle, path-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostTable {
    pub v0: f64,
    pub ds: f64,
    pub cells: Vec<CostCell>,
}

impl CostTable {
    pub fn find(&self, sel: &Selection) -> Option<&CostCell> {
        self.cells
            .iter()
            .find(|c| c.target_lane == sel.target_lane && c.h == sel.h)
    }
}

/// Costs every (path, profile) pair of the situation.
pub fn probe(
    situation: &Situation,
    params: &Params,
    uncertainty: &BTreeMap<String, UncertaintyParams>,
) -> Result<CostTable> {
    let probe_cfg = &params.probe;
    let v0 = situation.ego.v;
    let profiles = sample_profiles(v0, probe_cfg)?;
    let ego_unc = uncertainty
        .get(&situation.ego.id)
        .copied()
        .unwrap_or(params.uncertainty);
    let others: Vec<_> = situation.others.iter().map(|o| o.prediction.clone()).collect();
    let mut cells = Vec::with_capacity(situation.candidates.len() * profiles.len());
    for (pi, cand) in situation.candidates.iter().enumerate() {
        for prof in &profiles {
            let costed = roll_out(prof, &cand.path, cand.start, v0, probe_cfg).and_then(|sample| {
                let costs = evaluate(
                    &sample,
                    &others,
                    &ego_unc,
                    &params.risk,
                    &params.benefit,
                    probe_cfg.ds,
                    cand.on_route,
                )?;
                Ok((costs, sample.overrun))
            });
            let (costs, overrun) = match costed {
                Ok((c, o)) => (Some(c), o),
                Err(_) => (None, false),
            };
            cells.push(CostCell {
                path: pi,
                target_lane: cand.target_lane.clone(),
                direction: cand.direction,
                h: prof.index,
                profile: *prof,
                costs,
                overrun,
            });
        }
    }
    Ok(CostTable {
        v0,
        ds: probe_cfg.ds,
        cells,
    })
}

fn tie_order(a: &CostCell, b: &CostCell, v0: f64) -> Ordering {
    a.total()
        .total_cmp(&b.total())
        .then_with(|| (a.direction != Direction::Straight).cmp(&(b.direction != Direction::Straight)))
        .then_with(|| {
            let da = (a.profile.end_velocity - v0).abs();
            let db = (b.profile.end_velocity - v0).abs();
            da.total_cmp(&db)
        })
        .then_with(|| a.target_lane.cmp(&b.target_lane))
        .then_with(|| a.h.cmp(&b.h))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerOutput {
    pub v_tar: f64,
    /// Target lane of the chosen path.
    pub p_tar: String,
    pub path_index: usize,
    pub h: usize,
    pub direction: Direction,
    pub r: f64,
    pub c: f64,
}

impl PlannerOutput {
    pub fn from_cell(cell: &CostCell) -> Self {
        PlannerOutput {
            v_tar: cell.profile.end_velocity,
            p_tar: cell.target_lane.clone(),
            path_index: cell.path,
            h: cell.h,
            direction: cell.direction,
            r: cell.risk(),
            c: cell.total(),
        }
    }

    pub fn selection(&self) -> Selection {
        Selection {
            target_lane: self.p_tar.clone(),
            h: self.h,
        }
    }
}

/// Global argmin of the total cost. Ties prefer the stay path, then the
/// smaller speed change.
pub fn select(table: &CostTable) -> Result<PlannerOutput> {
    table
        .cells
        .iter()
        .filter(|c| c.is_valid())
        .min_by(|a, b| tie_order(a, b, table.v0))
        .map(PlannerOutput::from_cell)
        .ok_or(Error::NoValidCell)
}

/// Result of one planning cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleResult {
    /// Unfiltered argmin.
    pub raw: PlannerOutput,
    /// Hysteresis-filtered output the driver sees.
    pub committed: PlannerOutput,
    pub warning: Warning,
    pub switched: bool,
    pub table: CostTable,
}

/// Stateful planner: probing plus hysteresis across cycles.
#[derive(Debug, Clone, Default)]
pub struct Planner {
    pub params: Params,
    pub uncertainty: BTreeMap<String, UncertaintyParams>,
    hysteresis: HysteresisState,
}

impl Planner {
    pub fn new(params: Params) -> Self {
        Self {
            params,
            uncertainty: BTreeMap::new(),
            hysteresis: HysteresisState::default(),
        }
    }

    pub fn hysteresis(&self) -> &HysteresisState {
        &self.hysteresis
    }

    pub fn reset(&mut self) {
        self.hysteresis = HysteresisState::default();
    }

    pub fn cycle(&mut self, situation: &Situation, now: f64) -> Result<CycleResult> {
        let table = probe(situation, &self.params, &self.uncertainty)?;
        self.commit(table, situation.ego.v, now)
    }

    /// Selection, hysteresis and warning for an already costed table.
    pub fn commit(&mut self, table: CostTable, v0: f64, now: f64) -> Result<CycleResult> {
        let raw = select(&table)?;
        let committed_cell = self.hysteresis.committed().and_then(|sel| table.find(sel));
        let (sel, switched) = self.hysteresis.step(
            raw.selection(),
            raw.r,
            committed_cell.map(CostCell::risk),
            now,
            self.params.planner.hysteresis_s,
        );
        let committed = table
            .find(&sel)
            .map(PlannerOutput::from_cell)
            .ok_or(Error::NoValidCell)?;
        let warning = derive_warning(v0, committed.v_tar, committed.direction, self.params.planner.dead_band);
        Ok(CycleResult {
            raw,
            committed,
            warning,
            switched,
            table,
        })
    }
}
