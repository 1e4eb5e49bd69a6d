use serde::{Deserialize, Serialize};

use super::profile::{ProbeConfig, VelocityProfile};
use crate::error::{Error, Result};
use crate::geo::WorldPoint;
use crate::rldm::Path;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStep {
    /// Predicted time, s.
    pub s: f64,
    pub position: WorldPoint,
    pub arclength: f64,
    pub heading: f64,
    /// Path curvature at the predicted position, 1/m.
    pub curvature: f64,
    pub v: f64,
    pub a: f64,
    pub j: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub steps: Vec<TrajectoryStep>,
    /// Set when the motion ran past the path end and was pinned there.
    pub overrun: bool,
}

impl TrajectorySample {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Velocity vector at step `k` in the world frame.
    pub fn velocity_vector(&self, k: usize) -> (f64, f64) {
        let st = &self.steps[k];
        (st.v * st.heading.cos(), st.v * st.heading.sin())
    }
}

fn place(path: &Path, start: f64, distance: f64) -> (WorldPoint, f64, f64, f64, bool) {
    let s = start + distance;
    let over = s > path.length() + 1e-9;
    let s = s.min(path.length());
    (path.point_at(s), s, path.heading_at(s), path.curvature_at(s), over)
}

fn check_start(path: &Path, start: f64) -> Result<()> {
    if !start.is_finite() || start < -1e-9 || start > path.length() + 1e-9 {
        return Err(Error::param("start_arclength", format!("{start} outside the path")));
    }
    Ok(())
}

/// Rolls `profile` out along `path` from arclength `start` on the
/// prediction grid. Jerk is the step-to-step difference of acceleration,
/// so the ramp end shows up as a single impulse.
pub fn roll_out(
    profile: &VelocityProfile,
    path: &Path,
    start: f64,
    v0: f64,
    cfg: &ProbeConfig,
) -> Result<TrajectorySample> {
    cfg.validate()?;
    check_start(path, start)?;
    let mut steps = Vec::with_capacity(cfg.steps());
    let mut overrun = false;
    let mut prev_a: Option<f64> = None;
    for s in cfg.grid() {
        let v = profile.velocity_at(v0, s).clamp(0.0, cfg.v_max);
        let a = profile.acceleration_at(s);
        let j = prev_a.map_or(0.0, |p| (a - p) / cfg.ds);
        prev_a = Some(a);
        let (position, arclength, heading, curvature, over) = place(path, start, profile.distance_at(v0, s));
        overrun |= over;
        steps.push(TrajectoryStep {
            s,
            position,
            arclength,
            heading,
            curvature,
            v,
            a,
            j,
        });
    }
    Ok(TrajectorySample { steps, overrun })
}

/// Constant-velocity prediction of another vehicle along its path.
pub fn predict_other(v: f64, path: &Path, start: f64, cfg: &ProbeConfig) -> Result<TrajectorySample> {
    cfg.validate()?;
    check_start(path, start)?;
    if !v.is_finite() || v < 0.0 {
        return Err(Error::param("v", format!("{v} must be a non-negative speed")));
    }
    let mut overrun = false;
    let steps = cfg
        .grid()
        .map(|s| {
            let (position, arclength, heading, curvature, over) = place(path, start, v * s);
            overrun |= over;
            TrajectoryStep {
                s,
                position,
                arclength,
                heading,
                curvature,
                v,
                a: 0.0,
                j: 0.0,
            }
        })
        .collect();
    Ok(TrajectorySample { steps, overrun })
}
