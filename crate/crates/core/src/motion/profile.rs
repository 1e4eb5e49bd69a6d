use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    /// Number of velocity profiles per path.
    pub n_t: usize,
    pub v_max: f64,
    pub a_max: f64,
    /// Braking limit, negative.
    pub a_min: f64,
    /// Prediction horizon, s.
    pub s_h: f64,
    /// Prediction step, s.
    pub ds: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            n_t: 21,
            v_max: 20.0,
            a_max: 3.0,
            a_min: -4.0,
            s_h: 12.0,
            ds: 0.1,
        }
    }
}

impl ProbeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_t < 3 {
            return Err(Error::param("n_t", "at least three profiles are needed"));
        }
        if self.v_max.is_nan() || self.v_max <= 0.0 || !self.v_max.is_finite() {
            return Err(Error::param("v_max", "must be positive"));
        }
        if !(self.a_min < 0.0 && self.a_max > 0.0) || !self.a_min.is_finite() || !self.a_max.is_finite() {
            return Err(Error::param("a_min/a_max", "need a_min < 0 < a_max"));
        }
        if !(self.ds > 0.0 && self.ds < self.s_h) || !self.s_h.is_finite() {
            return Err(Error::param("ds/s_h", "need 0 < ds < s_h"));
        }
        Ok(())
    }

    /// Number of points on the prediction grid `0, ds, ..., s_h`.
    pub fn steps(&self) -> usize {
        (self.s_h / self.ds).round() as usize + 1
    }

    pub fn grid(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.steps()).map(move |k| k as f64 * self.ds)
    }
}

/// A ramp at constant acceleration to `end_velocity`, then constant speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelocityProfile {
    pub index: usize,
    pub end_velocity: f64,
    pub acceleration: f64,
    pub ramp_duration: f64,
}

impl VelocityProfile {
    pub fn velocity_at(&self, v0: f64, s: f64) -> f64 {
        if s >= self.ramp_duration {
            self.end_velocity
        } else {
            (v0 + self.acceleration * s).max(0.0)
        }
    }

    pub fn acceleration_at(&self, s: f64) -> f64 {
        if s < self.ramp_duration - 1e-12 {
            self.acceleration
        } else {
            0.0
        }
    }

    /// Distance travelled after `s` seconds, closed form.
    pub fn distance_at(&self, v0: f64, s: f64) -> f64 {
        let t = s.min(self.ramp_duration);
        let ramp = v0 * t + 0.5 * self.acceleration * t * t;
        ramp + self.end_velocity * (s - t).max(0.0)
    }
}

/// Samples `n_t` end velocities evenly on `[0, v_max]` and the ramp
/// acceleration reaching each from `v0`.
pub fn sample_profiles(v0: f64, cfg: &ProbeConfig) -> Result<Vec<VelocityProfile>> {
    cfg.validate()?;
    if !v0.is_finite() || v0 < 0.0 {
        return Err(Error::param("v0", format!("{v0} must be a non-negative speed")));
    }
    if v0 > cfg.v_max {
        return Err(Error::param("v0", format!("{v0} exceeds v_max {}", cfg.v_max)));
    }
    let last = (cfg.n_t - 1) as f64;
    Ok((0..cfg.n_t)
        .map(|h| {
            let end_velocity = h as f64 / last * cfg.v_max;
            let acceleration = if end_velocity > v0 {
                // v0 < v_max here, so the denominator is positive
                cfg.a_max * (end_velocity - v0) / (cfg.v_max - v0)
            } else if end_velocity < v0 {
                // v0 > 0 here
                cfg.a_min * (v0 - end_velocity) / v0
            } else {
                0.0
            };
            let ramp_duration = if acceleration == 0.0 {
                0.0
            } else {
                (end_velocity - v0).abs() / acceleration.abs()
            };
            VelocityProfile {
                index: h,
                end_velocity,
                acceleration,
                ramp_duration,
            }
        })
        .collect())
}
