//! Frame conversions between geodetic, ego-body and world coordinates.
//!
//! The world frame is flat and right-handed: `x` points east, `y` points
//! north, and headings are counter-clockwise from east in radians.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MEAN_EARTH_RADIUS_M: f64 = 6_371_000.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    /// Latitude in radians.
    pub lat: f64,
    /// Longitude in radians.
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        if !lat.is_finite() || !lon.is_finite() {
            return Err(Error::NonFinite("geodetic point"));
        }
        if lat.abs() > std::f64::consts::FRAC_PI_2 {
            return Err(Error::param("lat", format!("{lat} outside [-pi/2, pi/2]")));
        }
        if lon.abs() > std::f64::consts::PI {
            return Err(Error::param("lon", format!("{lon} outside [-pi, pi]")));
        }
        Ok(Self { lat, lon })
    }

    pub fn from_degrees(lat_deg: f64, lon_deg: f64) -> Result<Self> {
        Self::new(lat_deg.to_radians(), lon_deg.to_radians())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WorldPoint {
    pub x: f64,
    pub y: f64,
}

impl WorldPoint {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &WorldPoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn lerp(&self, other: &WorldPoint, w: f64) -> WorldPoint {
        WorldPoint::new((1.0 - w) * self.x + w * other.x, (1.0 - w) * self.y + w * other.y)
    }
}

/// Offset in the ego body frame: `x_rel` forward, `y_rel` to the left.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BodyPoint {
    pub x_rel: f64,
    pub y_rel: f64,
}

impl BodyPoint {
    pub const fn new(x_rel: f64, y_rel: f64) -> Self {
        Self { x_rel, y_rel }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionConfig {
    pub r_e: f64,
    /// Reference latitude (radians), ideally near the map center.
    pub lat0: f64,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        Self {
            r_e: MEAN_EARTH_RADIUS_M,
            lat0: 0.0,
        }
    }
}

impl ProjectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.r_e.is_finite() || !self.lat0.is_finite() {
            return Err(Error::NonFinite("projection config"));
        }
        if self.r_e <= 0.0 {
            return Err(Error::param("r_e", "earth radius must be positive"));
        }
        Ok(())
    }
}

/// Equirectangular projection around `cfg.lat0`.
pub fn geodetic_to_world(p: GeoPoint, cfg: &ProjectionConfig) -> Result<WorldPoint> {
    cfg.validate()?;
    if !p.lat.is_finite() || !p.lon.is_finite() {
        return Err(Error::NonFinite("geodetic point"));
    }
    Ok(WorldPoint::new(cfg.r_e * cfg.lat0.cos() * p.lon, cfg.r_e * p.lat))
}

/// Rotates a body-frame offset by `theta` and translates it to `origin`.
pub fn body_to_world(p: BodyPoint, theta: f64, origin: WorldPoint) -> Result<WorldPoint> {
    if !theta.is_finite() || !p.x_rel.is_finite() || !p.y_rel.is_finite() || !origin.is_finite() {
        return Err(Error::NonFinite("body transform"));
    }
    let (s, c) = theta.sin_cos();
    Ok(WorldPoint::new(
        origin.x + c * p.x_rel - s * p.y_rel,
        origin.y + s * p.x_rel + c * p.y_rel,
    ))
}

/// Inverse of [`body_to_world`].
pub fn world_to_body(p: WorldPoint, theta: f64, origin: WorldPoint) -> Result<BodyPoint> {
    if !theta.is_finite() || !p.is_finite() || !origin.is_finite() {
        return Err(Error::NonFinite("body transform"));
    }
    let (s, c) = theta.sin_cos();
    let (dx, dy) = (p.x - origin.x, p.y - origin.y);
    Ok(BodyPoint::new(c * dx + s * dy, -s * dx + c * dy))
}
