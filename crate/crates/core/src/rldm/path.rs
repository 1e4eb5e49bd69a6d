use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::WorldPoint;

/// Maximum spacing between consecutive path points after resampling, meters.
pub const RESAMPLE_SPACING_M: f64 = 1.0;

const MIN_STEP: f64 = 1e-9;

/// Arclength-parameterized polyline with per-point curvature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    points: Vec<WorldPoint>,
    arclength: Vec<f64>,
    curvature: Vec<f64>,
    lanes: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectionResult {
    pub arclength: f64,
    /// Signed lateral offset, positive to the left of the travel direction.
    pub d_proj: f64,
    pub segment: usize,
}

fn cumulative(points: &[WorldPoint]) -> Vec<f64> {
    let mut s = Vec::with_capacity(points.len());
    let mut acc = 0.0;
    for (i, p) in points.iter().enumerate() {
        if i > 0 {
            acc += points[i - 1].distance(p);
        }
        s.push(acc);
    }
    s
}

fn wrap_angle(a: f64) -> f64 {
    let mut a = a % std::f64::consts::TAU;
    if a > std::f64::consts::PI {
        a -= std::f64::consts::TAU;
    } else if a < -std::f64::consts::PI {
        a += std::f64::consts::TAU;
    }
    a
}

/// Half-width of the arclength window used for curvature, meters.
const CURVATURE_WINDOW_M: f64 = 2.0;

/// Signed curvature at each vertex: turn of the chord angle between the
/// farthest vertices within one window behind and ahead, over the chord
/// length. The window keeps single-vertex kinks of densely sampled paths
/// from spiking.
fn vertex_curvature(points: &[WorldPoint], s: &[f64]) -> Vec<f64> {
    let n = points.len();
    let mut k = vec![0.0; n];
    if n < 3 {
        return k;
    }
    let total = s[n - 1];
    for i in 1..n - 1 {
        // symmetric arms keep the estimate centered on the vertex
        let arm = CURVATURE_WINDOW_M.min(s[i]).min(total - s[i]) + MIN_STEP;
        let mut b = i - 1;
        while b > 0 && s[i] - s[b - 1] <= arm {
            b -= 1;
        }
        let mut a = i + 1;
        while a + 1 < n && s[a + 1] - s[i] <= arm {
            a += 1;
        }
        let (back, p, ahead) = (points[b], points[i], points[a]);
        let a0 = (p.y - back.y).atan2(p.x - back.x);
        let a1 = (ahead.y - p.y).atan2(ahead.x - p.x);
        let span = 0.5 * (p.distance(&back) + p.distance(&ahead));
        k[i] = if span > MIN_STEP {
            wrap_angle(a1 - a0) / span
        } else {
            0.0
        };
    }
    k[0] = k[1];
    k[n - 1] = k[n - 2];
    k
}

fn dedup(points: &[WorldPoint]) -> Vec<WorldPoint> {
    let mut out: Vec<WorldPoint> = Vec::with_capacity(points.len());
    for p in points {
        if out.last().is_none_or(|q| q.distance(p) > MIN_STEP) {
            out.push(*p);
        }
    }
    out
}

impl Path {
    /// Builds a path through `points` as given; curvature is computed on
    /// these vertices.
    pub fn from_points(points: &[WorldPoint], lanes: Vec<String>) -> Result<Self> {
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("path point"));
        }
        let points = dedup(points);
        if points.len() < 2 {
            return Err(Error::param("path", "needs at least two distinct points"));
        }
        let arclength = cumulative(&points);
        let curvature = vertex_curvature(&points, &arclength);
        Ok(Self {
            points,
            arclength,
            curvature,
            lanes,
        })
    }

    /// Builds a path through `points`, truncated at `horizon` meters and
    /// resampled to evenly spaced points no further than `spacing` apart.
    /// Curvature is taken from the source vertices and interpolated, so a
    /// coarse but smooth input polyline keeps its curvature after
    /// resampling.
    pub fn resampled(points: &[WorldPoint], spacing: f64, horizon: Option<f64>, lanes: Vec<String>) -> Result<Self> {
        if spacing.is_nan() || spacing <= 0.0 {
            return Err(Error::param("spacing", "must be positive"));
        }
        let source = Path::from_points(points, lanes)?;
        let total = horizon.map_or(source.length(), |h| h.min(source.length()));
        if total <= MIN_STEP {
            return Err(Error::param("horizon", "path would be empty"));
        }
        let n = (total / spacing).ceil().max(1.0) as usize;
        let step = total / n as f64;
        let mut pts = Vec::with_capacity(n + 1);
        let mut kap = Vec::with_capacity(n + 1);
        for i in 0..=n {
            let s = if i == n { total } else { i as f64 * step };
            pts.push(source.point_at(s));
            kap.push(source.curvature_at(s));
        }
        let arclength = cumulative(&pts);
        Ok(Self {
            points: pts,
            arclength,
            curvature: kap,
            lanes: source.lanes,
        })
    }

    pub fn points(&self) -> &[WorldPoint] {
        &self.points
    }

    pub fn arclengths(&self) -> &[f64] {
        &self.arclength
    }

    pub fn curvatures(&self) -> &[f64] {
        &self.curvature
    }

    pub fn lanes(&self) -> &[String] {
        &self.lanes
    }

    pub fn length(&self) -> f64 {
        *self.arclength.last().expect("path has at least two points")
    }

    /// Index `i` of the segment `[i, i + 1]` containing arclength `s`
    /// (clamped to the path).
    fn segment_at(&self, s: f64) -> usize {
        let n = self.points.len();
        match self.arclength.binary_search_by(|x| x.total_cmp(&s)) {
            Ok(i) => i.min(n - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(n - 2),
        }
    }

    fn interp(&self, s: f64) -> (usize, f64) {
        let s = s.clamp(0.0, self.length());
        let i = self.segment_at(s);
        let (s0, s1) = (self.arclength[i], self.arclength[i + 1]);
        let w = if s1 - s0 > MIN_STEP { (s - s0) / (s1 - s0) } else { 0.0 };
        (i, w.clamp(0.0, 1.0))
    }

    /// Position at arclength `s`, clamped to the path ends.
    pub fn point_at(&self, s: f64) -> WorldPoint {
        let (i, w) = self.interp(s);
        self.points[i].lerp(&self.points[i + 1], w)
    }

    /// Tangent heading (radians, CCW from east) at arclength `s`.
    pub fn heading_at(&self, s: f64) -> f64 {
        let (i, _) = self.interp(s);
        let (a, b) = (self.points[i], self.points[i + 1]);
        (b.y - a.y).atan2(b.x - a.x)
    }

    pub fn curvature_at(&self, s: f64) -> f64 {
        let (i, w) = self.interp(s);
        (1.0 - w) * self.curvature[i] + w * self.curvature[i + 1]
    }

    /// Nearest point on the polyline. Ties go to the smaller arclength.
    pub fn project(&self, p: WorldPoint) -> ProjectionResult {
        let mut best = ProjectionResult {
            arclength: 0.0,
            d_proj: f64::INFINITY,
            segment: 0,
        };
        let mut best_abs = f64::INFINITY;
        for i in 0..self.points.len() - 1 {
            let (a, b) = (self.points[i], self.points[i + 1]);
            let (dx, dy) = (b.x - a.x, b.y - a.y);
            let len2 = dx * dx + dy * dy;
            let t = if len2 > 0.0 {
                (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let foot = WorldPoint::new(a.x + t * dx, a.y + t * dy);
            let dist = foot.distance(&p);
            if dist < best_abs {
                best_abs = dist;
                let cross = dx * (p.y - foot.y) - dy * (p.x - foot.x);
                let sign = if cross < 0.0 { -1.0 } else { 1.0 };
                best = ProjectionResult {
                    arclength: self.arclength[i] + t * (self.arclength[i + 1] - self.arclength[i]),
                    d_proj: sign * dist,
                    segment: i,
                };
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn straight(len: f64) -> Path {
        Path::resampled(
            &[WorldPoint::new(0.0, 0.0), WorldPoint::new(len, 0.0)],
            RESAMPLE_SPACING_M,
            None,
            vec!["L".into()],
        )
        .unwrap()
    }

    fn arc(radius: f64, degrees: usize) -> Vec<WorldPoint> {
        (0..=degrees)
            .map(|d| {
                let a = (d as f64).to_radians();
                WorldPoint::new(radius * a.sin(), radius * (1.0 - a.cos()))
            })
            .collect()
    }

    #[test]
    fn resampling_spacing_and_length() {
        let p = straight(10.5);
        assert_eq!(p.points().len(), 12);
        assert!((p.length() - 10.5).abs() < 1e-12);
        for w in p.arclengths().windows(2) {
            assert!(w[1] > w[0] && w[1] - w[0] <= 1.0 + 1e-12);
        }
        assert!(p.curvatures().iter().all(|k| k.abs() < 1e-12));
    }

    #[test]
    fn horizon_truncates() {
        let p = Path::resampled(
            &[WorldPoint::new(0.0, 0.0), WorldPoint::new(100.0, 0.0)],
            1.0,
            Some(42.0),
            vec![],
        )
        .unwrap();
        assert!((p.length() - 42.0).abs() < 1e-12);
    }

    #[test]
    fn circular_arc_curvature() {
        let p = Path::resampled(&arc(100.0, 60), 1.0, None, vec![]).unwrap();
        for k in p.curvatures() {
            assert!((k - 0.01).abs() < 5e-4, "{k}");
        }
    }

    #[test]
    fn projection_cases() {
        let p = straight(50.0);
        let on = p.project(WorldPoint::new(20.0, 0.0));
        assert!(on.d_proj.abs() < 1e-12 && (on.arclength - 20.0).abs() < 1e-12);
        let left = p.project(WorldPoint::new(20.0, 3.0));
        assert!((left.d_proj - 3.0).abs() < 1e-12);
        let right = p.project(WorldPoint::new(20.0, -3.0));
        assert!((right.d_proj + 3.0).abs() < 1e-12);
        let beyond = p.project(WorldPoint::new(60.0, 1.0));
        assert!((beyond.arclength - 50.0).abs() < 1e-12);
        assert!((beyond.d_proj.abs() - 101f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn projection_tie_prefers_smaller_arclength() {
        // A V-shaped path; the apex point is equidistant to both arms' ends.
        let p = Path::from_points(
            &[
                WorldPoint::new(0.0, 0.0),
                WorldPoint::new(10.0, 0.0),
                WorldPoint::new(0.0, 0.1),
            ],
            vec![],
        )
        .unwrap();
        let r = p.project(WorldPoint::new(-5.0, 0.05));
        assert!(r.arclength < 1.0);
    }

    #[test]
    fn rejects_degenerate() {
        assert!(Path::from_points(&[WorldPoint::new(1.0, 1.0)], vec![]).is_err());
        assert!(Path::from_points(&[WorldPoint::new(1.0, 1.0), WorldPoint::new(1.0, 1.0)], vec![]).is_err());
        assert!(Path::from_points(&[WorldPoint::new(0.0, 0.0), WorldPoint::new(f64::NAN, 1.0)], vec![]).is_err());
    }

    proptest! {
        // Brute-force oracle: the projection distance equals the minimum over
        // a dense sampling of the polyline, never larger.
        #[test]
        fn projection_matches_dense_search(px in -20.0..80.0f64, py in -20.0..20.0f64) {
            let p = Path::from_points(&[
                WorldPoint::new(0.0, 0.0), WorldPoint::new(20.0, 5.0),
                WorldPoint::new(40.0, 0.0), WorldPoint::new(60.0, 10.0),
            ], vec![]).unwrap();
            let q = WorldPoint::new(px, py);
            let r = p.project(q);
            let mut best = f64::INFINITY;
            let n = 20_000;
            for i in 0..=n {
                let s = p.length() * i as f64 / n as f64;
                best = best.min(p.point_at(s).distance(&q));
            }
            prop_assert!(r.d_proj.abs() <= best + 1e-9);
            prop_assert!(r.d_proj.abs() >= best - 0.01);
            prop_assert!((p.point_at(r.arclength).distance(&q) - r.d_proj.abs()).abs() < 1e-9);
        }
    }
}
