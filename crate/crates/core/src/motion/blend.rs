use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::WorldPoint;
use crate::rldm::{Path, RESAMPLE_SPACING_M};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlendSpec {
    /// Predicted time at which the lane change starts, s.
    pub s_start: f64,
    /// Blend length scale, s²/m: the blend spans `v0 * sqrt(l_c * d_path)`.
    pub l_c: f64,
    /// Sigmoid steepness.
    pub k: f64,
    /// Current lateral distance between the two paths, m.
    pub d_path: f64,
}

impl BlendSpec {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.s_start, self.l_c, self.k, self.d_path]
            .iter()
            .all(|x| x.is_finite());
        if !finite {
            return Err(Error::NonFinite("blend spec"));
        }
        if self.s_start < 0.0 || self.l_c <= 0.0 || self.k <= 0.0 || self.d_path < 0.0 {
            return Err(Error::param("blend", "need s_start >= 0, l_c > 0, k > 0, d_path >= 0"));
        }
        Ok(())
    }
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Logistic weight centered on `w = 0.5` and rescaled so that it is exactly
/// 0 at `w = 0` and 1 at `w = 1`.
pub fn blend_weight(w: f64, k: f64) -> f64 {
    let w = w.clamp(0.0, 1.0);
    let lo = logistic(-0.5 * k);
    let hi = logistic(0.5 * k);
    ((logistic(k * (w - 0.5)) - lo) / (hi - lo)).clamp(0.0, 1.0)
}

/// Lane-change path from `p_ego` into `p_other`. Both inputs are indexed by
/// the same longitudinal coordinate `l`, starting at the ego position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Blend {
    pub path: Path,
    pub l_start: f64,
    pub l_end: f64,
    k: f64,
}

impl Blend {
    pub fn l_blend(&self) -> f64 {
        self.l_end - self.l_start
    }

    /// Blend weight at longitudinal coordinate `l`.
    pub fn weight(&self, l: f64) -> f64 {
        let lb = self.l_blend();
        if l <= self.l_start {
            0.0
        } else if lb <= 0.0 || l >= self.l_end {
            1.0
        } else {
            blend_weight((l - self.l_start) / lb, self.k)
        }
    }

    /// The blended position at longitudinal coordinate `l`.
    pub fn point_at_param(&self, p_ego: &Path, p_other: &Path, l: f64) -> WorldPoint {
        let w = self.weight(l);
        p_ego.point_at(l).lerp(&p_other.point_at(l), w)
    }
}

/// Path starting at arclength `from` of `path`, re-based so the new path
/// starts at arclength 0.
pub fn path_from(path: &Path, from: f64) -> Result<Path> {
    let from = from.clamp(0.0, path.length());
    let mut pts = vec![path.point_at(from)];
    pts.extend(
        path.points()
            .iter()
            .zip(path.arclengths())
            .filter(|(_, s)| **s > from + 1e-6)
            .map(|(p, _)| *p),
    );
    if pts.len() < 2 {
        return Err(Error::param("path_from", "nothing left of the path"));
    }
    Path::from_points(&pts, path.lanes().to_vec())
}

/// Sigmoidal blend of `p_ego` into `p_other` starting `v0 * s_start` meters
/// ahead and spanning `v0 * sqrt(l_c * d_path)` meters. A zero span gives a
/// step at `l_start`.
pub fn blend_paths(p_ego: &Path, p_other: &Path, v0: f64, spec: &BlendSpec) -> Result<Blend> {
    spec.validate()?;
    if !v0.is_finite() || v0 < 0.0 {
        return Err(Error::param("v0", "must be a non-negative speed"));
    }
    let l_start = v0 * spec.s_start;
    let l_blend = v0 * (spec.l_c * spec.d_path).sqrt();
    let l_end = l_start + l_blend;
    let total = p_other.length();

    let mut grid: Vec<f64> = Vec::new();
    let n = (total / RESAMPLE_SPACING_M).ceil() as usize;
    let step = total / n.max(1) as f64;
    grid.extend((0..=n).map(|i| (i as f64 * step).min(total)));
    // keep the blend boundaries on the grid, and sample the blend densely
    let dense = (l_blend / (0.25 * RESAMPLE_SPACING_M)).ceil() as usize;
    for i in 0..=dense {
        let l = l_start + l_blend * i as f64 / dense.max(1) as f64;
        if l < total {
            grid.push(l);
        }
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup_by(|a, b| (*a - *b).abs() < 1e-9);

    let mut blend = Blend {
        path: p_other.clone(),
        l_start,
        l_end,
        k: spec.k,
    };
    let mut lanes: Vec<String> = p_ego.lanes().to_vec();
    lanes.extend(p_other.lanes().iter().filter(|l| !p_ego.lanes().contains(l)).cloned());
    let points: Vec<WorldPoint> = grid.iter().map(|&l| blend.point_at_param(p_ego, p_other, l)).collect();
    blend.path = Path::from_points(&points, lanes)?;
    Ok(blend)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lane(y: f64, len: f64) -> Path {
        Path::resampled(
            &[WorldPoint::new(0.0, y), WorldPoint::new(len, y)],
            1.0,
            None,
            vec![format!("y{y}")],
        )
        .unwrap()
    }

    fn spec() -> BlendSpec {
        BlendSpec {
            s_start: 1.0,
            l_c: 1.0,
            k: 10.0,
            d_path: 3.5,
        }
    }

    #[test]
    fn weight_endpoints_and_midpoint() {
        assert_eq!(blend_weight(0.0, 10.0), 0.0);
        assert!((blend_weight(1.0, 10.0) - 1.0).abs() < 1e-15);
        assert!((blend_weight(0.5, 10.0) - 0.5).abs() < 1e-12);
        assert!((blend_weight(0.5, 3.0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn blend_lengths() {
        let b = blend_paths(&lane(0.0, 200.0), &lane(3.5, 200.0), 7.0, &spec()).unwrap();
        assert!((b.l_start - 7.0).abs() < 1e-12);
        assert!((b.l_blend() - 7.0 * 3.5f64.sqrt()).abs() < 1e-12);
        assert!((b.l_blend() - 13.10).abs() < 0.01);
        assert!((b.l_end - 20.10).abs() < 0.01);
        assert!((b.weight(0.5 * (b.l_start + b.l_end)) - 0.5).abs() < 1e-9);
    }

    #[test]
    fn endpoints_pinned() {
        let (e, o) = (lane(0.0, 200.0), lane(3.5, 200.0));
        let b = blend_paths(&e, &o, 7.0, &spec()).unwrap();
        assert_eq!(b.point_at_param(&e, &o, b.l_start), e.point_at(b.l_start));
        assert_eq!(b.point_at_param(&e, &o, b.l_end), o.point_at(b.l_end));
        assert_eq!(b.path.points()[0], WorldPoint::new(0.0, 0.0));
        assert_eq!(b.path.points().last().unwrap().y, 3.5);
    }

    #[test]
    fn immediate_change() {
        let (e, o) = (lane(0.0, 200.0), lane(3.5, 200.0));
        let b = blend_paths(&e, &o, 7.0, &BlendSpec { s_start: 0.0, ..spec() }).unwrap();
        assert_eq!(b.l_start, 0.0);
        assert!(b.path.points()[1].y > 0.0);
    }

    #[test]
    fn degenerate_step() {
        let (e, o) = (lane(0.0, 100.0), lane(3.5, 100.0));
        let b = blend_paths(&e, &o, 7.0, &BlendSpec { d_path: 0.0, ..spec() }).unwrap();
        assert_eq!(b.l_blend(), 0.0);
        assert_eq!(b.weight(7.0), 0.0);
        assert_eq!(b.weight(7.0 + 1e-9), 1.0);
        let b = blend_paths(&e, &o, 0.0, &spec()).unwrap();
        assert_eq!(b.path.points()[0].y, 0.0);
        assert_eq!(b.path.points()[1].y, 3.5);
    }

    #[test]
    fn invalid_spec() {
        let (e, o) = (lane(0.0, 100.0), lane(3.5, 100.0));
        assert!(blend_paths(&e, &o, 7.0, &BlendSpec { k: 0.0, ..spec() }).is_err());
        assert!(blend_paths(&e, &o, 7.0, &BlendSpec { l_c: -1.0, ..spec() }).is_err());
        assert!(blend_paths(&e, &o, -1.0, &spec()).is_err());
    }

    #[test]
    fn path_from_rebases() {
        let p = path_from(&lane(0.0, 50.0), 10.25).unwrap();
        assert!((p.length() - 39.75).abs() < 1e-9);
        assert_eq!(p.points()[0], WorldPoint::new(10.25, 0.0));
    }

    proptest! {
        #[test]
        fn lateral_offset_monotone(v0 in 0.5..20.0f64, s_start in 0.0..3.0f64, k in 1.0..15.0f64) {
            let (e, o) = (lane(0.0, 400.0), lane(3.5, 400.0));
            let b = blend_paths(&e, &o, v0, &BlendSpec { s_start, k, ..spec() }).unwrap();
            let mut prev = -1.0;
            for p in b.path.points() {
                prop_assert!(p.y >= prev - 1e-12);
                prev = p.y;
            }
        }
    }
}
