//! Survival-analysis costs of one ego trajectory sample: integrated risk
//! from collision and curve events, utility, comfort, and their total.
//!
//! Event rates are combined with an escape rate `1/tau0` into a survival
//! function `S(s)`, and every cost term is integrated over the prediction
//! grid weighted by `S`. Quadrature is the trapezoid rule on the uniform
//! grid, with `s_h` standing in for the infinite upper limit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::WorldPoint;
use crate::motion::TrajectorySample;

/// Position uncertainty of one vehicle: a sensor term plus a behavior term
/// that grows linearly with predicted time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UncertaintyParams {
    /// Initial position std dev, m.
    pub sigma_m: f64,
    /// Growth of the position std dev, m/s.
    pub sigma_b: f64,
}

impl Default for UncertaintyParams {
    fn default() -> Self {
        Self {
            sigma_m: 0.5,
            sigma_b: 0.2,
        }
    }
}

impl UncertaintyParams {
    pub fn sigma(&self, s: f64) -> f64 {
        self.sigma_m.hypot(self.sigma_b * s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_m >= 0.0 && self.sigma_b >= 0.0) || !self.sigma_m.is_finite() || !self.sigma_b.is_finite() {
            return Err(Error::param("uncertainty", "std devs must be finite and >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RiskParams {
    /// Maximal collision event rate, 1/s.
    pub tau_hat_coll_inv: f64,
    /// Maximal curve (skid) event rate, 1/s.
    pub tau_hat_curv_inv: f64,
    /// Escape time constant, s. `f64::INFINITY` disables escape.
    pub tau0: f64,
    /// Critical lateral acceleration, m/s².
    pub a_crit: f64,
    /// Lateral acceleration std dev, m/s².
    pub sigma_a: f64,
    /// Half vehicle length, m.
    pub car_half_length: f64,
    /// Half vehicle width, m. Equal to `car_half_length` gives a round
    /// footprint.
    pub car_half_width: f64,
    /// Collision severity per squared relative speed, s²/m².
    pub severity_scale: f64,
    /// Collision severity independent of the relative speed.
    pub severity_floor: f64,
    /// Severity of a curve event.
    pub curve_severity: f64,
}

impl Default for RiskParams {
    fn default() -> Self {
        Self {
            tau_hat_coll_inv: 1.0,
            tau_hat_curv_inv: 1.0,
            tau0: 2.0,
            a_crit: 4.0,
            sigma_a: 0.5,
            car_half_length: 2.0,
            car_half_width: 0.9,
            severity_scale: 0.01,
            severity_floor: 3.0,
            curve_severity: 1.0,
        }
    }
}

impl RiskParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.tau_hat_coll_inv,
            self.tau_hat_curv_inv,
            self.tau0,
            self.a_crit,
            self.sigma_a,
            self.car_half_length,
            self.car_half_width,
        ]
        .iter()
        .all(|x| *x > 0.0);
        if !positive || self.severity_scale < 0.0 || self.severity_floor < 0.0 || self.curve_severity < 0.0 {
            return Err(Error::param(
                "risk",
                "rates, tau0, a_crit, sigma_a and car size must be > 0",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenefitParams {
    pub b_t: f64,
    /// Weight of the deviation from `v_d`; non-positive so deviation lowers
    /// utility.
    pub b_d: f64,
    pub b_c: f64,
    pub b_j: f64,
    /// Desired velocity, m/s.
    pub v_d: f64,
    /// Utility added to samples on paths that satisfy the route intent.
    pub utility_offset_per_path: f64,
}

impl Default for BenefitParams {
    fn default() -> Self {
        Self {
            b_t: 0.02,
            b_d: -0.02,
            b_c: 0.05,
            b_j: 0.01,
            v_d: 10.0,
            utility_offset_per_path: 0.05,
        }
    }
}

impl BenefitParams {
    pub fn validate(&self) -> Result<()> {
        if self.b_t < 0.0 || self.b_d > 0.0 || self.b_c < 0.0 || self.b_j < 0.0 {
            return Err(Error::param("benefit", "need b_t >= 0, b_d <= 0, b_c >= 0, b_j >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub r: f64,
    pub u: f64,
    pub o: f64,
    pub c: f64,
    /// Critical event rate per step (collision plus curve), 1/s.
    pub rate_trace: Vec<f64>,
    pub survival: Vec<f64>,
}

/// Trapezoid rule on a uniform grid.
pub fn trapezoid(values: &[f64], ds: f64) -> f64 {
    match values {
        [] | [_] => 0.0,
        [first, inner @ .., last] => ds * (0.5 * (first + last) + inner.iter().sum::<f64>()),
    }
}

fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Gap between two equal footprints, measured along and across the other
/// vehicle's heading.
pub fn footprint_gap(ego: WorldPoint, other: WorldPoint, other_heading: f64, risk: &RiskParams) -> f64 {
    let (dx, dy) = (ego.x - other.x, ego.y - other.y);
    let (sin, cos) = other_heading.sin_cos();
    let lon = (dx * cos + dy * sin).abs() - 2.0 * risk.car_half_length;
    let lat = (-dx * sin + dy * cos).abs() - 2.0 * risk.car_half_width;
    lon.max(0.0).hypot(lat.max(0.0))
}

/// Collision event rate between two vehicles at the same predicted time.
pub fn collision_rate(
    ego: WorldPoint,
    other: WorldPoint,
    other_heading: f64,
    ego_unc: &UncertaintyParams,
    other_unc: &UncertaintyParams,
    s: f64,
    risk: &RiskParams,
) -> f64 {
    let d = footprint_gap(ego, other, other_heading, risk);
    let var = ego_unc.sigma(s).powi(2) + other_unc.sigma(s).powi(2);
    gaussian_rate(d, var, risk.tau_hat_coll_inv)
}

/// `tau_hat * exp(-d² / (2 var))`, with the zero-variance limit.
pub fn gaussian_rate(d: f64, var: f64, tau_hat: f64) -> f64 {
    if var <= 0.0 {
        return if d > 0.0 { 0.0 } else { tau_hat };
    }
    tau_hat * (-d * d / (2.0 * var)).exp()
}

/// Rate of losing control in a curve: probability that the lateral
/// acceleration exceeds `a_crit` under Gaussian noise.
pub fn curve_rate(v: f64, kappa: f64, risk: &RiskParams) -> f64 {
    let a_lat = v * v * kappa.abs();
    risk.tau_hat_curv_inv * std_normal_cdf((a_lat - risk.a_crit) / risk.sigma_a)
}

/// Survival function on the grid given the summed critical event rates:
/// `S(s) = exp(-∫ (1/tau0 + rate) ds')`.
pub fn survival_trace(rates: &[f64], tau0: f64, ds: f64) -> Vec<f64> {
    let escape = 1.0 / tau0;
    let mut out = Vec::with_capacity(rates.len());
    let mut hazard = 0.0;
    for (k, r) in rates.iter().enumerate() {
        if k > 0 {
            hazard += 0.5 * ds * (2.0 * escape + rates[k - 1] + r);
        }
        out.push((-hazard).exp());
    }
    out
}

/// `∫ damage_rate · S ds`.
pub fn risk_integral(damage_rates: &[f64], survival: &[f64], ds: f64) -> f64 {
    let weighted: Vec<f64> = damage_rates.iter().zip(survival).map(|(d, s)| d * s).collect();
    trapezoid(&weighted, ds)
}

/// A predicted other vehicle with its uncertainty.
#[derive(Debug, Clone, PartialEq)]
pub struct OtherPrediction {
    pub id: String,
    pub sample: TrajectorySample,
    pub uncertainty: UncertaintyParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiskResult {
    pub r: f64,
    pub rate_trace: Vec<f64>,
    pub survival: Vec<f64>,
    /// Per-step `Σ rate·D`, the risk integrand before survival weighting.
    pub damage_rate: Vec<f64>,
}

fn severity(ego: &TrajectorySample, other: &TrajectorySample, k: usize, risk: &RiskParams) -> f64 {
    let (ex, ey) = ego.velocity_vector(k);
    let (ox, oy) = other.velocity_vector(k);
    let dv2 = (ex - ox).powi(2) + (ey - oy).powi(2);
    0.5 * dv2 * risk.severity_scale + risk.severity_floor
}

/// Risk of the ego sample against all predicted others, with the rate and
/// survival traces behind it.
pub fn integrated_risk(
    ego: &TrajectorySample,
    others: &[OtherPrediction],
    ego_unc: &UncertaintyParams,
    risk: &RiskParams,
    ds: f64,
) -> Result<RiskResult> {
    for o in others {
        if o.sample.len() != ego.len() {
            return Err(Error::GridMismatch(ego.len(), o.sample.len()));
        }
    }
    let n = ego.len();
    let mut rate_trace = vec![0.0; n];
    let mut damage_rate = vec![0.0; n];
    for (k, st) in ego.steps.iter().enumerate() {
        let curve = curve_rate(st.v, st.curvature, risk);
        let mut rate = curve;
        let mut damage = curve * risk.curve_severity;
        for o in others {
            let os = &o.sample.steps[k];
            let c = collision_rate(
                st.position,
                os.position,
                os.heading,
                ego_unc,
                &o.uncertainty,
                st.s,
                risk,
            );
            rate += c;
            damage += c * severity(ego, &o.sample, k, risk);
        }
        rate_trace[k] = rate;
        damage_rate[k] = damage;
    }
    let survival = survival_trace(&rate_trace, risk.tau0, ds);
    let r = risk_integral(&damage_rate, &survival, ds);
    Ok(RiskResult {
        r,
        rate_trace,
        survival,
        damage_rate,
    })
}

/// `∫ (b_t |v| + b_d |v - v_d|) S ds`, plus the route offset when the
/// sample's path satisfies the route intent.
pub fn utility(ego: &TrajectorySample, benefit: &BenefitParams, survival: &[f64], ds: f64, on_route: bool) -> f64 {
    let integrand: Vec<f64> = ego
        .steps
        .iter()
        .zip(survival)
        .map(|(st, s)| (benefit.b_t * st.v.abs() + benefit.b_d * (st.v - benefit.v_d).abs()) * s)
        .collect();
    let offset = if on_route { benefit.utility_offset_per_path } else { 0.0 };
    trapezoid(&integrand, ds) + offset
}

/// `∫ -(b_c |a| + b_j |j|) S ds`; never positive.
pub fn comfort(ego: &TrajectorySample, benefit: &BenefitParams, survival: &[f64], ds: f64) -> f64 {
    let integrand: Vec<f64> = ego
        .steps
        .iter()
        .zip(survival)
        .map(|(st, s)| -(benefit.b_c * st.a.abs() + benefit.b_j * st.j.abs()) * s)
        .collect();
    trapezoid(&integrand, ds)
}

pub fn total_cost(r: f64, u: f64, o: f64) -> f64 {
    r - u - o
}

/// Full cost breakdown of one ego sample.
pub fn evaluate(
    ego: &TrajectorySample,
    others: &[OtherPrediction],
    ego_unc: &UncertaintyParams,
    risk: &RiskParams,
    benefit: &BenefitParams,
    ds: f64,
    on_route: bool,
) -> Result<CostBreakdown> {
    let rr = integrated_risk(ego, others, ego_unc, risk, ds)?;
    let u = utility(ego, benefit, &rr.survival, ds, on_route);
    let o = comfort(ego, benefit, &rr.survival, ds);
    Ok(CostBreakdown {
        r: rr.r,
        u,
        o,
        c: total_cost(rr.r, u, o),
        rate_trace: rr.rate_trace,
        survival: rr.survival,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::{predict_other, roll_out, sample_profiles, ProbeConfig, TrajectoryStep};
    use crate::rldm::Path;
    use proptest::prelude::*;

    const DS: f64 = 0.1;

    fn flat_sample(v: f64, a: f64, n: usize) -> TrajectorySample {
        TrajectorySample {
            steps: (0..n)
                .map(|k| TrajectoryStep {
                    s: k as f64 * DS,
                    position: WorldPoint::new(v * k as f64 * DS, 0.0),
                    arclength: v * k as f64 * DS,
                    heading: 0.0,
                    curvature: 0.0,
                    v,
                    a,
                    j: 0.0,
                })
                .collect(),
            overrun: false,
        }
    }

    #[test]
    fn collision_rate_cases() {
        let risk = RiskParams {
            car_half_length: 1.0,
            tau_hat_coll_inv: 2.0,
            ..RiskParams::default()
        };
        let unc = UncertaintyParams {
            sigma_m: 1.0,
            sigma_b: 0.0,
        };
        let o = WorldPoint::new(0.0, 0.0);
        // d = 0 once the car size is removed
        assert_eq!(
            collision_rate(o, WorldPoint::new(1.5, 0.0), 0.0, &unc, &unc, 0.0, &risk),
            2.0
        );
        // d = sigma_tot
        let st = 2f64.sqrt();
        let r = collision_rate(o, WorldPoint::new(2.0 + st, 0.0), 0.0, &unc, &unc, 0.0, &risk);
        assert!((r - 2.0 * (-0.5f64).exp()).abs() < 1e-12);
        assert!((r / 2.0 - 0.6065).abs() < 1e-4);
        // d = 10, sigma_tot = 2
        assert!((gaussian_rate(10.0, 4.0, 1.0) - (-12.5f64).exp()).abs() < 1e-18);
        assert!((gaussian_rate(10.0, 4.0, 1.0) - 3.7e-6).abs() < 1e-7);
        assert_eq!(gaussian_rate(1.0, 0.0, 1.0), 0.0);
        assert_eq!(gaussian_rate(0.0, 0.0, 1.0), 1.0);
    }

    #[test]
    fn footprint_gap_cases() {
        let risk = RiskParams {
            car_half_length: 2.0,
            car_half_width: 0.9,
            ..RiskParams::default()
        };
        let o = WorldPoint::new(0.0, 0.0);
        // alongside in the next lane
        assert!((footprint_gap(WorldPoint::new(0.0, 3.5), o, 0.0, &risk) - 1.7).abs() < 1e-12);
        // bumper to bumper
        assert_eq!(footprint_gap(WorldPoint::new(3.0, 0.0), o, 0.0, &risk), 0.0);
        assert!((footprint_gap(WorldPoint::new(10.0, 0.0), o, 0.0, &risk) - 6.0).abs() < 1e-12);
        // rotated frame, corner to corner
        let h = std::f64::consts::FRAC_PI_2;
        let g = footprint_gap(WorldPoint::new(-4.8, 7.0), o, h, &risk);
        assert!((g - 3f64.hypot(3.0)).abs() < 1e-12);
        // round footprint reduces to the center distance
        let round = RiskParams {
            car_half_width: 2.0,
            ..risk
        };
        let g = footprint_gap(WorldPoint::new(6.0, 8.0), o, 0.7, &round);
        assert!((0.0..=10.0 - 4.0 + 1e-12).contains(&g));
    }

    #[test]
    fn curve_rate_cases() {
        let risk = RiskParams::default();
        assert!(curve_rate(10.0, 0.0, &risk) < 1e-14);
        let at_crit = curve_rate(2.0, 1.0, &risk);
        assert!((at_crit - 0.5).abs() < 1e-12);
        let r = curve_rate(15.0, 0.02, &risk);
        assert!((r - 0.841_344_746).abs() < 1e-8, "{r}");
        assert_eq!(curve_rate(15.0, -0.02, &risk), r);
    }

    #[test]
    fn survival_cases() {
        let s = survival_trace(&[0.0; 121], 2.0, DS);
        for (k, v) in s.iter().enumerate() {
            assert!((v - (-(k as f64) * DS / 2.0).exp()).abs() < 1e-12);
        }
        let s = survival_trace(&[0.3; 121], f64::INFINITY, DS);
        assert!((s[120] - (-0.3f64 * 12.0).exp()).abs() < 1e-12);
        let s = survival_trace(&[0.1; 41], 2.0, DS);
        assert!((s[40] - (-2.4f64).exp()).abs() < 1e-6);
        assert!((s[40] - 0.0907).abs() < 1e-4);
    }

    #[test]
    fn constant_rate_risk_closed_form() {
        let n = 121;
        let s = survival_trace(&vec![0.1; n], 2.0, DS);
        let r = risk_integral(&vec![0.1; n], &s, DS);
        let exact = 0.1 / 0.6 * (1.0 - (-0.6f64 * 12.0).exp());
        assert!((r - exact).abs() / exact < 1e-3, "{r} vs {exact}");
        assert!((exact - 0.1665).abs() < 1e-4);
    }

    #[test]
    fn empty_straight_road_has_negligible_risk() {
        let cfg = ProbeConfig::default();
        let path = Path::resampled(
            &[WorldPoint::new(0.0, 0.0), WorldPoint::new(500.0, 0.0)],
            1.0,
            None,
            vec![],
        )
        .unwrap();
        let prof = sample_profiles(10.0, &cfg).unwrap()[10];
        let ego = roll_out(&prof, &path, 0.0, 10.0, &cfg).unwrap();
        let rr = integrated_risk(&ego, &[], &UncertaintyParams::default(), &RiskParams::default(), DS).unwrap();
        assert!(rr.r < 1e-12);
        let short = OtherPrediction {
            id: "x".into(),
            sample: flat_sample(1.0, 0.0, 5),
            uncertainty: UncertaintyParams::default(),
        };
        assert!(matches!(
            integrated_risk(
                &ego,
                &[short],
                &UncertaintyParams::default(),
                &RiskParams::default(),
                DS
            ),
            Err(Error::GridMismatch(121, 5))
        ));
    }

    #[test]
    fn utility_cases() {
        let b = BenefitParams {
            b_t: 0.01,
            b_d: -0.5,
            ..BenefitParams::default()
        };
        let n = 2001;
        let s = survival_trace(&vec![0.0; n], 2.0, DS);
        // v = v_d: deviation term vanishes
        let u = utility(&flat_sample(10.0, 0.0, n), &b, &s, DS, false);
        assert!((u - 0.2).abs() < 1e-3, "{u}");
        let u0 = utility(
            &flat_sample(0.0, 0.0, n),
            &BenefitParams { b_d: 0.0, ..b },
            &s,
            DS,
            false,
        );
        assert_eq!(u0, 0.0);
        let with_offset = utility(&flat_sample(10.0, 0.0, n), &b, &s, DS, true);
        assert!((with_offset - u - b.utility_offset_per_path).abs() < 1e-12);
    }

    #[test]
    fn comfort_cases() {
        let b = BenefitParams {
            b_c: 0.1,
            b_j: 0.0,
            ..BenefitParams::default()
        };
        let n = 121;
        let ones = vec![1.0; n];
        assert_eq!(comfort(&flat_sample(5.0, 0.0, n), &b, &ones, DS), 0.0);
        let mut ramp = flat_sample(5.0, 1.0, n);
        for st in ramp.steps.iter_mut().filter(|st| st.s >= 2.0 - 1e-9) {
            st.a = 0.0;
        }
        let o = comfort(&ramp, &b, &ones, DS);
        // rectangle of area 2 on the grid, within half a step
        assert!((o + 0.2).abs() <= 0.1 * DS / 2.0 + 1e-12, "{o}");
        let cfg = ProbeConfig::default();
        let path = Path::resampled(
            &[WorldPoint::new(0.0, 0.0), WorldPoint::new(500.0, 0.0)],
            1.0,
            None,
            vec![],
        )
        .unwrap();
        let brake = roll_out(&sample_profiles(7.0, &cfg).unwrap()[0], &path, 0.0, 7.0, &cfg).unwrap();
        assert!(comfort(&brake, &BenefitParams::default(), &ones, DS) < 0.0);
    }

    #[test]
    fn total_cost_arithmetic() {
        assert_eq!(total_cost(0.0, 0.0, 0.0), 0.0);
        assert!((total_cost(0.2, 0.5, -0.1) + 0.2).abs() < 1e-12);
    }

    #[test]
    fn head_on_risk_monotonicity() {
        let cfg = ProbeConfig::default();
        let path = Path::resampled(
            &[WorldPoint::new(0.0, 0.0), WorldPoint::new(400.0, 0.0)],
            1.0,
            None,
            vec![],
        )
        .unwrap();
        let back = Path::resampled(
            &[WorldPoint::new(400.0, 0.0), WorldPoint::new(0.0, 0.0)],
            1.0,
            None,
            vec![],
        )
        .unwrap();
        let ego = roll_out(&sample_profiles(8.0, &cfg).unwrap()[8], &path, 0.0, 8.0, &cfg).unwrap();
        let risk_for = |gap: f64, rate: f64| {
            let other = OtherPrediction {
                id: "o".into(),
                sample: predict_other(6.0, &back, 400.0 - gap, &cfg).unwrap(),
                uncertainty: UncertaintyParams::default(),
            };
            let risk = RiskParams {
                tau_hat_coll_inv: rate,
                ..RiskParams::default()
            };
            integrated_risk(&ego, &[other], &UncertaintyParams::default(), &risk, cfg.ds)
                .unwrap()
                .r
        };
        let mut prev = f64::INFINITY;
        for gap in [20.0, 40.0, 60.0, 80.0, 120.0] {
            let r = risk_for(gap, 1.0);
            assert!(r >= 0.0 && r <= prev, "{gap}: {r}");
            prev = r;
        }
        let mut prev = 0.0;
        for rate in [0.1, 0.5, 1.0, 2.0, 5.0] {
            let r = risk_for(60.0, rate);
            assert!(r >= prev);
            prev = r;
        }
    }

    proptest! {
        #[test]
        fn survival_properties(rates in proptest::collection::vec(0.0..5.0f64, 2..200), tau0 in 0.1..50.0f64) {
            let s = survival_trace(&rates, tau0, DS);
            prop_assert_eq!(s[0], 1.0);
            for w in s.windows(2) {
                prop_assert!(w[1] < w[0]);
            }
        }

        #[test]
        fn sigma_non_decreasing(m in 0.0..3.0f64, b in 0.0..3.0f64, s in 0.0..20.0f64, ds in 0.0..5.0f64) {
            let u = UncertaintyParams { sigma_m: m, sigma_b: b };
            prop_assert!(u.sigma(s + ds) >= u.sigma(s));
        }
    }
}
