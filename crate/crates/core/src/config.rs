//! Run parameters, loadable from TOML with dotted-key overrides
//! (`risk.tau0=3`).

use serde::{Deserialize, Serialize};

use crate::costs::{BenefitParams, RiskParams, UncertaintyParams};
use crate::error::{Error, Result};
use crate::motion::ProbeConfig;
use crate::rldm::TrackingGains;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlendConfig {
    /// Lane-change start time, s.
    pub s_start: f64,
    /// Blend scale, s²/m. The default spans 3 s for lanes 3.5 m apart.
    pub l_c: f64,
    pub k: f64,
}

impl Default for BlendConfig {
    fn default() -> Self {
        Self {
            s_start: 1.0,
            l_c: 9.0 / 3.5,
            k: 5.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    /// Speed advice dead-band, m/s.
    pub dead_band: f64,
    /// How long a new selection must stay better before it is committed, s.
    pub hysteresis_s: f64,
    /// Horizon of the risk-field visualization, s.
    pub visualization_horizon_s: f64,
    /// Extra path length beyond the farthest reachable point, m.
    pub path_margin_m: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            dead_band: 0.5,
            hysteresis_s: 2.0,
            visualization_horizon_s: 6.0,
            path_margin_m: 50.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    pub probe: ProbeConfig,
    pub risk: RiskParams,
    pub benefit: BenefitParams,
    pub uncertainty: UncertaintyParams,
    pub blend: BlendConfig,
    pub planner: PlannerConfig,
    pub tracking: TrackingGains,
}

impl Params {
    pub fn validate(&self) -> Result<()> {
        self.probe.validate()?;
        self.risk.validate()?;
        self.benefit.validate()?;
        self.uncertainty.validate()?;
        self.tracking.validate()?;
        if self.planner.dead_band < 0.0 || self.planner.hysteresis_s < 0.0 {
            return Err(Error::param("planner", "dead_band and hysteresis_s must be >= 0"));
        }
        Ok(())
    }

    /// Applies `section.key=value` overrides; values are parsed as TOML.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Params> {
        let mut tree = toml::Table::try_from(self).map_err(|e| Error::Override {
            key: String::new(),
            reason: e.to_string(),
        })?;
        for ov in overrides {
            let ov = ov.as_ref();
            let (key, raw) = ov.split_once('=').ok_or_else(|| Error::Override {
                key: ov.to_string(),
                reason: "expected key=value".into(),
            })?;
            let (key, raw) = (key.trim(), raw.trim());
            let value: toml::Value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
                .ok()
                .and_then(|mut t| t.remove("v"))
                .unwrap_or_else(|| toml::Value::String(raw.to_string()));
            let fail = |reason: &str| Error::Override {
                key: key.to_string(),
                reason: reason.to_string(),
            };
            let mut parts = key.split('.').collect::<Vec<_>>();
            let leaf = parts.pop().filter(|l| !l.is_empty()).ok_or_else(|| fail("empty key"))?;
            let mut table = &mut tree;
            for p in parts {
                table = table
                    .get_mut(p)
                    .and_then(toml::Value::as_table_mut)
                    .ok_or_else(|| fail("unknown section"))?;
            }
            let slot = table.get_mut(leaf).ok_or_else(|| fail("unknown key"))?;
            // integers are accepted where floats are expected
            *slot = match (&*slot, value) {
                (toml::Value::Float(_), toml::Value::Integer(i)) => toml::Value::Float(i as f64),
                (_, v) => v,
            };
        }
        let params: Params = tree.try_into().map_err(|e: toml::de::Error| Error::Override {
            key: overrides.iter().map(|o| o.as_ref()).collect::<Vec<_>>().join(","),
            reason: e.to_string(),
        })?;
        params.validate()?;
        Ok(params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        Params::default().validate().unwrap();
        assert_eq!(Params::default().probe.n_t, 21);
    }

    #[test]
    fn overrides_apply() {
        let p = Params::default()
            .with_overrides(&["risk.tau0=3", "probe.n_t = 11", "benefit.v_d=12.5"])
            .unwrap();
        assert_eq!(p.risk.tau0, 3.0);
        assert_eq!(p.probe.n_t, 11);
        assert_eq!(p.benefit.v_d, 12.5);
    }

    #[test]
    fn bad_overrides() {
        let d = Params::default();
        assert!(d.with_overrides(&["risk.nope=1"]).is_err());
        assert!(d.with_overrides(&["nope.tau0=1"]).is_err());
        assert!(d.with_overrides(&["risk.tau0"]).is_err());
        assert!(d.with_overrides(&["probe.n_t=2"]).is_err());
        assert!(d.with_overrides(&["risk.tau0=abc"]).is_err());
    }

    #[test]
    fn partial_toml_fills_defaults() {
        let p: Params = toml::from_str("[risk]\ntau0 = 4.0\n").unwrap();
        assert_eq!(p.risk.tau0, 4.0);
        assert_eq!(p.probe, ProbeConfig::default());
    }
}
