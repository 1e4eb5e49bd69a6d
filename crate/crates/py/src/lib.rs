//! Python module `riskmaps`: scenarios, the simulated world and the cost
//! primitives. Structured results come back as plain dicts and lists.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use riskmaps::costs;
use riskmaps::motion::{self, ProbeConfig};
use riskmaps::planner::{self, Direction};
use riskmaps::rldm::Side;
use riskmaps::sim::{self, EgoCommand, TraceRecord};
use riskmaps::stream::{StateMessage, STREAM_VERSION};

fn err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Serializes through JSON into Python objects.
fn to_py<'py>(py: Python<'py>, value: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(err)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn parse_side(s: &str) -> PyResult<Side> {
    match s {
        "left" => Ok(Side::Left),
        "right" => Ok(Side::Right),
        other => Err(err(format!("lane request must be 'left' or 'right', got '{other}'"))),
    }
}

#[pyclass(name = "Scenario", module = "riskmaps", from_py_object)]
#[derive(Clone)]
struct PyScenario {
    inner: sim::Scenario,
}

#[pymethods]
impl PyScenario {
    #[staticmethod]
    fn gap() -> Self {
        Self {
            inner: sim::make_gap_scenario(),
        }
    }

    #[staticmethod]
    fn no_gap() -> Self {
        Self {
            inner: sim::make_no_gap_scenario(),
        }
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: sim::Scenario::from_toml(text, None).map_err(err)?,
        })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self {
            inner: sim::load_scenario(path.as_ref()).map_err(err)?,
        })
    }

    fn to_toml(&self) -> PyResult<String> {
        self.inner.to_toml().map_err(err)
    }

    #[getter]
    fn name(&self) -> &str {
        &self.inner.name
    }

    #[getter]
    fn duration(&self) -> f64 {
        self.inner.duration
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[setter]
    fn set_seed(&mut self, seed: u64) {
        self.inner.seed = seed;
    }

    /// Turns observation noise on or off; sigmas in m and m/s.
    #[pyo3(signature = (enabled, position_sigma_m=0.5, velocity_sigma_mps=0.3))]
    fn set_noise(&mut self, enabled: bool, position_sigma_m: f64, velocity_sigma_mps: f64) {
        self.inner.noise.enabled = enabled;
        self.inner.noise.position_sigma_m = position_sigma_m;
        self.inner.noise.velocity_sigma_mps = velocity_sigma_mps;
    }

    /// A copy with `section.key=value` parameter overrides applied.
    fn with_overrides(&self, overrides: Vec<String>) -> PyResult<Self> {
        let mut inner = self.inner.clone();
        inner.params = inner.params.with_overrides(&overrides).map_err(err)?;
        Ok(Self { inner })
    }

    fn params<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.params)
    }

    fn __repr__(&self) -> String {
        format!(
            "Scenario(name={:?}, duration={}, vehicles={})",
            self.inner.name,
            self.inner.duration,
            self.inner.vehicles.len()
        )
    }
}

/// A finished run.
#[pyclass(name = "Trace", module = "riskmaps", skip_from_py_object)]
struct PyTrace {
    scenario: String,
    v_max: f64,
    records: Vec<TraceRecord>,
}

#[pymethods]
impl PyTrace {
    fn __len__(&self) -> usize {
        self.records.len()
    }

    /// Stream message of one cycle.
    fn state<'py>(&self, py: Python<'py>, cycle: usize) -> PyResult<Bound<'py, PyAny>> {
        let rec = self
            .records
            .get(cycle)
            .ok_or_else(|| err(format!("no cycle {cycle}")))?;
        to_py(py, &StateMessage::from_record(&self.scenario, rec, self.v_max, false))
    }

    fn summary<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &sim::Summary::from_trace(&self.scenario, &self.records))
    }

    /// Collapsed direction advice, e.g. `["left", "straight"]`.
    fn direction_sequence(&self) -> Vec<&'static str> {
        sim::Summary::direction_sequence(&self.records)
            .into_iter()
            .map(sim::direction_str)
            .collect()
    }

    fn risk_field<'py>(&self, py: Python<'py>, cycle: usize) -> PyResult<Bound<'py, PyAny>> {
        let field = sim::export_risk_field(&self.records, cycle).ok_or_else(|| err(format!("no cycle {cycle}")))?;
        to_py(py, field)
    }

    fn to_csv(&self) -> PyResult<String> {
        let mut buf = Vec::new();
        sim::write_trace_csv(&self.records, &mut buf).map_err(err)?;
        String::from_utf8(buf).map_err(err)
    }
}

#[pyclass(name = "World", module = "riskmaps", skip_from_py_object)]
struct PyWorld {
    inner: sim::World,
}

#[pymethods]
impl PyWorld {
    #[new]
    fn new(scenario: &PyScenario) -> PyResult<Self> {
        Ok(Self {
            inner: sim::World::new(scenario.inner.clone()).map_err(err)?,
        })
    }

    /// One planning cycle. The command only steers a `human_ego` vehicle.
    /// Returns the stream message of the cycle.
    #[pyo3(signature = (acceleration=None, lane_request=None))]
    fn step<'py>(
        &mut self,
        py: Python<'py>,
        acceleration: Option<f64>,
        lane_request: Option<&str>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let command = match (acceleration, lane_request) {
            (None, None) => None,
            (a, l) => Some(EgoCommand {
                acceleration_mps2: a.unwrap_or(0.0),
                lane_request: l.map(parse_side).transpose()?,
            }),
        };
        let rec = self.inner.step(command).map_err(err)?;
        to_py(py, &StateMessage::from_world(&self.inner, &rec, false))
    }

    /// Runs the remaining cycles.
    fn run(&mut self) -> PyResult<PyTrace> {
        let records = self.inner.run().map_err(err)?;
        Ok(PyTrace {
            scenario: self.inner.scenario().name.clone(),
            v_max: self.inner.params().probe.v_max,
            records,
        })
    }

    /// Current map graph as nodes and relations.
    fn snapshot<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.graph().snapshot())
    }

    #[getter]
    fn cycle(&self) -> usize {
        self.inner.cycle()
    }

    #[getter]
    fn time(&self) -> f64 {
        self.inner.time()
    }

    #[getter]
    fn finished(&self) -> bool {
        self.inner.is_finished()
    }

    #[getter]
    fn ego_lane(&self) -> String {
        self.inner.ego_lane().to_string()
    }
}

/// `S(s)` on a uniform grid from the summed event rates (1/s).
#[pyfunction]
fn survival_trace(rates: Vec<f64>, tau0: f64, ds: f64) -> Vec<f64> {
    costs::survival_trace(&rates, tau0, ds)
}

/// `∫ damage_rate · S ds` by the trapezoid rule.
#[pyfunction]
fn risk_integral(damage_rates: Vec<f64>, survival: Vec<f64>, ds: f64) -> PyResult<f64> {
    if damage_rates.len() != survival.len() {
        return Err(err("damage_rates and survival differ in length"));
    }
    Ok(costs::risk_integral(&damage_rates, &survival, ds))
}

/// `(end_velocity, acceleration, ramp_duration)` per profile.
#[pyfunction]
#[pyo3(signature = (v0, n_t=21, v_max=20.0, a_max=3.0, a_min=-4.0))]
fn sample_profiles(v0: f64, n_t: usize, v_max: f64, a_max: f64, a_min: f64) -> PyResult<Vec<(f64, f64, f64)>> {
    let cfg = ProbeConfig {
        n_t,
        v_max,
        a_max,
        a_min,
        ..ProbeConfig::default()
    };
    Ok(motion::sample_profiles(v0, &cfg)
        .map_err(err)?
        .into_iter()
        .map(|p| (p.end_velocity, p.acceleration, p.ramp_duration))
        .collect())
}

/// Normalized sigmoid blend weight for `w` in [0, 1].
#[pyfunction]
fn blend_weight(w: f64, k: f64) -> f64 {
    motion::blend_weight(w, k)
}

/// `(speed_advice, direction, magnitude)` for a target velocity.
#[pyfunction]
#[pyo3(signature = (v0, v_tar, direction="straight", dead_band=0.5))]
fn derive_warning(v0: f64, v_tar: f64, direction: &str, dead_band: f64) -> PyResult<(&'static str, &'static str, f64)> {
    let direction = match direction {
        "left" => Direction::Left,
        "right" => Direction::Right,
        "straight" => Direction::Straight,
        other => return Err(err(format!("unknown direction '{other}'"))),
    };
    let w = planner::derive_warning(v0, v_tar, direction, dead_band);
    Ok((sim::speed_str(w.speed), sim::direction_str(w.direction), w.magnitude))
}

#[pymodule]
#[pyo3(name = "riskmaps")]
fn riskmaps_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("STREAM_VERSION", STREAM_VERSION)?;
    m.add_class::<PyScenario>()?;
    m.add_class::<PyWorld>()?;
    m.add_class::<PyTrace>()?;
    m.add_function(wrap_pyfunction!(survival_trace, m)?)?;
    m.add_function(wrap_pyfunction!(risk_integral, m)?)?;
    m.add_function(wrap_pyfunction!(sample_profiles, m)?)?;
    m.add_function(wrap_pyfunction!(blend_weight, m)?)?;
    m.add_function(wrap_pyfunction!(derive_warning, m)?)?;
    Ok(())
}
