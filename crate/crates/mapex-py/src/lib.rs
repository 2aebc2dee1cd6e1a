//! Python bindings: the main types and operations, exposed in-process.
//!
//! ```python
//! import mapex_py as mx
//! maps = mx.enumerate_maps(2, 2)
//! belief = mx.Belief(3, 3, k=5, false_negative=0.1, false_positive=0.05, seed=1)
//! belief.update_reading(0, 0, "opening", 6, True, 0)
//! log_text, metrics = mx.run_episode(open("scenario.toml").read())
//! ```

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use mapex::belief::BeliefState;
use mapex::benchmark::{benchmark_clique_costs, benchmark_csv, compare_methods, BenchmarkConfig};
use mapex::episode::run_episode as run_episode_rs;
use mapex::explorer::NavigationMethod;
use mapex::grid::{Direction, GridSpec, Intersection};
use mapex::scenario::Scenario;
use mapex::sensing::{Detector, Feature, NoiseModel, SensorReading, Wedge};
use mapex::world::{
    enumerate_maps as enumerate_maps_rs, sample_map as sample_map_rs, MapHypothesis,
    DEFAULT_ENUMERATION_BUDGET,
};

fn value_err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_direction(s: &str) -> PyResult<Direction> {
    s.chars()
        .next()
        .and_then(Direction::from_letter)
        .ok_or_else(|| value_err(format!("unknown direction `{s}` (use N/E/S/W)")))
}

fn parse_feature(s: &str) -> PyResult<Feature> {
    Feature::from_name(s).ok_or_else(|| {
        value_err(format!(
            "unknown feature `{s}` (opening, flat_wall, convex_corner, concave_corner)"
        ))
    })
}

/// One candidate corridor map.
#[pyclass(name = "Map", skip_from_py_object)]
#[derive(Clone)]
struct PyMap {
    inner: MapHypothesis,
}

#[pymethods]
impl PyMap {
    /// Parse the map text format.
    #[staticmethod]
    fn from_text(text: &str) -> PyResult<PyMap> {
        Ok(PyMap { inner: MapHypothesis::from_text(text).map_err(value_err)? })
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    #[getter]
    fn nx(&self) -> usize {
        self.inner.grid().nx
    }

    #[getter]
    fn ny(&self) -> usize {
        self.inner.grid().ny
    }

    /// Present corridors as (x, y, direction) triples in canonical order.
    fn edges(&self) -> Vec<(usize, usize, String)> {
        let grid = self.inner.grid();
        grid.edges()
            .into_iter()
            .filter(|e| self.inner.has_edge(e.id))
            .map(|e| (e.a.x, e.a.y, e.direction.letter().to_string()))
            .collect()
    }

    fn edge_count(&self) -> usize {
        self.inner.edge_count()
    }

    fn density(&self) -> f64 {
        self.inner.density().0
    }

    fn has_corridor(&self, x: usize, y: usize, direction: &str) -> PyResult<bool> {
        Ok(self.inner.has_corridor(Intersection::new(x, y), parse_direction(direction)?))
    }

    /// Junction class label at an intersection.
    fn junction_class(&self, x: usize, y: usize) -> String {
        self.inner.junction_type(Intersection::new(x, y)).class().name().to_string()
    }

    fn is_ldp(&self, x: usize, y: usize) -> bool {
        self.inner.is_ldp(Intersection::new(x, y))
    }

    /// Shortest corridor path length, or None when unreachable.
    fn shortest_path(&self, ax: usize, ay: usize, bx: usize, by: usize) -> Option<u32> {
        self.inner
            .shortest_path(Intersection::new(ax, ay), Intersection::new(bx, by))
            .reachable()
    }

    fn __eq__(&self, other: &PyMap) -> bool {
        self.inner == other.inner
    }

    fn __repr__(&self) -> String {
        format!(
            "Map({}x{}, {} corridors)",
            self.inner.grid().nx,
            self.inner.grid().ny,
            self.inner.edge_count()
        )
    }
}

/// Posterior over candidate maps plus the none-of-the-above state.
#[pyclass(name = "Belief")]
struct PyBelief {
    inner: BeliefState,
}

#[pymethods]
impl PyBelief {
    #[new]
    #[pyo3(signature = (nx, ny, k=5, false_negative=0.10, false_positive=0.05, seed=0))]
    fn new(
        nx: usize,
        ny: usize,
        k: usize,
        false_negative: f64,
        false_positive: f64,
        seed: u64,
    ) -> PyResult<PyBelief> {
        let grid = GridSpec::new(nx, ny).map_err(value_err)?;
        let noise = NoiseModel::new(false_negative, false_positive)
            .ok_or_else(|| value_err("noise rates must lie in [0, 1]"))?;
        let inner = BeliefState::init(grid, k, noise, seed, DEFAULT_ENUMERATION_BUDGET)
            .map_err(value_err)?;
        Ok(PyBelief { inner })
    }

    /// Probabilities over the hypothesis maps, NOTA last.
    fn probs(&self) -> Vec<f64> {
        self.inner.probs().to_vec()
    }

    fn nota(&self) -> f64 {
        self.inner.nota_prob()
    }

    fn nota_triggered(&self) -> bool {
        self.inner.nota_triggered()
    }

    fn exhaustive(&self) -> bool {
        self.inner.hypotheses().exhaustive()
    }

    fn maps(&self) -> Vec<PyMap> {
        self.inner
            .hypotheses()
            .maps()
            .iter()
            .map(|m| PyMap { inner: m.clone() })
            .collect()
    }

    /// Condition on one detector reading.
    fn update_reading(
        &mut self,
        x: usize,
        y: usize,
        feature: &str,
        wedge: u8,
        result: bool,
        step: u64,
    ) -> PyResult<()> {
        if wedge >= 8 {
            return Err(value_err("wedge must be in 0..8"));
        }
        let reading = SensorReading {
            location: Intersection::new(x, y),
            detector: Detector::new(parse_feature(feature)?, Wedge(wedge)),
            result,
            step,
        };
        self.inner = self.inner.update(reading).map_err(value_err)?;
        Ok(())
    }

    /// Condition on a revealed corridor status.
    fn update_edge(
        &mut self,
        x: usize,
        y: usize,
        direction: &str,
        present: bool,
        step: u64,
    ) -> PyResult<()> {
        self.inner = self
            .inner
            .update_edge(Intersection::new(x, y), parse_direction(direction)?, present, step)
            .map_err(value_err)?;
        Ok(())
    }

    /// Replace the hypothesis set, keeping the evidence log.
    fn regenerate(&mut self, seed: u64) -> PyResult<()> {
        self.inner = self.inner.regenerate(seed).map_err(value_err)?;
        Ok(())
    }

    fn __repr__(&self) -> String {
        format!(
            "Belief(k={}, nota={:.4}, exhaustive={})",
            self.inner.hypotheses().len(),
            self.inner.nota_prob(),
            self.inner.hypotheses().exhaustive()
        )
    }
}

/// Every consistent, connected map of an nx-by-ny grid.
#[pyfunction]
#[pyo3(signature = (nx, ny, budget=None))]
fn enumerate_maps(nx: usize, ny: usize, budget: Option<u64>) -> PyResult<Vec<PyMap>> {
    let grid = GridSpec::new(nx, ny).map_err(value_err)?;
    let maps = enumerate_maps_rs(grid, budget.unwrap_or(DEFAULT_ENUMERATION_BUDGET))
        .map_err(value_err)?;
    Ok(maps.into_iter().map(|inner| PyMap { inner }).collect())
}

/// Sample one valid map, deterministically for the seed.
#[pyfunction]
#[pyo3(signature = (nx, ny, seed, density_pref=true))]
fn sample_map(nx: usize, ny: usize, seed: u64, density_pref: bool) -> PyResult<PyMap> {
    let grid = GridSpec::new(nx, ny).map_err(value_err)?;
    Ok(PyMap { inner: sample_map_rs(grid, seed, density_pref) })
}

/// Run an episode from scenario TOML; returns (log_text, metrics dict).
#[pyfunction]
fn run_episode<'py>(py: Python<'py>, scenario_toml: &str) -> PyResult<(String, Bound<'py, PyDict>)> {
    let scenario = Scenario::from_toml(scenario_toml).map_err(value_err)?;
    let log = run_episode_rs(&scenario).map_err(value_err)?;
    let metrics = PyDict::new(py);
    let m = &log.metrics;
    metrics.set_item("attempts", m.attempts)?;
    metrics.set_item("traversals", m.traversals)?;
    metrics.set_item("sensing_actions", m.sensing_actions)?;
    metrics.set_item("tasks_completed", m.tasks_completed)?;
    metrics.set_item("tasks_total", m.tasks_total)?;
    metrics.set_item("posterior_true", m.posterior_true)?;
    metrics.set_item("nota_regenerations", m.nota_regenerations)?;
    metrics.set_item("simulated_minutes", m.simulated_minutes)?;
    Ok((log.to_text(), metrics))
}

/// Clique-cost benchmark; returns the CSV text.
#[pyfunction]
#[pyo3(signature = (nx=4, ny=4, sizes=vec![10, 20, 30], lengths=vec![4, 6, 8, 10], runs=10, seed=0, measure_time=false))]
fn benchmark(
    nx: usize,
    ny: usize,
    sizes: Vec<usize>,
    lengths: Vec<usize>,
    runs: usize,
    seed: u64,
    measure_time: bool,
) -> PyResult<String> {
    let grid = GridSpec::new(nx, ny).map_err(value_err)?;
    let cfg = BenchmarkConfig {
        grid,
        hypothesis_sizes: sizes,
        exploration_lengths: lengths,
        runs,
        seed,
        measure_time,
    };
    Ok(benchmark_csv(&benchmark_clique_costs(&cfg)))
}

/// Navigation-method comparison; returns the CSV text.
#[pyfunction]
#[pyo3(signature = (scenario_toml, methods, trials=10))]
fn compare(scenario_toml: &str, methods: Vec<String>, trials: usize) -> PyResult<String> {
    let scenario = Scenario::from_toml(scenario_toml).map_err(value_err)?;
    let methods: Vec<NavigationMethod> = methods
        .iter()
        .map(|m| {
            NavigationMethod::from_name(m)
                .ok_or_else(|| value_err(format!("unknown method `{m}`")))
        })
        .collect::<PyResult<_>>()?;
    let rows = compare_methods(&scenario, &methods, trials).map_err(value_err)?;
    Ok(mapex::benchmark::compare_csv(&rows))
}

#[pymodule]
fn mapex_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMap>()?;
    m.add_class::<PyBelief>()?;
    m.add_function(wrap_pyfunction!(enumerate_maps, m)?)?;
    m.add_function(wrap_pyfunction!(sample_map, m)?)?;
    m.add_function(wrap_pyfunction!(run_episode, m)?)?;
    m.add_function(wrap_pyfunction!(benchmark, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    Ok(())
}
