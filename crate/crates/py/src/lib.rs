//! Python bindings: phantoms and centerline graphs, geodesic distances, the
//! navigation environment, DDPG training and checkpointed policies.

use std::fmt::Display;
use std::sync::Arc;

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use vasonav::ddpg::{self, Checkpoint, DdpgConfig};
use vasonav::env::{make_env, Observation, TaskSpec, OBS_DIM};
use vasonav::guidewire::GuidewireConfig;
use vasonav::numfmt::to_json_pretty;
use vasonav::reward::RewardMode;
use vasonav::vesselgraph::{self as vg, geodesic_from, load_centerline, to_centerline_document};
use vasonav::Point3;

fn value_err<E: Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse_or_default<T: serde::de::DeserializeOwned + Default>(json: Option<&str>) -> PyResult<T> {
    json.map_or_else(|| Ok(T::default()), |s| serde_json::from_str(s).map_err(value_err))
}

fn point(p: [f64; 3]) -> Point3 {
    Point3::new(p[0], p[1], p[2])
}

/// Centerline graph (nodes with positions and radii, labelled endpoints).
#[pyclass(name = "VesselGraph", module = "vasonav", frozen)]
struct PyVesselGraph {
    inner: Arc<vg::VesselGraph>,
}

impl PyVesselGraph {
    fn node_id(&self, node: &Bound<'_, PyAny>) -> PyResult<usize> {
        if let Ok(name) = node.extract::<String>() {
            return self.inner.label(&name).map_err(value_err);
        }
        let id: usize = node.extract()?;
        if !self.inner.contains_node(id) {
            return Err(PyValueError::new_err(format!("unknown node {id}")));
        }
        Ok(id)
    }
}

#[pymethods]
impl PyVesselGraph {
    /// Y-shaped bifurcation phantom; `params` is an optional JSON object.
    #[staticmethod]
    #[pyo3(signature = (params=None))]
    fn simplified(params: Option<&str>) -> PyResult<Self> {
        let g = vg::generate_simplified_phantom(&parse_or_default(params)?).map_err(value_err)?;
        Ok(Self { inner: Arc::new(g) })
    }

    #[staticmethod]
    #[pyo3(signature = (params=None))]
    fn complex(params: Option<&str>) -> PyResult<Self> {
        let g = vg::generate_complex_phantom(&parse_or_default(params)?).map_err(value_err)?;
        Ok(Self { inner: Arc::new(g) })
    }

    #[staticmethod]
    #[pyo3(signature = (params=None))]
    fn straight(params: Option<&str>) -> PyResult<Self> {
        let g = vg::generate_straight_vessel(&parse_or_default(params)?).map_err(value_err)?;
        Ok(Self { inner: Arc::new(g) })
    }

    /// Parses a centerline JSON document.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self { inner: Arc::new(load_centerline(text).map_err(value_err)?) })
    }

    fn to_json(&self) -> PyResult<String> {
        to_json_pretty(&to_centerline_document(&self.inner)).map_err(value_err)
    }

    fn resample(&self, spacing: f64) -> PyResult<Self> {
        Ok(Self { inner: Arc::new(vg::resample(&self.inner, spacing).map_err(value_err)?) })
    }

    #[getter]
    fn node_count(&self) -> usize {
        self.inner.node_count()
    }

    #[getter]
    fn edge_count(&self) -> usize {
        self.inner.edge_count()
    }

    fn labels<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let d = PyDict::new(py);
        for (k, v) in self.inner.labels() {
            d.set_item(k, v)?;
        }
        Ok(d)
    }

    fn edges(&self) -> Vec<(usize, usize)> {
        self.inner.edges().iter().map(|e| e.endpoints).collect()
    }

    fn position(&self, node: &Bound<'_, PyAny>) -> PyResult<(f64, f64, f64)> {
        let p = self.inner.position(self.node_id(node)?);
        Ok((p.x, p.y, p.z))
    }

    fn curvature(&self, node: &Bound<'_, PyAny>) -> PyResult<f64> {
        Ok(self.inner.node_curvature(self.node_id(node)?))
    }

    fn nearest_node(&self, p: [f64; 3]) -> usize {
        self.inner.nearest_node(point(p))
    }

    /// Along-vessel distance from every node to `goal`.
    #[pyo3(signature = (goal, alpha=0.0))]
    fn geodesic(&self, goal: &Bound<'_, PyAny>, alpha: f64) -> PyResult<Vec<f64>> {
        let field = geodesic_from(&self.inner, self.node_id(goal)?, alpha).map_err(value_err)?;
        Ok(field.dist().to_vec())
    }

    /// Along-vessel distance from an arbitrary point (projected onto the
    /// nearest centerline segment) to `goal`.
    #[pyo3(signature = (goal, p, alpha=0.0))]
    fn manifold_distance(&self, goal: &Bound<'_, PyAny>, p: [f64; 3], alpha: f64) -> PyResult<f64> {
        let field = geodesic_from(&self.inner, self.node_id(goal)?, alpha).map_err(value_err)?;
        field.manifold_distance(&self.inner, point(p)).map_err(value_err)
    }

    fn __repr__(&self) -> String {
        format!("VesselGraph(nodes={}, edges={})", self.inner.node_count(), self.inner.edge_count())
    }
}

/// Navigation environment on one start/goal task.
#[pyclass(name = "Env", module = "vasonav")]
struct PyEnv {
    inner: vasonav::env::Env,
}

fn state_tuple<'py>(py: Python<'py>, r: &vasonav::env::StepResult) -> PyResult<(Vec<f64>, f64, bool, Bound<'py, PyDict>)> {
    let info = PyDict::new(py);
    info.set_item("d_current", r.info.d_current)?;
    info.set_item("event", r.info.event.name())?;
    info.set_item("step", r.info.step)?;
    info.set_item("applied_action", r.info.applied_action.to_vec())?;
    Ok((r.obs.to_array().to_vec(), r.reward, r.done, info))
}

#[pymethods]
impl PyEnv {
    /// `start`/`goal` are node labels or ids; `reward_mode` is one of
    /// `shaped_manifold`, `negative_distance`, `shaped_euclidean`; `wire` is
    /// an optional JSON object of guidewire settings.
    #[new]
    #[pyo3(signature = (graph, start, goal, seed=0, reward_mode="shaped_manifold", max_steps=300, alpha=0.0, wire=None))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        graph: &PyVesselGraph,
        start: &Bound<'_, PyAny>,
        goal: &Bound<'_, PyAny>,
        seed: u64,
        reward_mode: &str,
        max_steps: usize,
        alpha: f64,
        wire: Option<&str>,
    ) -> PyResult<Self> {
        let mut task = TaskSpec::new(graph.inner.clone(), graph.node_id(start)?, graph.node_id(goal)?);
        task.reward.mode = serde_json::from_value::<RewardMode>(reward_mode.into()).map_err(value_err)?;
        task.max_steps = max_steps;
        task.alpha = alpha;
        task.wire = parse_or_default::<GuidewireConfig>(wire)?;
        Ok(Self { inner: make_env(task, seed).map_err(value_err)? })
    }

    #[getter]
    fn obs_dim(&self) -> usize {
        OBS_DIM
    }

    #[getter]
    fn action_bounds(&self) -> (f64, f64) {
        let b = self.inner.task().action_bounds();
        (b[0], b[1])
    }

    fn reset(&mut self) -> Vec<f64> {
        self.inner.reset().to_array().to_vec()
    }

    /// Returns `(obs, reward, done, info)`.
    fn step<'py>(&mut self, py: Python<'py>, action: [f64; 2]) -> PyResult<(Vec<f64>, f64, bool, Bound<'py, PyDict>)> {
        let r = self.inner.step(action).map_err(value_err)?;
        state_tuple(py, &r)
    }

    /// Distance to the goal under the reward's metric, if reset.
    fn distance(&self) -> Option<f64> {
        self.inner.distance()
    }

    /// Greedy success rate and mean successful sim time of `policy`.
    fn evaluate(&mut self, policy: &PyPolicy, episodes: usize) -> PyResult<(f64, Option<f64>)> {
        let p = &policy.inner;
        let ev = vasonav::env::evaluate(&mut self.inner, |o| p.greedy(o), episodes).map_err(value_err)?;
        Ok((ev.success_rate, ev.mean_sim_time))
    }
}

/// Deterministic actor network with its observation scaling.
#[pyclass(name = "Policy", module = "vasonav", frozen)]
struct PyPolicy {
    inner: ddpg::Policy,
    config: DdpgConfig,
}

#[pymethods]
impl PyPolicy {
    #[staticmethod]
    fn from_checkpoint(text: &str) -> PyResult<Self> {
        let ck = Checkpoint::from_json(text).map_err(value_err)?;
        Ok(Self { inner: ck.to_policy().map_err(value_err)?, config: ck.config })
    }

    fn to_checkpoint(&self) -> String {
        Checkpoint::from_policy(&self.inner, &self.config).to_json()
    }

    fn act(&self, obs: [f64; OBS_DIM]) -> (f64, f64) {
        let a = self.inner.greedy(&Observation::from_array(obs));
        (a[0], a[1])
    }
}

/// Trains on the environment's task. `config` is an optional JSON object of
/// trainer settings. Returns the final policy and the training log as CSV.
#[pyfunction]
#[pyo3(signature = (env, config=None))]
fn train(py: Python<'_>, env: &PyEnv, config: Option<&str>) -> PyResult<(PyPolicy, String)> {
    let config: DdpgConfig = parse_or_default(config)?;
    let task = env.inner.task().clone();
    let out = py
        .detach(|| ddpg::train(|seed| make_env(task.clone(), seed), &config))
        .map_err(value_err)?;
    Ok((PyPolicy { inner: out.policy, config }, out.log.to_csv_string()))
}

/// Curvature of the circle through three points (0 if collinear).
#[pyfunction]
fn menger_curvature(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> f64 {
    vg::menger_curvature(point(a), point(b), point(c))
}

#[pymodule]
#[pyo3(name = "vasonav")]
fn vasonav_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyVesselGraph>()?;
    m.add_class::<PyEnv>()?;
    m.add_class::<PyPolicy>()?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(menger_curvature, m)?)?;
    Ok(())
}
