//! Python bindings: deployments, bound maps, campaigns and the service's
//! `evaluate` entry point.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use trpplan::bounds::{bound_grid, evaluate_point, BoundGrid};
use trpplan::campaign::{densification_loop, los_histogram, run_campaign as run, worst_ue_locations, WORST_FRACTION};
use trpplan::config::{named_preset, preset_catalog};
use trpplan::scenario::{densify, make_layout};
use trpplan::{
    CampaignConfig, CampaignResult, LayoutTag, MeasurementMode, NoiseModel, Point3, RefPolicy, ScenarioFamily,
    ScenarioSpec,
};

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse<T: serde::de::DeserializeOwned>(what: &str, s: &str) -> PyResult<T> {
    serde_json::from_value(serde_json::Value::String(s.into()))
        .map_err(|_| PyValueError::new_err(format!("unknown {what} {s:?}")))
}

type Xyz = (f64, f64, f64);

fn xyz(p: &Point3) -> Xyz {
    (p.x, p.y, p.z)
}

/// A scenario hall plus TRP positions.
#[pyclass(name = "Deployment", module = "trpplan_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyDeployment(trpplan::Deployment);

#[pymethods]
impl PyDeployment {
    /// `family` is "IOO", "InF-SH" or "InF-DH"; `layout` is "standard",
    /// "edge" or "mixed".
    #[staticmethod]
    #[pyo3(signature = (family, layout, n_trps = 12))]
    fn layout(family: &str, layout: &str, n_trps: usize) -> PyResult<Self> {
        let family: ScenarioFamily = parse("scenario family", family)?;
        let layout: LayoutTag = parse("layout", layout)?;
        make_layout(&ScenarioSpec::preset(family), layout, n_trps)
            .map(Self)
            .map_err(value_error)
    }

    /// A catalog preset such as "ioo-edge-12".
    #[staticmethod]
    fn preset(name: &str) -> PyResult<Self> {
        named_preset(name)
            .map(|p| Self(p.deployment))
            .ok_or_else(|| PyValueError::new_err(format!("unknown preset {name:?}")))
    }

    #[staticmethod]
    fn custom(family: &str, positions: Vec<Xyz>) -> PyResult<Self> {
        let family: ScenarioFamily = parse("scenario family", family)?;
        let points = positions.into_iter().map(|(x, y, z)| Point3::new(x, y, z));
        trpplan::Deployment::new(ScenarioSpec::preset(family), points, LayoutTag::Custom)
            .map(Self)
            .map_err(value_error)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        trpplan::Deployment::from_json(text).map(Self).map_err(value_error)
    }

    fn to_json(&self) -> String {
        self.0.to_json()
    }

    #[getter]
    fn family(&self) -> &'static str {
        self.0.scenario().family.as_str()
    }

    #[getter]
    fn layout_tag(&self) -> &'static str {
        self.0.layout().as_str()
    }

    #[getter]
    fn positions(&self) -> Vec<Xyz> {
        self.0.positions().map(|p| xyz(&p)).collect()
    }

    /// Hall extent `(x_len, y_len, ceiling_height)` in meters.
    #[getter]
    fn hall(&self) -> Xyz {
        let s = self.0.scenario();
        (s.x_len, s.y_len, s.ceiling_height)
    }

    /// A new deployment with `positions` appended.
    fn densify(&self, positions: Vec<Xyz>) -> PyResult<Self> {
        let points: Vec<Point3> = positions.into_iter().map(|(x, y, z)| Point3::new(x, y, z)).collect();
        densify(&self.0, &points).map(Self).map_err(value_error)
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __repr__(&self) -> String {
        format!(
            "Deployment({}, {}, {} TRPs)",
            self.family(),
            self.layout_tag(),
            self.0.len()
        )
    }
}

/// CRLB / GDOP values over the floor plan at UE height. Singular cells are `None`.
#[pyclass(name = "BoundMap", module = "trpplan_py", frozen)]
struct PyBoundMap(BoundGrid);

impl PyBoundMap {
    fn rows(&self, f: impl Fn(&trpplan::BoundCell) -> Option<f64>) -> Vec<Vec<Option<f64>>> {
        self.0
            .cells
            .chunks(self.0.nx)
            .map(|r| r.iter().map(&f).collect())
            .collect()
    }
}

#[pymethods]
impl PyBoundMap {
    #[getter]
    fn nx(&self) -> usize {
        self.0.nx
    }

    #[getter]
    fn ny(&self) -> usize {
        self.0.ny
    }

    #[getter]
    fn x(&self) -> Vec<f64> {
        self.0.cells[..self.0.nx].iter().map(|c| c.x).collect()
    }

    #[getter]
    fn y(&self) -> Vec<f64> {
        self.0.cells.iter().step_by(self.0.nx).map(|c| c.y).collect()
    }

    /// `ny` rows of `nx` values.
    fn crlb_rmse_2d(&self) -> Vec<Vec<Option<f64>>> {
        self.rows(|c| c.crlb_rmse_2d)
    }

    fn crlb_rmse_3d(&self) -> Vec<Vec<Option<f64>>> {
        self.rows(|c| c.crlb_rmse_3d)
    }

    fn gdop_2d(&self) -> Vec<Vec<Option<f64>>> {
        self.rows(|c| c.gdop_2d)
    }

    /// `(min, max)` of the 2D CRLB over non-singular cells.
    fn crlb_range(&self) -> Option<(f64, f64)> {
        self.0.range_of(|c| c.crlb_rmse_2d)
    }

    #[getter]
    fn singular_cells(&self) -> usize {
        self.0.singular_count()
    }
}

/// Summary of a Monte Carlo campaign.
#[pyclass(name = "CampaignSummary", module = "trpplan_py", frozen, get_all)]
struct PyCampaignSummary {
    n_trps: usize,
    n_drops: usize,
    p80: Option<f64>,
    p90: Option<f64>,
    p95: Option<f64>,
    availability_fraction: f64,
    converged_fraction: f64,
    mean_los_links: f64,
    /// Sorted horizontal errors of available drops.
    cdf: Vec<f64>,
    los_histogram: Vec<usize>,
    worst_ues: Vec<Xyz>,
}

impl From<&CampaignResult> for PyCampaignSummary {
    fn from(r: &CampaignResult) -> Self {
        let s = &r.summary;
        let worst = worst_ue_locations(r, WORST_FRACTION).unwrap_or_default();
        Self {
            n_trps: r.n_trps,
            n_drops: r.drops.len(),
            p80: s.percentiles.map(|p| p.p80),
            p90: s.percentiles.map(|p| p.p90),
            p95: s.percentiles.map(|p| p.p95),
            availability_fraction: s.availability_fraction,
            converged_fraction: s.converged_fraction,
            mean_los_links: s.mean_los_links,
            cdf: s.cdf.clone(),
            los_histogram: los_histogram(r),
            worst_ues: worst.iter().map(xyz).collect(),
        }
    }
}

#[pymethods]
impl PyCampaignSummary {
    fn __repr__(&self) -> String {
        format!(
            "CampaignSummary(n_trps={}, n_drops={}, p90={:?}, availability={})",
            self.n_trps, self.n_drops, self.p90, self.availability_fraction
        )
    }
}

fn noise(sigma_toa_m: f64, nlos_bias_mean_m: f64, seed: u64) -> PyResult<NoiseModel> {
    let n = NoiseModel {
        sigma_toa_m,
        nlos_bias_mean_m,
        seed,
        ..NoiseModel::default()
    };
    n.validate().map_err(value_error)?;
    Ok(n)
}

fn campaign_config(
    deployment: &PyDeployment,
    n_drops: usize,
    seed: u64,
    sigma_toa_m: f64,
    nlos_bias_mean_m: f64,
    measurement_mode: &str,
) -> PyResult<CampaignConfig> {
    let mode: MeasurementMode = parse("measurement mode", measurement_mode)?;
    let noise = noise(sigma_toa_m, nlos_bias_mean_m, seed)?;
    let mut config = CampaignConfig::new(deployment.0.clone(), noise, n_drops, seed);
    config.measurement_mode = mode;
    config.validate().map_err(value_error)?;
    Ok(config)
}

/// Bound map over the hall at `cell_size` meters.
#[pyfunction]
#[pyo3(signature = (deployment, cell_size = 1.0, sigma_toa_m = 0.2))]
fn bound_map(
    py: Python<'_>,
    deployment: PyRef<'_, PyDeployment>,
    cell_size: f64,
    sigma_toa_m: f64,
) -> PyResult<PyBoundMap> {
    let d = deployment.0.clone();
    let noise = noise(sigma_toa_m, NoiseModel::default().nlos_bias_mean_m, 0)?;
    py.detach(|| bound_grid(d.scenario(), &d, RefPolicy::Nearest, cell_size, &noise))
        .map(PyBoundMap)
        .map_err(value_error)
}

/// `(gdop_2d, crlb_rmse_2d, crlb_rmse_3d)` at one point; `None` where singular.
#[pyfunction]
#[pyo3(signature = (deployment, x, y, z, sigma_toa_m = 0.2))]
fn bounds_at(
    deployment: PyRef<'_, PyDeployment>,
    x: f64,
    y: f64,
    z: f64,
    sigma_toa_m: f64,
) -> PyResult<(Option<f64>, Option<f64>, Option<f64>)> {
    let theta = Point3::new(x, y, z);
    let d = &deployment.0;
    let c = evaluate_point(&theta, d, d.nearest_trp(&theta), sigma_toa_m).map_err(value_error)?;
    Ok((c.gdop_2d, c.crlb_rmse_2d, c.crlb_rmse_3d))
}

#[pyfunction]
#[pyo3(signature = (deployment, n_drops = 10_000, seed = 0, sigma_toa_m = 0.2, nlos_bias_mean_m = 2.0, measurement_mode = "all_trps"))]
fn run_campaign(
    py: Python<'_>,
    deployment: PyRef<'_, PyDeployment>,
    n_drops: usize,
    seed: u64,
    sigma_toa_m: f64,
    nlos_bias_mean_m: f64,
    measurement_mode: &str,
) -> PyResult<PyCampaignSummary> {
    let config = campaign_config(
        &deployment,
        n_drops,
        seed,
        sigma_toa_m,
        nlos_bias_mean_m,
        measurement_mode,
    )?;
    let result = py.detach(|| run(&config)).map_err(value_error)?;
    Ok(PyCampaignSummary::from(&result))
}

/// Base campaign plus `k_max` densification steps; returns
/// `[(deployment, p90), ...]` starting with the base.
#[pyfunction]
#[pyo3(signature = (deployment, k_max = 3, n_drops = 10_000, seed = 0, sigma_toa_m = 0.2, nlos_bias_mean_m = 2.0))]
fn densification(
    py: Python<'_>,
    deployment: PyRef<'_, PyDeployment>,
    k_max: usize,
    n_drops: usize,
    seed: u64,
    sigma_toa_m: f64,
    nlos_bias_mean_m: f64,
) -> PyResult<Vec<(PyDeployment, Option<f64>)>> {
    let config = campaign_config(&deployment, n_drops, seed, sigma_toa_m, nlos_bias_mean_m, "all_trps")?;
    let steps = py
        .detach(|| densification_loop(&config, k_max, 1))
        .map_err(value_error)?;
    Ok(steps
        .into_iter()
        .map(|s| (PyDeployment(s.deployment), s.percentiles.map(|p| p.p90)))
        .collect())
}

/// Runs an `/api/evaluate` request body and returns the response body.
#[pyfunction]
fn evaluate(py: Python<'_>, request_json: &str) -> PyResult<String> {
    let req = trpplan_service::parse_request(request_json).map_err(value_error)?;
    let body = py.detach(|| trpplan_service::evaluate(&req)).map_err(value_error)?;
    Ok(body.to_string())
}

/// Names of the built-in scenario/layout presets.
#[pyfunction]
fn presets() -> Vec<String> {
    preset_catalog().into_iter().map(|p| p.name).collect()
}

#[pymodule]
fn trpplan_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDeployment>()?;
    m.add_class::<PyBoundMap>()?;
    m.add_class::<PyCampaignSummary>()?;
    m.add_function(wrap_pyfunction!(bound_map, m)?)?;
    m.add_function(wrap_pyfunction!(bounds_at, m)?)?;
    m.add_function(wrap_pyfunction!(run_campaign, m)?)?;
    m.add_function(wrap_pyfunction!(densification, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(presets, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
