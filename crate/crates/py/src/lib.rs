//! Python bindings for the scenario density, tail fitting, foreseeable-range
//! solvers and the driver simulator.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use rfp_core::density::{Hyperrectangle, KdeModel as CoreKde, ParamTransform};
use rfp_core::driver_sim::{
    simulate_with, simulate_with_delay, DriverConfig, ScenarioSpec, SimSettings,
};
use rfp_core::evt::{build_excess_set, fit_gpd, GpdFit as CoreGpd, Orientation};
use rfp_core::foreseeable::{self, ForeseeableQuery};
use rfp_core::preventable::{self, DriverSimulator, SequentialOptions};
use rfp_core::{ExposureEstimate, ScenarioFamily};

fn to_py_err(e: impl Into<rfp_core::Error>) -> PyErr {
    let e: rfp_core::Error = e.into();
    if e.is_numerical() {
        PyRuntimeError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn parse_transform(name: &str) -> PyResult<ParamTransform> {
    match name {
        "identity" => Ok(ParamTransform::Identity),
        "log" => Ok(ParamTransform::Log),
        "logit" => Ok(ParamTransform::Logit),
        other => Err(PyValueError::new_err(format!(
            "unknown transform {other:?}"
        ))),
    }
}

fn parse_orientation(name: &str) -> PyResult<Orientation> {
    match name {
        "upper" => Ok(Orientation::Upper),
        "lower" => Ok(Orientation::Lower),
        other => Err(PyValueError::new_err(format!(
            "orientation must be 'upper' or 'lower', got {other:?}"
        ))),
    }
}

fn parse_family(name: &str) -> PyResult<ScenarioFamily> {
    name.parse().map_err(PyValueError::new_err)
}

fn exposure(rate: f64) -> ExposureEstimate {
    ExposureEstimate {
        category_id: String::new(),
        count: 0,
        hours: 1.0,
        rate_per_hour: rate,
    }
}

/// Gaussian kernel density over transformed, standardized parameters.
#[pyclass(name = "KdeModel", module = "rfp")]
struct KdeModel {
    inner: CoreKde,
}

#[pymethods]
impl KdeModel {
    /// Fits a KDE to `points` (list of parameter vectors); `transforms` holds
    /// one of "identity", "log", "logit" per dimension.
    #[new]
    #[pyo3(signature = (points, transforms=None))]
    fn new(points: Vec<Vec<f64>>, transforms: Option<Vec<String>>) -> PyResult<Self> {
        let d = points.first().map_or(0, Vec::len);
        let transforms = match transforms {
            Some(names) => names
                .iter()
                .map(|n| parse_transform(n))
                .collect::<PyResult<Vec<_>>>()?,
            None => vec![ParamTransform::Identity; d],
        };
        let inner = CoreKde::fit(&points, &transforms, &[]).map_err(to_py_err)?;
        Ok(KdeModel { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(KdeModel {
            inner: CoreKde::from_json(text).map_err(to_py_err)?,
        })
    }

    fn to_json(&self) -> PyResult<String> {
        self.inner.to_json().map_err(to_py_err)
    }

    #[getter]
    fn bandwidth(&self) -> f64 {
        self.inner.bandwidth()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn pdf(&self, theta: Vec<f64>) -> PyResult<f64> {
        self.check_dim(&theta)?;
        Ok(self.inner.pdf(&theta))
    }

    fn cdf(&self, theta: Vec<f64>) -> PyResult<f64> {
        self.check_dim(&theta)?;
        Ok(self.inner.cdf(&theta))
    }

    fn rect_probability(&self, lower: Vec<f64>, upper: Vec<f64>) -> PyResult<f64> {
        let rect = Hyperrectangle::new(lower, upper).map_err(to_py_err)?;
        if rect.dim() != self.inner.dim() {
            return Err(PyValueError::new_err(
                "rectangle dimension differs from the model",
            ));
        }
        Ok(self.inner.rect_probability(&rect))
    }

    #[pyo3(signature = (n, seed=0))]
    fn sample(&self, py: Python<'_>, n: usize, seed: u64) -> PyResult<Vec<Vec<f64>>> {
        py.detach(|| self.inner.sample(seed, n)).map_err(to_py_err)
    }

    /// Range whose complement occurs at `lambda_fs` per hour, expanding every
    /// dimension on both sides; returns a dict with `lower`, `upper` and
    /// the achieved inside probability.
    fn foreseeable_range<'py>(
        &self,
        py: Python<'py>,
        exposure_rate: f64,
        lambda_fs: f64,
    ) -> PyResult<Bound<'py, PyDict>> {
        let query = ForeseeableQuery::expand_both(lambda_fs, self.inner.dim());
        let r = foreseeable::solve_range_kde(&self.inner, &exposure(exposure_rate), &query)
            .map_err(to_py_err)?;
        let d = PyDict::new(py);
        d.set_item("lower", r.rect.lower.clone())?;
        d.set_item("upper", r.rect.upper.clone())?;
        d.set_item("target_inside_prob", r.target_inside_prob)?;
        d.set_item("achieved_inside_prob", r.achieved_inside_prob)?;
        d.set_item("residual_rate", r.residual_rate)?;
        Ok(d)
    }

    fn __repr__(&self) -> String {
        format!(
            "KdeModel(n={}, dim={}, bandwidth={:.6})",
            self.inner.len(),
            self.inner.dim(),
            self.inner.bandwidth()
        )
    }
}

impl KdeModel {
    fn check_dim(&self, theta: &[f64]) -> PyResult<()> {
        if theta.len() != self.inner.dim() {
            return Err(PyValueError::new_err(format!(
                "expected {} values, got {}",
                self.inner.dim(),
                theta.len()
            )));
        }
        Ok(())
    }
}

/// Generalized Pareto tail above a threshold.
#[pyclass(name = "GpdFit", module = "rfp")]
struct GpdFit {
    inner: CoreGpd,
}

#[pymethods]
impl GpdFit {
    /// A tail model from known parameters.
    #[new]
    #[pyo3(signature = (threshold, shape, scale, exceed_prob, orientation="upper"))]
    fn new(
        threshold: f64,
        shape: f64,
        scale: f64,
        exceed_prob: f64,
        orientation: &str,
    ) -> PyResult<Self> {
        let o = parse_orientation(orientation)?;
        let inner =
            CoreGpd::from_parameters(threshold, shape, scale, exceed_prob, o).map_err(to_py_err)?;
        Ok(GpdFit { inner })
    }

    /// Maximum likelihood fit to the exceedances of `values`.
    #[staticmethod]
    #[pyo3(signature = (values, exceed_fraction=0.1, orientation="upper"))]
    fn fit(values: Vec<f64>, exceed_fraction: f64, orientation: &str) -> PyResult<Self> {
        let excess = build_excess_set(&values, parse_orientation(orientation)?, exceed_fraction)
            .map_err(to_py_err)?;
        Ok(GpdFit {
            inner: fit_gpd(&excess).map_err(to_py_err)?,
        })
    }

    #[getter]
    fn threshold(&self) -> f64 {
        self.inner.threshold
    }

    #[getter]
    fn shape(&self) -> f64 {
        self.inner.shape
    }

    #[getter]
    fn scale(&self) -> f64 {
        self.inner.scale
    }

    #[getter]
    fn exceed_prob(&self) -> f64 {
        self.inner.exceed_prob
    }

    fn cdf(&self, excess: f64) -> PyResult<f64> {
        self.inner.cdf(excess).map_err(to_py_err)
    }

    fn quantile(&self, p: f64) -> f64 {
        self.inner.quantile(p)
    }

    /// One-sided foreseeable bound in raw units.
    fn bound(&self, exposure_rate: f64, lambda_fs: f64) -> PyResult<f64> {
        let b = foreseeable::solve_range_evt(&self.inner, &exposure(exposure_rate), lambda_fs)
            .map_err(to_py_err)?;
        Ok(b.raw_bound)
    }

    fn __repr__(&self) -> String {
        format!(
            "GpdFit(threshold={}, shape={}, scale={}, exceed_prob={})",
            self.inner.threshold, self.inner.shape, self.inner.scale, self.inner.exceed_prob
        )
    }
}

/// Encounters per hour.
#[pyfunction]
fn exposure_rate(count: usize, hours: f64) -> PyResult<f64> {
    Ok(ExposureEstimate::from_count("", count, hours)
        .map_err(to_py_err)?
        .rate_per_hour)
}

/// Probability mass the foreseeable range must hold: `1 − λ / E`.
#[pyfunction]
fn target_inside_probability(exposure_rate: f64, lambda_fs: f64) -> PyResult<f64> {
    foreseeable::target_inside_probability(exposure_rate, lambda_fs).map_err(to_py_err)
}

/// Simulates one scenario with the default driver; returns the outcome as a dict.
#[pyfunction]
#[pyo3(signature = (family, theta, seed=0, reaction_delay=None, dt=0.01))]
fn simulate<'py>(
    py: Python<'py>,
    family: &str,
    theta: Vec<f64>,
    seed: u64,
    reaction_delay: Option<f64>,
    dt: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let spec = ScenarioSpec::new(parse_family(family)?, theta).map_err(to_py_err)?;
    let driver = DriverConfig::default();
    let settings = SimSettings {
        dt,
        ..Default::default()
    };
    let out = match reaction_delay {
        Some(tau) => simulate_with_delay(&spec, &driver, &settings, tau, None),
        None => simulate_with(&spec, &driver, &settings, seed, None),
    }
    .map_err(to_py_err)?;
    let d = PyDict::new(py);
    d.set_item("collision", out.collision)?;
    d.set_item("min_ttc", out.min_ttc)?;
    d.set_item("final_gap", out.final_gap)?;
    d.set_item("reaction_delay_used", out.reaction_delay_used)?;
    d.set_item("collision_time", out.collision_time)?;
    Ok(d)
}

/// Sequential binomial test of the collision probability of one scenario.
#[pyfunction]
#[pyo3(signature = (family, theta, seed=0, p_t=0.5, delta_p=0.01, cap=100))]
fn sequential_probability<'py>(
    py: Python<'py>,
    family: &str,
    theta: Vec<f64>,
    seed: u64,
    p_t: f64,
    delta_p: f64,
    cap: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let family = parse_family(family)?;
    family.validate(&theta).map_err(PyValueError::new_err)?;
    let sim = DriverSimulator::new(family, DriverConfig::default());
    let opts = SequentialOptions { p_t, delta_p, cap };
    let r = py
        .detach(|| preventable::sequential_probability(&sim, &theta, &opts, seed))
        .map_err(to_py_err)?;
    let d = PyDict::new(py);
    d.set_item("p_hat", r.p_hat)?;
    d.set_item("n_sims", r.n_sims)?;
    d.set_item("n_collisions", r.n_collisions)?;
    let verdict = match r.verdict {
        preventable::Verdict::Above => "above",
        preventable::Verdict::Below => "below",
        preventable::Verdict::UndecidedAtCap => "undecided-at-cap",
    };
    d.set_item("verdict", verdict)?;
    Ok(d)
}

#[pymodule]
fn rfp(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<KdeModel>()?;
    m.add_class::<GpdFit>()?;
    m.add_function(wrap_pyfunction!(exposure_rate, m)?)?;
    m.add_function(wrap_pyfunction!(target_inside_probability, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(sequential_probability, m)?)?;
    Ok(())
}
