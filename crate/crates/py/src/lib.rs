//! Python bindings. Results come back as plain dicts and lists.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

use markov_search::cli::schema::{Instance as CoreInstance, InstanceFile};
use markov_search::cli::{self, CliError, ConvertTarget, PlanArg, ProphetArgs, ThresholdArg};
use markov_search::exante::CurveMode;
use markov_search::generate::{self, MspShape};
use markov_search::prophet::DEFAULT_THRESHOLD_SAMPLES;
use markov_search::Error;

create_exception!(markov_search, MarkovSearchError, PyException, "Invalid input or failed computation.");
create_exception!(markov_search, SizeLimitError, MarkovSearchError, "Instance too large for exhaustive search.");

fn py_err(e: CliError) -> PyErr {
    match e {
        CliError::Core(Error::SizeLimit { .. }) => SizeLimitError::new_err(e.to_string()),
        e => MarkovSearchError::new_err(e.to_string()),
    }
}

fn to_py<'py, T: serde::Serialize>(py: Python<'py>, v: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(v).map_err(|e| MarkovSearchError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// A validated instance of any supported kind.
#[pyclass(module = "markov_search", frozen)]
pub struct Instance {
    inner: CoreInstance,
}

#[pymethods]
impl Instance {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let file: InstanceFile = serde_json::from_str(text).map_err(|e| MarkovSearchError::new_err(e.to_string()))?;
        file.to_instance().map(|inner| Self { inner }).map_err(|e| py_err(e.into()))
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        cli::load(&path).map(|inner| Self { inner }).map_err(py_err)
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string_pretty(&InstanceFile::from_instance(&self.inner))
            .map_err(|e| MarkovSearchError::new_err(e.to_string()))
    }

    #[getter]
    fn kind(&self) -> &'static str {
        self.inner.kind()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Instance(kind={:?}, n={})", self.inner.kind(), self.inner.len())
    }

    /// Weitzman indices and capped values per state.
    fn indices<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &cli::index(&self.inner).map_err(py_err)?)
    }

    /// Optimal single-agent policies against the price `tau`.
    fn saup<'py>(&self, py: Python<'py>, tau: f64) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &cli::saup(&self.inner, tau).map_err(py_err)?)
    }

    /// Ex-ante relaxation; pass `c` and `eps` for approximate curves.
    #[pyo3(signature = (fptas=false, c=0.01, eps=0.1))]
    fn exante<'py>(&self, py: Python<'py>, fptas: bool, c: f64, eps: f64) -> PyResult<Bound<'py, PyAny>> {
        let mode = if fptas { CurveMode::Fptas { c, eps } } else { CurveMode::Exact };
        to_py(py, &cli::exante(&self.inner, mode).map_err(py_err)?)
    }

    /// Monte Carlo estimate of the online algorithm's welfare.
    #[pyo3(signature = (eps=0.1, trials=10_000, seed=0, exact_thresholds=None, exact_plan=false))]
    fn prophet<'py>(
        &self,
        py: Python<'py>,
        eps: f64,
        trials: usize,
        seed: u64,
        exact_thresholds: Option<bool>,
        exact_plan: bool,
    ) -> PyResult<Bound<'py, PyAny>> {
        let args = ProphetArgs {
            eps,
            trials,
            seed,
            threshold_mode: match exact_thresholds {
                None => ThresholdArg::Auto,
                Some(true) => ThresholdArg::Exact,
                Some(false) => ThresholdArg::MonteCarlo,
            },
            samples: DEFAULT_THRESHOLD_SAMPLES,
            plan: if exact_plan { PlanArg::Exact } else { PlanArg::Fptas },
        };
        let report = py.detach(|| cli::prophet(&self.inner, &args)).map_err(py_err)?;
        to_py(py, &report.to_json())
    }

    /// Exhaustive optimum; raises `SizeLimitError` on large instances.
    fn oracle(&self, py: Python<'_>) -> PyResult<f64> {
        py.detach(|| cli::oracle(&self.inner)).map_err(py_err)
    }

    /// Rewrites as `"pandora_cabinets"` or `"cms"`.
    #[pyo3(signature = (to, eps=None))]
    fn convert(&self, to: &str, eps: Option<f64>) -> PyResult<Self> {
        let target = match to {
            "pandora_cabinets" => ConvertTarget::PandoraCabinets,
            "cms" => ConvertTarget::Cms,
            other => return Err(MarkovSearchError::new_err(format!("unknown target {other:?}"))),
        };
        cli::convert(&self.inner, target, eps).map(|inner| Self { inner }).map_err(py_err)
    }
}

/// Seeded random instance of the given kind.
#[pyfunction]
#[pyo3(signature = (kind, n, seed=0, max_rank=2, max_states=6, max_actions=2, max_drawers=3, max_atoms=3))]
#[allow(clippy::too_many_arguments)]
fn random_instance(
    kind: &str,
    n: usize,
    seed: u64,
    max_rank: usize,
    max_states: usize,
    max_actions: usize,
    max_drawers: usize,
    max_atoms: usize,
) -> PyResult<Instance> {
    let mut rng = generate::seeded(seed);
    let shape = MspShape { max_states, max_actions, ..MspShape::default() };
    let inner = match kind {
        "cms" => generate::random_cms(&mut rng, n, max_rank, &shape).map(CoreInstance::Cms),
        "cabinets" => generate::random_cabinets(&mut rng, n, max_rank, max_drawers, max_atoms).map(CoreInstance::Cabinets),
        "pandora_cabinets" => generate::random_pandora_cabinets(&mut rng, n, max_rank, max_drawers, max_states)
            .map(CoreInstance::PandoraCabinets),
        "noi_pandora" => generate::random_noi(&mut rng, n, max_atoms).map(CoreInstance::NoiPandora),
        other => return Err(MarkovSearchError::new_err(format!("unknown kind {other:?}"))),
    };
    inner.map(|inner| Instance { inner }).map_err(|e| py_err(e.into()))
}

#[pymodule]
#[pyo3(name = "markov_search")]
fn bindings(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Instance>()?;
    m.add_function(wrap_pyfunction!(random_instance, m)?)?;
    m.add("MarkovSearchError", m.py().get_type::<MarkovSearchError>())?;
    m.add("SizeLimitError", m.py().get_type::<SizeLimitError>())?;
    Ok(())
}
