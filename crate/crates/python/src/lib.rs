//! Python bindings: datasets, descriptors, splits, evidential math, metrics
//! and the benchmark pipeline.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use oodbench_core::dataset::{parse_dataset, records_to_string, DatasetFormat};
use oodbench_core::descriptors::{soap_dataset, SoapConfig};
use oodbench_core::evidential::{self as ev, LossConfig};
use oodbench_core::harness::{self, RunConfig};
use oodbench_core::metrics::MetricReport;
use oodbench_core::runtime::PassTensor;
use oodbench_core::splitting::{self, Strategy};
use oodbench_core::{Error, LabeledDataset};

fn to_py(e: Error) -> PyErr {
    let msg = format!("[{}] {e}", e.kind());
    match e {
        Error::Io { .. } => PyIOError::new_err(msg),
        Error::Training { .. } | Error::Internal(_) | Error::Stage { .. } => {
            PyRuntimeError::new_err(msg)
        }
        _ => PyValueError::new_err(msg),
    }
}

type Nig = (f64, f64, f64, f64);

fn nig(p: Nig) -> ev::NigParams {
    ev::NigParams::new(p.0, p.1, p.2, p.3)
}

/// A labeled set of periodic crystal structures.
#[pyclass(name = "Dataset", frozen)]
struct PyDataset {
    inner: LabeledDataset,
}

#[pymethods]
impl PyDataset {
    /// Reads structured records (`.jsonl`) or extended XYZ (`.xyz`).
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let format = DatasetFormat::from_path(&path);
        Ok(Self {
            inner: parse_dataset(&path, format).map_err(to_py)?,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (n, seed = 0))]
    fn synthetic(n: usize, seed: u64) -> PyResult<Self> {
        Ok(Self {
            inner: harness::generate_synthetic(n, seed).map_err(to_py)?,
        })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn name(&self) -> &str {
        self.inner.name()
    }

    #[getter]
    fn targets(&self) -> Vec<f64> {
        self.inner.targets().to_vec()
    }

    #[getter]
    fn ids(&self) -> Vec<String> {
        self.inner.structures().iter().map(|s| s.id().to_string()).collect()
    }

    #[getter]
    fn species(&self) -> Vec<u32> {
        self.inner.species()
    }

    fn to_records(&self) -> String {
        records_to_string(&self.inner)
    }

    /// Element-aggregated SOAP vectors, one row per structure.
    #[pyo3(signature = (r_cut = 5.0, n_max = 4, l_max = 4, sigma = 0.5))]
    fn soap(&self, py: Python<'_>, r_cut: f64, n_max: usize, l_max: usize, sigma: f64) -> PyResult<Vec<Vec<f64>>> {
        let cfg = SoapConfig {
            r_cut,
            n_max,
            l_max,
            sigma,
            ..SoapConfig::with_species(self.inner.species())
        };
        py.detach(|| soap_dataset(&self.inner, &cfg)).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!("Dataset(name={:?}, n={})", self.inner.name(), self.inner.len())
    }
}

#[pyclass(name = "SplitTask", frozen, get_all)]
struct PySplitTask {
    name: String,
    train: Vec<usize>,
    val: Vec<usize>,
    test: Vec<usize>,
}

/// A set of train/validation/test tasks produced by one strategy.
#[pyclass(name = "Scenario", frozen)]
struct PyScenario {
    inner: splitting::Scenario,
}

#[pymethods]
impl PyScenario {
    #[getter]
    fn strategy(&self) -> &'static str {
        self.inner.strategy.as_str()
    }

    #[getter]
    fn tasks(&self) -> Vec<PySplitTask> {
        self.inner
            .tasks
            .iter()
            .map(|t| PySplitTask {
                name: t.name.clone(),
                train: t.train.clone(),
                val: t.val.clone(),
                test: t.test.clone(),
            })
            .collect()
    }

    fn to_json(&self) -> String {
        splitting::scenario_to_manifest(&self.inner)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: splitting::parse_manifest(text, "python").map_err(to_py)?,
        })
    }

    fn __len__(&self) -> usize {
        self.inner.tasks.len()
    }
}

/// Leave-one-cluster-out tasks from k-means on `x`.
#[pyfunction]
#[pyo3(signature = (x, k, seed = 0, strategy = "SOAP-LOCO"))]
fn loco_split(x: Vec<Vec<f64>>, k: usize, seed: u64, strategy: &str) -> PyResult<PyScenario> {
    let strategy: Strategy = strategy.parse().map_err(to_py)?;
    Ok(PyScenario {
        inner: splitting::loco_split(&x, k, seed, strategy).map_err(to_py)?,
    })
}

#[pyfunction]
#[pyo3(signature = (n, test_sizes, seed = 0))]
fn random_split(n: usize, test_sizes: Vec<usize>, seed: u64) -> PyResult<PyScenario> {
    Ok(PyScenario {
        inner: splitting::random_split(n, &test_sizes, seed).map_err(to_py)?,
    })
}

/// Sparse strategies: `SXS`, `SXC` take descriptor rows, `SYS`, `SYC` targets.
#[pyfunction]
#[pyo3(signature = (strategy, x = None, y = None, n_tasks = 50, m_neighbors = 10, k_density = 10, seed = 0))]
fn sparse_split(
    strategy: &str,
    x: Option<Vec<Vec<f64>>>,
    y: Option<Vec<f64>>,
    n_tasks: usize,
    m_neighbors: usize,
    k_density: usize,
    seed: u64,
) -> PyResult<PyScenario> {
    let params = splitting::SparseParams {
        n_tasks,
        m_neighbors,
        k_density,
    };
    let need_x = || x.ok_or_else(|| PyValueError::new_err("this strategy needs `x`"));
    let need_y = || y.ok_or_else(|| PyValueError::new_err("this strategy needs `y`"));
    let inner = match strategy.parse().map_err(to_py)? {
        Strategy::SparseXSingle => splitting::sparse_x_single(&need_x()?, params, seed),
        Strategy::SparseXCluster => splitting::sparse_x_cluster(&need_x()?, params, seed),
        Strategy::SparseYSingle => splitting::sparse_y_single(&need_y()?, params, seed),
        Strategy::SparseYCluster => splitting::sparse_y_cluster(&need_y()?, params, seed),
        other => return Err(PyValueError::new_err(format!("{other} is not a sparse strategy"))),
    };
    Ok(PyScenario {
        inner: inner.map_err(to_py)?,
    })
}

#[pyfunction]
fn nll_loss(p: Nig, y: f64) -> PyResult<f64> {
    ev::nll_loss(&nig(p), y).map_err(to_py)
}

#[pyfunction]
fn reg_loss(p: Nig, y: f64) -> PyResult<f64> {
    ev::reg_loss(&nig(p), y).map_err(to_py)
}

/// Mean of `nll + lambda * reg` over `(params, y)` pairs.
#[pyfunction]
#[pyo3(signature = (batch, lam = 0.01))]
fn der_loss(batch: Vec<(Nig, f64)>, lam: f64) -> PyResult<f64> {
    let batch: Vec<_> = batch.into_iter().map(|(p, y)| (nig(p), y)).collect();
    ev::der_loss(&batch, &LossConfig { lambda: lam }).map_err(to_py)
}

/// Gradient of the per-sample loss as `(d_gamma, d_nu, d_alpha, d_beta)`.
#[pyfunction]
#[pyo3(signature = (p, y, lam = 0.01))]
fn der_loss_grad(p: Nig, y: f64, lam: f64) -> PyResult<Nig> {
    let g = ev::der_loss_grad(&nig(p), y, &LossConfig { lambda: lam }).map_err(to_py)?;
    Ok((g.d_gamma, g.d_nu, g.d_alpha, g.d_beta))
}

#[pyfunction]
fn eviu(p: Nig) -> PyResult<f64> {
    ev::eviu_per_sample(&nig(p)).map_err(to_py)
}

#[pyfunction]
fn spearman(u: Vec<f64>, e: Vec<f64>) -> PyResult<f64> {
    Ok(oodbench_core::metrics::spearman(&u, &e).map_err(to_py)?.rho)
}

fn report_dict<'py>(py: Python<'py>, r: &MetricReport) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("name", &r.name)?;
    d.set_item("n_samples", r.n_samples)?;
    d.set_item("mae", r.mae)?;
    d.set_item("eviu", r.eviu)?;
    d.set_item("d_mae", r.d_mae)?;
    d.set_item("d_unc", r.d_unc)?;
    d.set_item("d_eviu", r.d_eviu)?;
    let sp = PyDict::new(py);
    for (k, v) in &r.spearman {
        sp.set_item(k, v)?;
    }
    d.set_item("spearman", sp)?;
    Ok(d)
}

/// All metrics from NIG predictions. `passes[t][i]` is pass `t`, sample `i`;
/// `deterministic` defaults to pass 0.
#[pyfunction]
#[pyo3(signature = (passes, truth, deterministic = None))]
fn score<'py>(
    py: Python<'py>,
    passes: Vec<Vec<Nig>>,
    truth: Vec<f64>,
    deterministic: Option<Vec<Nig>>,
) -> PyResult<Bound<'py, PyDict>> {
    let rows: Vec<Vec<_>> = passes
        .into_iter()
        .map(|row| row.into_iter().map(nig).collect())
        .collect();
    let tensor = PassTensor::from_rows(rows).map_err(to_py)?;
    let det = match deterministic {
        Some(d) => d.into_iter().map(nig).collect(),
        None => tensor.row(0).to_vec(),
    };
    let r = MetricReport::from_predictions("python", &det, &tensor, &truth).map_err(to_py)?;
    report_dict(py, &r)
}

#[pyfunction]
#[pyo3(signature = (pass_file, truth_file, passes, deterministic = None))]
fn score_external<'py>(
    py: Python<'py>,
    pass_file: PathBuf,
    truth_file: PathBuf,
    passes: usize,
    deterministic: Option<PathBuf>,
) -> PyResult<Bound<'py, PyDict>> {
    let r = harness::score_external(&pass_file, &truth_file, passes, deterministic.as_deref())
        .map_err(to_py)?;
    report_dict(py, &r)
}

/// Runs the full pipeline from a TOML config file; returns the per-task
/// reports, the summary row and the manifest content hash.
#[pyfunction]
fn run_benchmark<'py>(py: Python<'py>, config: PathBuf) -> PyResult<Bound<'py, PyDict>> {
    let cfg = RunConfig::load(&config).map_err(to_py)?;
    let outcome = py.detach(|| harness::run_benchmark(&cfg)).map_err(to_py)?;
    let d = PyDict::new(py);
    let tasks = outcome
        .tasks
        .iter()
        .map(|t| report_dict(py, t))
        .collect::<PyResult<Vec<_>>>()?;
    d.set_item("tasks", tasks)?;
    d.set_item("summary", report_dict(py, &outcome.summary)?)?;
    d.set_item("content_hash", outcome.manifest.content_hash)?;
    Ok(d)
}

#[pymodule]
fn oodbench(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyDataset>()?;
    m.add_class::<PyScenario>()?;
    m.add_class::<PySplitTask>()?;
    m.add_function(wrap_pyfunction!(loco_split, m)?)?;
    m.add_function(wrap_pyfunction!(random_split, m)?)?;
    m.add_function(wrap_pyfunction!(sparse_split, m)?)?;
    m.add_function(wrap_pyfunction!(nll_loss, m)?)?;
    m.add_function(wrap_pyfunction!(reg_loss, m)?)?;
    m.add_function(wrap_pyfunction!(der_loss, m)?)?;
    m.add_function(wrap_pyfunction!(der_loss_grad, m)?)?;
    m.add_function(wrap_pyfunction!(eviu, m)?)?;
    m.add_function(wrap_pyfunction!(spearman, m)?)?;
    m.add_function(wrap_pyfunction!(score, m)?)?;
    m.add_function(wrap_pyfunction!(score_external, m)?)?;
    m.add_function(wrap_pyfunction!(run_benchmark, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
