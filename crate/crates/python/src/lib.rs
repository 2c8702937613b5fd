//! Python bindings: compression-ratio arithmetic, the drift rule, delta
//! frames and a one-call simulation driver.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyDict};

use odup_core::adaptive::{self, AdaptiveConfig, Bandwidth, MmdConfig, RatioChoice};
use odup_core::codec::{self, CodeMatrix};
use odup_core::numkit::{self, Matrix};
use odup_core::pipeline::{self, ExperimentConfig};
use odup_core::updater::{self, Strategy, UpdateDelta};
use odup_core::{wire, Error};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::TrainingDiverged { .. } | Error::Divergence(_) | Error::StaleDelta { .. } => {
            PyRuntimeError::new_err(e.to_string())
        }
        other => PyValueError::new_err(other.to_string()),
    }
}

fn matrix(rows: &[Vec<f64>]) -> PyResult<Matrix> {
    Matrix::from_rows(rows).map_err(py_err)
}

fn rows_of(m: &Matrix) -> Vec<Vec<f64>> {
    m.iter_rows().map(<[f64]>::to_vec).collect()
}

/// Element-count compression ratio of the codes-plus-codebooks model.
#[pyfunction]
fn model_cr(vocab: usize, d: usize, n: usize, k: usize) -> f64 {
    codec::model_cr(vocab, d, n, k)
}

/// Element-count ratio of a full compressed model to a β-row delta.
#[pyfunction]
fn update_cr(n: usize, k: usize, d: usize, vocab: usize, beta: usize) -> f64 {
    updater::update_cr(n, k, d, vocab, beta)
}

#[pyfunction]
fn end_to_end_cr(vocab: usize, d: usize, n: usize, beta: usize) -> f64 {
    updater::end_to_end_cr(vocab, d, n, beta)
}

#[pyfunction]
fn beta_from_ratio(n: usize, k: usize, r: u64) -> usize {
    updater::beta_from_ratio(n, k, r)
}

/// Update ratio for a drift value, or `None` when the update is skipped.
#[pyfunction]
#[pyo3(signature = (mmd, c = 0.2, skip_threshold = 1e-6))]
fn choose_ratio(mmd: f64, c: f64, skip_threshold: f64) -> PyResult<Option<u64>> {
    let cfg = AdaptiveConfig { c, skip_threshold };
    cfg.validate().map_err(py_err)?;
    Ok(match adaptive::choose_ratio(mmd, &cfg) {
        RatioChoice::Skip => None,
        RatioChoice::Ratio(r) => Some(r),
    })
}

/// Squared MMD between two tables (all rows, Gaussian kernel).
#[pyfunction]
#[pyo3(signature = (x, y, bandwidth = None))]
fn mmd2(x: Vec<Vec<f64>>, y: Vec<Vec<f64>>, bandwidth: Option<f64>) -> PyResult<f64> {
    let cfg = MmdConfig {
        bandwidth: bandwidth.map_or(Bandwidth::Median, Bandwidth::Fixed),
        ..MmdConfig::default()
    };
    adaptive::mmd2(&matrix(&x)?, &matrix(&y)?, &cfg).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (v, tau = 1.0))]
fn softmax(v: Vec<f64>, tau: f64) -> PyResult<Vec<f64>> {
    numkit::softmax(&v, tau).map_err(py_err)
}

/// Encoded size in bytes of a delta frame.
#[pyfunction]
fn delta_bytes(vocab: usize, n: usize, k: usize, d: usize, beta: usize) -> usize {
    wire::delta_bytes(vocab, n, k, d, beta)
}

/// An update payload: new codes for every item plus β replaced codebook rows.
#[pyclass(name = "Delta", module = "odup", eq, skip_from_py_object)]
#[derive(Clone, PartialEq)]
struct PyDelta {
    inner: UpdateDelta,
}

#[pymethods]
impl PyDelta {
    #[new]
    fn new(epoch: u32, strategy: &str, codes: Vec<Vec<u16>>, k: usize, slots: Vec<usize>, rows: Vec<Vec<f64>>) -> PyResult<Self> {
        let strategy: Strategy = strategy.parse().map_err(py_err)?;
        let n = codes.first().map_or(0, Vec::len);
        if codes.iter().any(|c| c.len() != n) {
            return Err(PyValueError::new_err("every item needs the same number of code components"));
        }
        let codes = CodeMatrix::new(codes.len(), n, k, codes.concat()).map_err(py_err)?;
        let inner = UpdateDelta {
            epoch,
            strategy,
            codes,
            slots,
            new_rows: matrix(&rows)?,
        };
        inner.validate().map_err(py_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn epoch(&self) -> u32 {
        self.inner.epoch
    }

    #[getter]
    fn strategy(&self) -> &'static str {
        self.inner.strategy.as_str()
    }

    #[getter]
    fn beta(&self) -> usize {
        self.inner.beta()
    }

    #[getter]
    fn codes(&self) -> Vec<Vec<u16>> {
        (0..self.inner.codes.vocab()).map(|v| self.inner.codes.row(v).to_vec()).collect()
    }

    #[getter]
    fn slots(&self) -> Vec<usize> {
        self.inner.slots.clone()
    }

    #[getter]
    fn rows(&self) -> Vec<Vec<f64>> {
        rows_of(&self.inner.new_rows)
    }

    fn encode<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyBytes>> {
        let bytes = wire::encode_delta(&self.inner).map_err(py_err)?;
        Ok(PyBytes::new(py, &bytes))
    }

    fn __repr__(&self) -> String {
        format!(
            "Delta(epoch={}, strategy={}, vocab={}, beta={})",
            self.inner.epoch,
            self.inner.strategy,
            self.inner.vocab(),
            self.inner.beta()
        )
    }
}

#[pyfunction]
fn decode_delta(data: &[u8]) -> PyResult<PyDelta> {
    let inner = wire::decode_delta(data).map_err(|e| py_err(e.into()))?;
    Ok(PyDelta { inner })
}

/// Config text with every key at its default.
#[pyfunction]
fn default_config() -> String {
    ExperimentConfig::default().to_text()
}

/// Runs the cloud/device loop for a config given as `key = value` text.
/// Returns one dict per slice with the report columns.
#[pyfunction]
#[pyo3(signature = (config = "", seed = None))]
fn simulate<'py>(py: Python<'py>, config: &str, seed: Option<u64>) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let mut cfg = ExperimentConfig::parse_str(config, None).map_err(py_err)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let sim = py
        .detach(|| {
            let (_, data) = pipeline::load_data(&cfg)?;
            pipeline::simulate(&cfg, &data)
        })
        .map_err(py_err)?;
    sim.reports
        .iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("slice", r.slice)?;
            d.set_item("strategy", r.strategy.as_str())?;
            d.set_item("r", r.r)?;
            d.set_item("beta", r.beta)?;
            d.set_item("mmd", r.mmd)?;
            d.set_item("delta_bytes", r.delta_bytes)?;
            d.set_item("cum_bytes", r.cum_bytes)?;
            d.set_item("cloud_p5", r.cloud_p5)?;
            d.set_item("cloud_n5", r.cloud_n5)?;
            d.set_item("cloud_p10", r.cloud_p10)?;
            d.set_item("cloud_n10", r.cloud_n10)?;
            d.set_item("dev_p5", r.dev_p5)?;
            d.set_item("dev_n5", r.dev_n5)?;
            d.set_item("dev_p10", r.dev_p10)?;
            d.set_item("dev_n10", r.dev_n10)?;
            d.set_item("cr_model", r.cr_model)?;
            d.set_item("cr_update", r.cr_update)?;
            d.set_item("cr_total", r.cr_total)?;
            d.set_item("secs", r.secs)?;
            Ok(d)
        })
        .collect()
}

#[pymodule]
fn odup(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(model_cr, m)?)?;
    m.add_function(wrap_pyfunction!(update_cr, m)?)?;
    m.add_function(wrap_pyfunction!(end_to_end_cr, m)?)?;
    m.add_function(wrap_pyfunction!(beta_from_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(choose_ratio, m)?)?;
    m.add_function(wrap_pyfunction!(mmd2, m)?)?;
    m.add_function(wrap_pyfunction!(softmax, m)?)?;
    m.add_function(wrap_pyfunction!(delta_bytes, m)?)?;
    m.add_function(wrap_pyfunction!(decode_delta, m)?)?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_class::<PyDelta>()?;
    Ok(())
}
