//! Python bindings: checklist access, scoring, static analysis, scanning,
//! report rendering and the fixture server.

use std::collections::BTreeMap;
use std::sync::Mutex;

use pyo3::exceptions::{PyKeyError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use secaudit_core::checklist::{ImpactLevel, LikelihoodLevel};
use secaudit_core::reference::{reference_observations, REFERENCE_LABELS};
use secaudit_core::report::{
    emit_compliance_matrix, emit_coverage_table, emit_json, load_document, AuditDocument, TableFormat,
    TargetMetadata,
};
use secaudit_core::risk_engine::compare_profiles;
use secaudit_core::static_analyzer::{run_default, CodeCorpus};
use secaudit_core::{
    default_checklist, judge_compliance, load_checklist, risk_level, Checklist, Observation, ObservationValue,
    RiskLevel, Source,
};
use secaudit_scanner::TargetConfig;
use secaudit_testbed::{start_testbed, TestbedConfig, TestbedHandle};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn tokio_runtime() -> PyResult<tokio::runtime::Runtime> {
    tokio::runtime::Builder::new_multi_thread().enable_all().build().map_err(runtime_err)
}

/// Risk level label for a likelihood and impact label, e.g.
/// `risk_level("Almost Certain", "Major") == "Extreme"`.
#[pyfunction(name = "risk_level")]
fn py_risk_level(likelihood: &str, impact: &str) -> PyResult<String> {
    let l: LikelihoodLevel = likelihood.parse().map_err(value_err)?;
    let i: ImpactLevel = impact.parse().map_err(value_err)?;
    Ok(risk_level(l, i).label().to_string())
}

#[pyclass(name = "Checklist", frozen)]
struct PyChecklist {
    inner: Checklist,
}

#[pymethods]
impl PyChecklist {
    /// The built-in 48-parameter checklist.
    #[staticmethod]
    fn default() -> Self {
        PyChecklist { inner: default_checklist() }
    }

    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        Ok(PyChecklist { inner: load_checklist(text).map_err(value_err)? })
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    #[getter]
    fn version(&self) -> String {
        self.inner.version.clone()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn ids(&self) -> Vec<String> {
        self.inner.parameters.iter().map(|p| p.id.clone()).collect()
    }

    /// Parameter fields as a dict of strings.
    fn parameter(&self, id: &str) -> PyResult<BTreeMap<&'static str, String>> {
        let p = self.inner.get(id).ok_or_else(|| PyKeyError::new_err(id.to_string()))?;
        Ok(BTreeMap::from([
            ("id", p.id.clone()),
            ("category", p.category.label().to_string()),
            ("subcategory", p.subcategory.clone()),
            ("name", p.name.clone()),
            ("likelihood", p.likelihood.label().to_string()),
            ("impact", p.impact.label().to_string()),
            ("risk", p.risk.label().to_string()),
            ("mode", p.mode.ident().to_string()),
        ]))
    }

    /// Whether `value` (e.g. "Yes", "NA", "Only Length") is compliant for `id`.
    fn is_compliant(&self, id: &str, value: &str) -> PyResult<bool> {
        let spec = self.inner.get(id).ok_or_else(|| PyKeyError::new_err(id.to_string()))?;
        let c = judge_compliance(spec, &ObservationValue::from_text(value)).map_err(value_err)?;
        Ok(c.is_compliant())
    }
}

#[pyclass(name = "AuditDocument", frozen)]
struct PyAuditDocument {
    inner: AuditDocument,
}

#[pymethods]
impl PyAuditDocument {
    /// Parses and verifies a JSON document against the default checklist.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyAuditDocument { inner: load_document(text, &default_checklist()).map_err(value_err)? })
    }

    fn to_json(&self) -> String {
        emit_json(&self.inner)
    }

    #[getter]
    fn label(&self) -> String {
        self.inner.target.label.clone()
    }

    /// Category label → (fulfilled, total).
    fn coverage(&self) -> BTreeMap<String, (usize, usize)> {
        self.inner
            .coverage
            .per_category
            .iter()
            .map(|(c, v)| (c.label().to_string(), (v.fulfilled, v.total)))
            .collect()
    }

    /// Risk level label → number of non-compliant parameters.
    fn risk_counts(&self) -> BTreeMap<String, usize> {
        self.inner.risk.counts.iter().map(|(l, n)| (l.label().to_string(), *n)).collect()
    }

    /// Non-compliant parameters at `level` or above.
    fn at_or_above(&self, level: &str) -> PyResult<usize> {
        let level: RiskLevel = level.parse().map_err(value_err)?;
        Ok(self.inner.risk.at_or_above(level))
    }

    /// Parameter id → observed value, for every record.
    fn values(&self) -> BTreeMap<String, String> {
        self.inner
            .records
            .iter()
            .map(|r| (r.parameter_id.clone(), r.value().to_string()))
            .collect()
    }

    fn non_compliant(&self) -> Vec<String> {
        self.inner.profile().non_compliant().map(|r| r.parameter_id.clone()).collect()
    }

    fn skipped(&self) -> Vec<String> {
        self.inner.skipped.iter().map(|s| s.parameter_id.clone()).collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "AuditDocument(label={:?}, fulfilled={}/{})",
            self.inner.target.label,
            self.inner.coverage.total_fulfilled(),
            self.inner.records.len()
        )
    }
}

fn assemble(label: &str, location: Option<String>, observations: Vec<Observation>, skipped: Vec<secaudit_core::SkippedParameter>) -> PyResult<PyAuditDocument> {
    let checklist = default_checklist();
    let meta = TargetMetadata { label: label.to_string(), location };
    let doc = AuditDocument::assemble(meta, observations, skipped, &checklist, chrono::Utc::now()).map_err(value_err)?;
    Ok(PyAuditDocument { inner: doc })
}

/// Scores `(parameter_id, value)` pairs as manual attestations.
#[pyfunction]
#[pyo3(signature = (label, values))]
fn score(label: &str, values: Vec<(String, String)>) -> PyResult<PyAuditDocument> {
    let observations = values
        .into_iter()
        .map(|(id, v)| Observation::new(id, ObservationValue::from_text(&v), Source::Manual))
        .collect();
    assemble(label, None, observations, Vec::new())
}

/// Scores one of the bundled reference columns.
#[pyfunction]
fn reference_document(label: &str) -> PyResult<PyAuditDocument> {
    let obs = reference_observations(label)
        .ok_or_else(|| PyKeyError::new_err(format!("{label}: expected one of {REFERENCE_LABELS:?}")))?;
    assemble(label, None, obs, Vec::new())
}

/// Static analysis of a source directory.
#[pyfunction]
#[pyo3(signature = (code_dir, stack = "php-mysql"))]
fn analyze(code_dir: &str, stack: &str) -> PyResult<PyAuditDocument> {
    let checklist = default_checklist();
    let corpus = CodeCorpus::from_dir(std::path::Path::new(code_dir), stack).map_err(value_err)?;
    let report = run_default(&corpus, &checklist).map_err(value_err)?;
    assemble(&report.target.clone(), Some(report.target), report.observations, report.skipped)
}

/// Black-box scan of the target described by `target_toml`.
#[pyfunction]
#[pyo3(signature = (target_toml, destructive = false, parallel = 4))]
fn scan(py: Python<'_>, target_toml: &str, destructive: bool, parallel: usize) -> PyResult<PyAuditDocument> {
    let mut target = TargetConfig::from_toml(target_toml).map_err(value_err)?;
    target.destructive_allowed = destructive;
    let location = target.base_url.to_string();
    let checklist = default_checklist();
    let report = py
        .detach(|| tokio_runtime()?.block_on(secaudit_scanner::run_scan(target, &checklist, parallel)).map_err(runtime_err))?;
    assemble(&location, Some(location.clone()), report.observations, report.skipped)
}

fn table_format(format: &str) -> PyResult<TableFormat> {
    format.parse().map_err(value_err)
}

/// Parameter × document matrix of observed values.
#[pyfunction]
#[pyo3(signature = (documents, format = "markdown"))]
fn compliance_matrix(documents: Vec<PyRef<'_, PyAuditDocument>>, format: &str) -> PyResult<String> {
    let profiles: Vec<_> = documents.iter().map(|d| d.inner.profile()).collect();
    let cmp = compare_profiles(&profiles, &default_checklist()).map_err(value_err)?;
    Ok(emit_compliance_matrix(&cmp, table_format(format)?))
}

/// Category × document coverage table.
#[pyfunction]
#[pyo3(signature = (documents, format = "markdown"))]
fn coverage_table(documents: Vec<PyRef<'_, PyAuditDocument>>, format: &str) -> PyResult<String> {
    let rows: Vec<_> = documents.iter().map(|d| (d.inner.target.label.clone(), d.inner.coverage.clone())).collect();
    Ok(emit_coverage_table(&rows, table_format(format)?))
}

/// A fixture server running on its own runtime until `stop()`.
#[pyclass(name = "Testbed", frozen)]
struct PyTestbed {
    runtime: tokio::runtime::Runtime,
    handle: Mutex<Option<TestbedHandle>>,
    base_url: String,
    target_toml: String,
}

#[pymethods]
impl PyTestbed {
    #[new]
    #[pyo3(signature = (preset = "hardened"))]
    fn new(py: Python<'_>, preset: &str) -> PyResult<Self> {
        let config = TestbedConfig::preset(preset).map_err(value_err)?;
        let runtime = tokio_runtime()?;
        let handle = py.detach(|| runtime.block_on(start_testbed(config))).map_err(runtime_err)?;
        Ok(PyTestbed {
            base_url: handle.base_url(),
            target_toml: handle.target_toml(),
            handle: Mutex::new(Some(handle)),
            runtime,
        })
    }

    #[getter]
    fn base_url(&self) -> String {
        self.base_url.clone()
    }

    #[getter]
    fn target_toml(&self) -> String {
        self.target_toml.clone()
    }

    fn stop(&self, py: Python<'_>) {
        let handle = self.handle.lock().unwrap_or_else(|p| p.into_inner()).take();
        if let Some(h) = handle {
            py.detach(|| self.runtime.block_on(h.shutdown()));
        }
    }
}

#[pymodule]
fn secaudit(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyChecklist>()?;
    m.add_class::<PyAuditDocument>()?;
    m.add_class::<PyTestbed>()?;
    m.add_function(wrap_pyfunction!(py_risk_level, m)?)?;
    m.add_function(wrap_pyfunction!(score, m)?)?;
    m.add_function(wrap_pyfunction!(reference_document, m)?)?;
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    m.add_function(wrap_pyfunction!(scan, m)?)?;
    m.add_function(wrap_pyfunction!(compliance_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(coverage_table, m)?)?;
    m.add("REFERENCE_LABELS", REFERENCE_LABELS.to_vec())?;
    Ok(())
}
