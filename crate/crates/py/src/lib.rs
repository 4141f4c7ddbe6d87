//! Python bindings: run experiments, parse configs and query spectra.

use dirac_lab::config::parse_config;
use dirac_lab::dirac::{assemble_dirac, ConnectionSpec, DiracBundle};
use dirac_lab::experiments::{run_experiment as run, EXPERIMENTS};
use dirac_lab::geometry::FlatTorus;
use dirac_lab::LabError;
use pyo3::exceptions::{PyKeyError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: LabError) -> PyErr {
    match e {
        LabError::UnknownExperiment(name) => PyKeyError::new_err(format!("unknown experiment '{name}'")),
        other => PyValueError::new_err(other.to_string()),
    }
}

/// (name, criterion, summary) for every experiment.
#[pyfunction]
fn experiments() -> Vec<(String, u8, String)> {
    EXPERIMENTS.iter().map(|e| (e.name.to_string(), e.criterion, e.summary.to_string())).collect()
}

/// Validates a configuration document; returns the list of warnings.
#[pyfunction]
#[pyo3(signature = (text, strict = true))]
fn check_config(text: &str, strict: bool) -> PyResult<Vec<String>> {
    parse_config(text, strict).map(|p| p.warnings).map_err(err)
}

/// Runs an experiment and returns its verdicts as dicts; writes artifacts to
/// `out` when given.
#[pyfunction]
#[pyo3(signature = (name, config = None, seed = None, out = None, strict = true))]
fn run_experiment<'py>(
    py: Python<'py>,
    name: &str,
    config: Option<&str>,
    seed: Option<u64>,
    out: Option<&str>,
    strict: bool,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let mut cfg = parse_config(config.unwrap_or(""), strict).map_err(err)?.config;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let outcome = py.detach(|| run(name, &cfg)).map_err(err)?;
    if let Some(dir) = out {
        outcome.write(std::path::Path::new(dir)).map_err(err)?;
    }
    outcome
        .verdicts
        .iter()
        .map(|v| {
            let d = PyDict::new(py);
            d.set_item("experiment", &v.experiment)?;
            d.set_item("check", &v.check)?;
            d.set_item("tolerance", v.tolerance)?;
            d.set_item("measured", v.measured)?;
            d.set_item("pass", v.pass)?;
            d.set_item("anchor", &v.anchor)?;
            Ok(d)
        })
        .collect()
}

/// Sorted eigenvalues of D on the standard 2 pi torus with a constant twist.
#[pyfunction]
#[pyo3(signature = (cutoff, twist = (0.0, 0.0)))]
fn spectrum(cutoff: usize, twist: (f64, f64)) -> PyResult<Vec<f64>> {
    let torus = FlatTorus::standard(2 * cutoff + 1);
    let bundle = DiracBundle::new(torus, ConnectionSpec::constant_scalar(&[twist.0, twist.1], 2)).map_err(err)?;
    let res = assemble_dirac(&bundle, cutoff).and_then(|op| op.resolve()).map_err(err)?;
    let mut v = res.raw_eigenvalues().to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

#[pymodule]
fn dirac_lab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(experiments, m)?)?;
    m.add_function(wrap_pyfunction!(check_config, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(spectrum, m)?)?;
    Ok(())
}
