use dynobs::checker::{check_with, CheckOptions};
use dynobs::model::{parse_model_def, validate as validate_def};
use dynobs::oracle::{natural_eval_bounded, History, RecordTuple};
use dynobs::reduce::{check_via_reduction, reduce};
use dynobs::{fixtures, parse_formula, Formula};
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;

create_exception!(pydynobs, DynobsError, PyException, "Raised with `(code, message)` on any model, formula or budget error.");

fn fail(code: &str, e: impl std::fmt::Display) -> PyErr {
    DynobsError::new_err((code.to_string(), e.to_string()))
}

/// A parsed and validated model.
#[pyclass(name = "Model", module = "pydynobs", frozen)]
struct PyModel {
    inner: dynobs::Model,
}

impl PyModel {
    fn formula(&self, text: &str) -> PyResult<Formula> {
        parse_formula(text, &self.inner).map_err(|e| fail(e.code(), e))
    }
}

#[pymethods]
impl PyModel {
    #[new]
    fn new(text: &str) -> PyResult<Self> {
        let inner = dynobs::parse_model(text).map_err(|e| fail(e.code(), e))?;
        Ok(PyModel { inner })
    }

    #[getter]
    fn states(&self) -> Vec<String> {
        self.inner.states().to_vec()
    }

    #[getter]
    fn agents(&self) -> Vec<String> {
        self.inner.agents().to_vec()
    }

    #[getter]
    fn observations(&self) -> Vec<String> {
        self.inner.observations().to_vec()
    }

    #[getter]
    fn atoms(&self) -> Vec<String> {
        self.inner.atoms().to_vec()
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    /// Decides the formula at the initial state with either engine.
    #[pyo3(signature = (formula, engine = "direct"))]
    fn check(&self, formula: &str, engine: &str) -> PyResult<bool> {
        let f = self.formula(formula)?;
        match engine {
            "direct" => Ok(check_with(&self.inner, &f, &CheckOptions::default()).map_err(|e| fail(e.code(), e))?.verdict),
            "reduction" => check_via_reduction(&self.inner, &f).map_err(|e| fail(e.code(), e)),
            other => Err(PyValueError::new_err(format!("unknown engine `{other}`"))),
        }
    }

    /// The JSON report of a direct-engine run.
    #[pyo3(signature = (formula, nodes = false))]
    fn report(&self, formula: &str, nodes: bool) -> PyResult<String> {
        let f = self.formula(formula)?;
        let run = check_with(&self.inner, &f, &CheckOptions::default()).map_err(|e| fail(e.code(), e))?;
        serde_json::to_string(&run.report(&self.inner, nodes)).map_err(|e| fail("E_IO", e))
    }

    /// `"HOLDS"`, `"FAILS"` or `"UNKNOWN"` from bounded enumeration.
    fn oracle(&self, formula: &str, bound: usize) -> PyResult<String> {
        let f = self.formula(formula)?;
        let m = &self.inner;
        let h = History(vec![m.initial_state()]);
        Ok(natural_eval_bounded(m, &h, &RecordTuple::empty(m.num_agents()), &f, bound).to_string())
    }

    /// The reduced model text and translated formula.
    fn reduce(&self, formula: &str) -> PyResult<(String, String)> {
        let f = self.formula(formula)?;
        let (ri, g) = reduce(&self.inner, &f).map_err(|e| fail(e.code(), e))?;
        Ok((ri.model.to_text(), g.display(&ri.model).to_string()))
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(states={}, observations={}, agents={})",
            self.inner.num_states(),
            self.inner.num_observations(),
            self.inner.num_agents()
        )
    }
}

/// Every violation in a model text as `(code, message)` pairs.
#[pyfunction]
fn validate(text: &str) -> PyResult<Vec<(String, String)>> {
    let def = parse_model_def(text).map_err(|e| fail(e.code(), e))?;
    Ok(validate_def(&def).into_iter().map(|v| (v.code.to_string(), v.message)).collect())
}

/// The files of a bundled example as `(name, contents)` pairs.
#[pyfunction]
fn example(name: &str) -> PyResult<Vec<(String, String)>> {
    fixtures::bundle(name)
        .map(|files| files.into_iter().map(|(n, c)| (n.to_string(), c.to_string())).collect())
        .ok_or_else(|| PyValueError::new_err(format!("unknown example `{name}`")))
}

#[pymodule]
fn pydynobs(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    m.add_function(wrap_pyfunction!(example, m)?)?;
    m.add("DynobsError", m.py().get_type::<DynobsError>())?;
    m.add("EXAMPLES", fixtures::BUNDLES.to_vec())?;
    Ok(())
}
