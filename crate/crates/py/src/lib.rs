//! Python bindings: the main types and operations of `envariance-core`
//! exposed as an extension module.

use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};

use envariance_core::envariance as env_ops;
use envariance_core::finegrain;
use envariance_core::machines;
use envariance_core::statespace::{LocalOperator, PureState, SubsystemLayout};
use envariance_core::Tolerances;

fn value_err(err: envariance_core::Error) -> PyErr {
    PyValueError::new_err(err.to_string())
}

/// Ordered subsystems with named basis labels.
#[pyclass(name = "SubsystemLayout", from_py_object)]
#[derive(Clone)]
struct PySubsystemLayout {
    inner: SubsystemLayout,
}

#[pymethods]
impl PySubsystemLayout {
    #[new]
    fn new(subsystems: Vec<(String, Vec<String>)>) -> PyResult<Self> {
        Ok(PySubsystemLayout {
            inner: SubsystemLayout::new(subsystems).map_err(value_err)?,
        })
    }

    fn ids(&self) -> Vec<String> {
        self.inner
            .subsystems()
            .iter()
            .map(|s| s.id().to_owned())
            .collect()
    }

    fn labels(&self, subsystem: &str) -> PyResult<Vec<String>> {
        let position = self.inner.position(subsystem).map_err(value_err)?;
        Ok(self.inner.subsystem(position).labels().to_vec())
    }

    fn __repr__(&self) -> String {
        format!("SubsystemLayout({})", self.inner)
    }
}

/// A normalized sparse pure state.
#[pyclass(name = "PureState", from_py_object)]
#[derive(Clone)]
struct PyPureState {
    inner: PureState,
}

#[pymethods]
impl PyPureState {
    #[new]
    #[pyo3(signature = (layout, components, normalize = false, tolerance = 1e-9))]
    fn new(
        layout: PySubsystemLayout,
        components: Vec<(Vec<String>, Complex64)>,
        normalize: bool,
        tolerance: f64,
    ) -> PyResult<Self> {
        let tol = Tolerances::with_normalization(tolerance);
        let state = if normalize {
            PureState::build_normalized(layout.inner, components, &tol)
        } else {
            PureState::build(layout.inner, components, &tol)
        };
        Ok(PyPureState {
            inner: state.map_err(value_err)?,
        })
    }

    fn layout(&self) -> PySubsystemLayout {
        PySubsystemLayout {
            inner: self.inner.layout().clone(),
        }
    }

    fn components(&self) -> Vec<(Vec<String>, Complex64)> {
        self.inner
            .labeled_components()
            .map(|(labels, amp)| (labels.into_iter().map(str::to_owned).collect(), amp))
            .collect()
    }

    fn amplitude(&self, labels: Vec<String>) -> PyResult<Complex64> {
        self.inner.amplitude(&labels).map_err(value_err)
    }

    fn distance(&self, other: &PyPureState) -> PyResult<f64> {
        self.inner.distance(&other.inner).map_err(value_err)
    }

    fn apply(&self, op: &PyLocalOperator) -> PyResult<PyPureState> {
        Ok(PyPureState {
            inner: self.inner.apply(&op.inner).map_err(value_err)?,
        })
    }

    /// Reduced density matrix over `keep`, as a dense row-major list.
    fn reduced_density(&self, keep: Vec<String>) -> PyResult<Vec<Vec<Complex64>>> {
        let rho = self.inner.reduced_density(&keep).map_err(value_err)?;
        let m = rho.matrix();
        Ok((0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
            .collect())
    }

    /// Schmidt coefficients across the (left | complement) bipartition.
    fn schmidt_coefficients(&self, left: Vec<String>) -> PyResult<Vec<f64>> {
        let sd = envariance_core::statespace::schmidt(&self.inner, &left).map_err(value_err)?;
        Ok(sd.coefficients().to_vec())
    }

    fn __repr__(&self) -> String {
        let terms: Vec<String> = self
            .inner
            .labeled_components()
            .map(|(labels, amp)| format!("({:+.6}{:+.6}i)|{}⟩", amp.re, amp.im, labels.join(",")))
            .collect();
        format!("PureState({})", terms.join(" + "))
    }
}

/// A unitary, projector, or isometry-context operator on named targets.
#[pyclass(name = "LocalOperator", from_py_object)]
#[derive(Clone)]
struct PyLocalOperator {
    inner: LocalOperator,
}

#[pymethods]
impl PyLocalOperator {
    fn targets(&self) -> Vec<String> {
        self.inner.targets().to_vec()
    }

    fn kind(&self) -> String {
        self.inner.kind().to_string()
    }

    fn matrix(&self) -> Vec<Vec<Complex64>> {
        let m = self.inner.matrix();
        (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
            .collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "LocalOperator({} on {})",
            self.inner.kind(),
            self.inner.targets().join(",")
        )
    }
}

/// Diagonal unitary sending one label's amplitude to e^{iφ} times itself.
#[pyfunction]
fn phase_op(
    layout: &PySubsystemLayout,
    subsystem: &str,
    label: &str,
    phi: f64,
) -> PyResult<PyLocalOperator> {
    Ok(PyLocalOperator {
        inner: env_ops::phase_op(&layout.inner, subsystem, label, phi).map_err(value_err)?,
    })
}

/// Permutation unitary exchanging two labels of one subsystem.
#[pyfunction]
fn swap_op(
    layout: &PySubsystemLayout,
    subsystem: &str,
    label1: &str,
    label2: &str,
) -> PyResult<PyLocalOperator> {
    Ok(PyLocalOperator {
        inner: env_ops::swap_op(&layout.inner, subsystem, label1, label2).map_err(value_err)?,
    })
}

/// Permutation unitary exchanging two joint labels over several targets.
#[pyfunction]
fn composite_swap(
    layout: &PySubsystemLayout,
    targets: Vec<String>,
    tuple1: Vec<String>,
    tuple2: Vec<String>,
) -> PyResult<PyLocalOperator> {
    Ok(PyLocalOperator {
        inner: env_ops::composite_swap(&layout.inner, &targets, &tuple1, &tuple2)
            .map_err(value_err)?,
    })
}

/// Envariance verdict with the constructed counter-operation, if any.
#[pyclass(name = "EnvarianceVerdict")]
struct PyEnvarianceVerdict {
    #[pyo3(get)]
    envariant: bool,
    #[pyo3(get)]
    residual: Option<f64>,
    counter: Option<PyLocalOperator>,
}

#[pymethods]
impl PyEnvarianceVerdict {
    #[getter]
    fn counter_op(&self) -> Option<PyLocalOperator> {
        self.counter.clone()
    }

    fn __repr__(&self) -> String {
        format!(
            "EnvarianceVerdict(envariant={}, residual={:?})",
            self.envariant, self.residual
        )
    }
}

/// Decide envariance of `op` for `state` w.r.t. the environment subset.
#[pyfunction]
fn is_envariant(
    state: &PyPureState,
    op: &PyLocalOperator,
    env: Vec<String>,
) -> PyResult<PyEnvarianceVerdict> {
    let verdict = env_ops::is_envariant(&state.inner, &op.inner, &env).map_err(value_err)?;
    Ok(PyEnvarianceVerdict {
        envariant: verdict.envariant,
        residual: verdict.residual,
        counter: verdict
            .counter_op
            .map(|inner| PyLocalOperator { inner }),
    })
}

/// ‖counter·op·ψ − ψ‖.
#[pyfunction]
fn verify_counter(
    state: &PyPureState,
    op: &PyLocalOperator,
    counter: &PyLocalOperator,
) -> PyResult<f64> {
    env_ops::verify_counter(&state.inner, &op.inner, &counter.inner).map_err(value_err)
}

/// True iff the reduced state of `system` is unchanged by `env_op`.
#[pyfunction]
fn causality_check(
    state: &PyPureState,
    env_op: &PyLocalOperator,
    system: Vec<String>,
) -> PyResult<bool> {
    env_ops::causality_check(&state.inner, &env_op.inner, &system).map_err(value_err)
}

/// Shared-denominator rational approximation of a weight vector.
#[pyclass(name = "RationalWeightPlan", from_py_object)]
#[derive(Clone)]
struct PyRationalWeightPlan {
    inner: finegrain::RationalWeightPlan,
}

#[pymethods]
impl PyRationalWeightPlan {
    #[getter]
    fn numerators(&self) -> Vec<u64> {
        self.inner.numerators().to_vec()
    }

    #[getter]
    fn denominator(&self) -> u64 {
        self.inner.denominator()
    }

    #[getter]
    fn achieved_error(&self) -> f64 {
        self.inner.achieved_error()
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.inner.weights().to_vec()
    }

    fn __repr__(&self) -> String {
        format!(
            "RationalWeightPlan(n={:?}, N={}, error={:e})",
            self.inner.numerators(),
            self.inner.denominator(),
            self.inner.achieved_error()
        )
    }
}

/// Smallest shared denominator meeting `tol`, scanned exhaustively.
#[pyfunction]
#[pyo3(signature = (weights, tol, max_denominator = 1_000_000))]
fn rationalize(weights: Vec<f64>, tol: f64, max_denominator: u64) -> PyResult<PyRationalWeightPlan> {
    Ok(PyRationalWeightPlan {
        inner: finegrain::rationalize(&weights, tol, max_denominator).map_err(value_err)?,
    })
}

/// The reusable environment basis change produced by fine-graining.
#[pyclass(name = "FineGrainingMap", from_py_object)]
#[derive(Clone)]
struct PyFineGrainingMap {
    inner: finegrain::FineGrainingMap,
}

#[pymethods]
impl PyFineGrainingMap {
    #[getter]
    fn source_env(&self) -> String {
        self.inner.source_env().to_owned()
    }

    #[getter]
    fn fine_env(&self) -> String {
        self.inner.fine_env().to_owned()
    }

    #[getter]
    fn fine_labels(&self) -> Vec<String> {
        self.inner.fine_labels().to_vec()
    }

    #[getter]
    fn source_labels(&self) -> Vec<String> {
        self.inner.source_labels().to_vec()
    }

    fn __repr__(&self) -> String {
        format!(
            "FineGrainingMap({} → {} with {} labels)",
            self.inner.source_env(),
            self.inner.fine_env(),
            self.inner.fine_labels().len()
        )
    }
}

/// Rewrite `state` over the equal-weight fine-grained environment basis.
#[pyfunction]
fn finegrain_env(
    state: &PyPureState,
    env: &str,
    plan: &PyRationalWeightPlan,
) -> PyResult<(PyPureState, PyFineGrainingMap)> {
    let (fine, map) =
        finegrain::finegrain_env(&state.inner, env, &plan.inner).map_err(value_err)?;
    Ok((
        PyPureState { inner: fine },
        PyFineGrainingMap { inner: map },
    ))
}

/// Apply a stored basis change to any state over the same source labels.
#[pyfunction]
fn apply_map(state: &PyPureState, map: &PyFineGrainingMap) -> PyResult<PyPureState> {
    Ok(PyPureState {
        inner: finegrain::apply_map(&state.inner, &map.inner).map_err(value_err)?,
    })
}

/// Append a second environment with one label per component.
#[pyfunction]
fn add_ancilla_env(state: &PyPureState, new_env_id: &str) -> PyResult<PyPureState> {
    Ok(PyPureState {
        inner: finegrain::add_ancilla_env(&state.inner, new_env_id).map_err(value_err)?,
    })
}

/// A projector family with outcome labels and a locality descriptor.
#[pyclass(name = "MeasurementMachine", from_py_object)]
#[derive(Clone)]
struct PyMeasurementMachine {
    inner: machines::MeasurementMachine,
}

#[pymethods]
impl PyMeasurementMachine {
    #[getter]
    fn name(&self) -> String {
        self.inner.name().to_owned()
    }

    #[getter]
    fn locality(&self) -> Vec<String> {
        self.inner.locality().to_vec()
    }

    fn outcomes(&self) -> Vec<String> {
        self.inner
            .outcomes()
            .iter()
            .map(|o| o.label.to_string())
            .collect()
    }

    fn is_local_to(&self, pointer: &str) -> bool {
        self.inner.is_local_to(pointer)
    }

    #[getter]
    fn basis_provenance(&self) -> Option<PyFineGrainingMap> {
        self.inner
            .basis_provenance()
            .map(|map| PyFineGrainingMap { inner: map.clone() })
    }

    fn __repr__(&self) -> String {
        format!(
            "MeasurementMachine({}, {} outcomes)",
            self.inner.name(),
            self.inner.outcomes().len()
        )
    }
}

/// One outcome per pointer label, identity on everything else.
#[pyfunction]
fn local_machine(layout: &PySubsystemLayout, pointer: &str) -> PyResult<PyMeasurementMachine> {
    Ok(PyMeasurementMachine {
        inner: machines::local_machine(&layout.inner, pointer).map_err(value_err)?,
    })
}

/// The machine that registers `state` with equal weights: projectors on
/// (pointer label, fine environment label) pairs.
#[pyfunction]
fn finegrained_machine(
    state: &PyPureState,
    pointer: &str,
    env: &str,
    tol: f64,
) -> PyResult<PyMeasurementMachine> {
    Ok(PyMeasurementMachine {
        inner: machines::finegrained_machine(&state.inner, pointer, env, tol)
            .map_err(value_err)?,
    })
}

fn parse_rule(rule: &str) -> PyResult<machines::RegistrationRule> {
    rule.parse().map_err(PyValueError::new_err)
}

/// Outcome probabilities under "born" or "branch-count".
#[pyfunction]
#[pyo3(signature = (machine, state, rule, aggregate_by = None))]
fn outcome_statistics(
    machine: &PyMeasurementMachine,
    state: &PyPureState,
    rule: &str,
    aggregate_by: Option<String>,
) -> PyResult<Vec<(String, f64)>> {
    let stats = machines::outcome_statistics(
        &machine.inner,
        &state.inner,
        parse_rule(rule)?,
        aggregate_by.as_deref(),
    )
    .map_err(value_err)?;
    Ok(stats
        .entries
        .into_iter()
        .map(|e| (e.outcome, e.probability))
        .collect())
}

/// Project onto one outcome; returns (weight, normalized post-state).
#[pyfunction]
fn register(
    machine: &PyMeasurementMachine,
    state: &PyPureState,
    outcome: &str,
) -> PyResult<(f64, PyPureState)> {
    let post = machines::register(&machine.inner, &state.inner, outcome).map_err(value_err)?;
    Ok((post.weight, PyPureState { inner: post.state }))
}

/// Seeded draws from the outcome distribution; reproducible by seed.
#[pyfunction]
fn sample(
    machine: &PyMeasurementMachine,
    state: &PyPureState,
    rule: &str,
    n: u64,
    seed: u64,
) -> PyResult<Vec<(String, u64)>> {
    machines::sample(&machine.inner, &state.inner, parse_rule(rule)?, n, seed).map_err(value_err)
}

/// The two-state comparison table as a list of row dicts.
#[pyfunction]
fn paradox_report<'py>(
    py: Python<'py>,
    psi1: &PyPureState,
    psi2: &PyPureState,
    pointer: &str,
    env: &str,
) -> PyResult<Bound<'py, PyList>> {
    let report =
        machines::paradox_report(&psi1.inner, &psi2.inner, pointer, env).map_err(value_err)?;
    let rows = PyList::empty(py);
    for row in &report.rows {
        let item = PyDict::new(py);
        item.set_item("machine", &row.machine)?;
        item.set_item("state", &row.state)?;
        item.set_item("rule", row.rule.to_string())?;
        let stats = PyDict::new(py);
        for e in &row.statistics {
            stats.set_item(&e.outcome, e.probability)?;
        }
        item.set_item("statistics", stats)?;
        let born = PyDict::new(py);
        for e in &row.born_reference {
            born.set_item(&e.outcome, e.probability)?;
        }
        item.set_item("born_reference", born)?;
        item.set_item("born_consistent", row.born_consistent)?;
        item.set_item("condition4_local", row.condition4_local)?;
        item.set_item("notes", row.notes.clone())?;
        rows.append(item)?;
    }
    Ok(rows)
}

#[pymodule]
fn envariance_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySubsystemLayout>()?;
    m.add_class::<PyPureState>()?;
    m.add_class::<PyLocalOperator>()?;
    m.add_class::<PyEnvarianceVerdict>()?;
    m.add_class::<PyRationalWeightPlan>()?;
    m.add_class::<PyFineGrainingMap>()?;
    m.add_class::<PyMeasurementMachine>()?;
    m.add_function(wrap_pyfunction!(phase_op, m)?)?;
    m.add_function(wrap_pyfunction!(swap_op, m)?)?;
    m.add_function(wrap_pyfunction!(composite_swap, m)?)?;
    m.add_function(wrap_pyfunction!(is_envariant, m)?)?;
    m.add_function(wrap_pyfunction!(verify_counter, m)?)?;
    m.add_function(wrap_pyfunction!(causality_check, m)?)?;
    m.add_function(wrap_pyfunction!(rationalize, m)?)?;
    m.add_function(wrap_pyfunction!(finegrain_env, m)?)?;
    m.add_function(wrap_pyfunction!(apply_map, m)?)?;
    m.add_function(wrap_pyfunction!(add_ancilla_env, m)?)?;
    m.add_function(wrap_pyfunction!(local_machine, m)?)?;
    m.add_function(wrap_pyfunction!(finegrained_machine, m)?)?;
    m.add_function(wrap_pyfunction!(outcome_statistics, m)?)?;
    m.add_function(wrap_pyfunction!(register, m)?)?;
    m.add_function(wrap_pyfunction!(sample, m)?)?;
    m.add_function(wrap_pyfunction!(paradox_report, m)?)?;
    Ok(())
}
