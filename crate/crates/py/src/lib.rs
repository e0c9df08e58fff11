//! Python bindings: channels in, plain lists and floats out.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use sadbc::enhancement::{verify_enhancement, Tolerances};
use sadbc::solver;
use sadbc::{PowerSplit, Sadbc, SolveOptions, SymMatrix};

fn err(e: sadbc::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_sym(rows: &[Vec<f64>], name: &str) -> PyResult<SymMatrix> {
    let t = rows.len();
    if rows.iter().any(|r| r.len() != t) {
        return Err(PyValueError::new_err(format!("{name} must be square")));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    SymMatrix::from_row_major(t, &flat).map_err(err)
}

fn to_rows(m: &SymMatrix) -> Vec<Vec<f64>> {
    let t = m.dim();
    (0..t).map(|i| (0..t).map(|j| m.get(i, j)).collect()).collect()
}

fn options(seed: u64, restarts: usize) -> SolveOptions {
    SolveOptions { seed, restarts, ..SolveOptions::default() }
}

/// A validated channel `(S, N1, N2, N3)` with `N1 ⪯ N2 ⪯ N3`.
#[pyclass(name = "Channel", frozen)]
struct PyChannel {
    inner: Sadbc,
}

#[pymethods]
impl PyChannel {
    #[new]
    #[pyo3(signature = (s, n1, n2, n3, tol = 1e-8))]
    fn new(s: Vec<Vec<f64>>, n1: Vec<Vec<f64>>, n2: Vec<Vec<f64>>, n3: Vec<Vec<f64>>, tol: f64) -> PyResult<Self> {
        let t = s.len();
        let inner = Sadbc::validate(t, to_sym(&s, "S")?, to_sym(&n1, "N1")?, to_sym(&n2, "N2")?, to_sym(&n3, "N3")?, tol)
            .map_err(err)?;
        Ok(Self { inner })
    }

    /// Seeded random channel with dense noises.
    #[staticmethod]
    #[pyo3(signature = (t, seed, power_scale = 2.0))]
    fn random(t: usize, seed: u64, power_scale: f64) -> Self {
        Self { inner: Sadbc::random_instance(t, seed, power_scale) }
    }

    #[getter]
    fn t(&self) -> usize {
        self.inner.dim()
    }

    /// `(r1_bits, r2_bits)` of a split.
    fn rates(&self, b1: Vec<Vec<f64>>, b2: Vec<Vec<f64>>) -> PyResult<(f64, f64)> {
        let split = PowerSplit::new(to_sym(&b1, "B1")?, to_sym(&b2, "B2")?).map_err(err)?;
        let r = sadbc::rates::rate_pair(&split, &self.inner).map_err(err)?;
        Ok((r.r1_bits, r.r2_bits))
    }
}

/// One boundary solve.
#[pyclass(name = "Solution", frozen, get_all)]
struct PySolution {
    /// `μ`; `0.0` for the max-R1 corner, `inf` for the max-R2 corner.
    mu: f64,
    b1: Vec<Vec<f64>>,
    b2: Vec<Vec<f64>>,
    r1_bits: f64,
    r2_bits: f64,
    objective_nats: f64,
    certified: bool,
    kkt_residuals: (f64, f64),
    iterations: usize,
}

impl PySolution {
    fn from(s: &sadbc::Solution) -> Self {
        Self {
            mu: s.target.mu_value(),
            b1: to_rows(&s.split.b1),
            b2: to_rows(&s.split.b2),
            r1_bits: s.rates.r1_bits,
            r2_bits: s.rates.r2_bits,
            objective_nats: s.objective_nats,
            certified: s.certified,
            kkt_residuals: (s.certificate.stationarity_residual_1, s.certificate.stationarity_residual_2),
            iterations: s.iterations,
        }
    }
}

#[pymethods]
impl PySolution {
    fn __repr__(&self) -> String {
        format!(
            "Solution(mu={}, r1_bits={:.6}, r2_bits={:.6}, certified={})",
            self.mu, self.r1_bits, self.r2_bits, self.certified
        )
    }
}

/// Maximize `R1 + mu·R2`, `mu ≥ 1`.
#[pyfunction]
#[pyo3(signature = (channel, mu, seed = 0, restarts = 8))]
fn solve(py: Python<'_>, channel: &PyChannel, mu: f64, seed: u64, restarts: usize) -> PyResult<PySolution> {
    let opts = options(seed, restarts);
    let sol = py.detach(|| solver::maximize_weighted(&channel.inner, mu, &opts)).map_err(err)?;
    Ok(PySolution::from(&sol))
}

/// Both corners and one solve per grid value, sorted by `r1`. Failed solves raise.
#[pyfunction]
#[pyo3(signature = (channel, mu_grid, seed = 0, restarts = 8))]
fn trace_boundary(
    py: Python<'_>,
    channel: &PyChannel,
    mu_grid: Vec<f64>,
    seed: u64,
    restarts: usize,
) -> PyResult<Vec<PySolution>> {
    let opts = options(seed, restarts);
    let trace = py.detach(|| solver::trace_boundary(&channel.inner, &mu_grid, &opts)).map_err(err)?;
    trace
        .sorted_by_r1()
        .into_iter()
        .map(|p| match &p.outcome {
            Ok(s) => Ok(PySolution::from(s)),
            Err(e) => Err(PyValueError::new_err(format!("mu={}: {e}", p.target.mu_value()))),
        })
        .collect()
}

/// Solve at `mu > 1`, build the enhanced channel and run its checks.
/// Returns a dict of check values and pass flags.
#[pyfunction]
#[pyo3(signature = (channel, mu, seed = 0))]
fn verify<'py>(py: Python<'py>, channel: &PyChannel, mu: f64, seed: u64) -> PyResult<Bound<'py, pyo3::types::PyDict>> {
    let opts = options(seed, SolveOptions::default().restarts);
    let ch = &channel.inner;
    let report = py
        .detach(|| {
            let sol = solver::maximize_weighted(ch, mu, &opts)?;
            verify_enhancement(ch, &sol.split, &sol.certificate, mu, &Tolerances::default()).map(|r| (sol, r))
        })
        .map_err(err)?;
    let (sol, r) = report;
    let d = pyo3::types::PyDict::new(py);
    d.set_item("certified", sol.certified)?;
    d.set_item("ordering_margins", r.ordering_margins.to_vec())?;
    d.set_item("ordering_ok", r.ordering_ok)?;
    d.set_item("proportionality", r.proportionality)?;
    d.set_item("proportionality_ok", r.proportionality_ok)?;
    d.set_item("rate_deltas_bits", r.rate_deltas_bits)?;
    d.set_item("rates_ok", r.rates_ok)?;
    d.set_item("enhanced_kkt", r.enhanced_kkt)?;
    d.set_item("enhanced_kkt_ok", r.enhanced_kkt_ok)?;
    match &r.epi_bits {
        Ok(pair) => d.set_item("epi_bits", *pair)?,
        Err(note) => d.set_item("epi_bits", note)?,
    }
    d.set_item("epi_ok", r.epi_ok)?;
    d.set_item("all_ok", r.all_ok())?;
    Ok(d)
}

#[pymodule]
fn sadbc_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyChannel>()?;
    m.add_class::<PySolution>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(trace_boundary, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    Ok(())
}
