//! Python module `ocs`.
//!
//! ```python
//! import ocs
//! ped = ocs.read_pedigree("pedigree.csv")
//! res = ocs.solve(ped, theta=0.25, upper=0.5)
//! res.status, res.objective, res.contributions
//! ```

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;

use ocs_core::formulation::{build, build_sdp, export_sdpa as write_sdpa, Formulation, SelectionInstance};
use ocs_core::kinship::{relationship_matrix, KinshipModel};
use ocs_core::solver::{solve as run_solver, SolverConfig, Status};
use ocs_core::verify::{generate_pedigree as simulate, GeneratorConfig};

create_exception!(ocs, OcsError, PyException, "Raised for invalid input and numerical failures.");

fn py_err(e: ocs_core::Error) -> PyErr {
    OcsError::new_err(format!("{}: {e}", e.kind()))
}

/// A canonically ordered pedigree.
#[pyclass(module = "ocs", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct Pedigree {
    inner: ocs_core::pedigree::Pedigree,
}

#[pymethods]
impl Pedigree {
    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Pedigree(members={})", self.inner.len())
    }

    /// Member labels in canonical order.
    #[getter]
    fn labels(&self) -> Vec<String> {
        self.inner.labels().to_vec()
    }

    #[getter]
    fn ebv(&self) -> Vec<f64> {
        self.inner.ebv().to_vec()
    }

    /// `(sire, dam)` indices per member, `None` where unknown.
    #[getter]
    fn parents(&self) -> Vec<(Option<usize>, Option<usize>)> {
        self.inner.parents().iter().map(|p| (p.p(), p.q())).collect()
    }

    fn to_csv(&self) -> PyResult<String> {
        let mut buf = Vec::new();
        self.inner.write_csv(&mut buf).map_err(py_err)?;
        Ok(String::from_utf8(buf).expect("labels are UTF-8"))
    }

    /// Dense numerator relationship matrix (subject to the dense limit).
    fn relationship_matrix(&self) -> PyResult<Vec<Vec<f64>>> {
        let a = relationship_matrix(&self.inner).map_err(py_err)?;
        Ok((0..a.n()).map(|i| a.row(i).to_vec()).collect())
    }

    /// Upper-triangle `(i, j, value)` entries of the inverse relationship matrix.
    fn inverse_relationship(&self) -> PyResult<Vec<(usize, usize, f64)>> {
        let kin = KinshipModel::new(&self.inner).map_err(py_err)?;
        Ok(kin.inverse.upper().collect())
    }

    /// Inbreeding coefficients.
    fn inbreeding(&self) -> PyResult<Vec<f64>> {
        Ok(KinshipModel::new(&self.inner).map_err(py_err)?.inbreeding.0)
    }
}

/// Outcome of [`solve`].
#[pyclass(module = "ocs", frozen, get_all)]
pub struct SolveResult {
    status: String,
    objective: Option<f64>,
    group_coancestry: Option<f64>,
    contributions: Option<Vec<f64>>,
    labels: Vec<String>,
    iterations: usize,
    gap: Option<f64>,
    formulation: String,
}

#[pymethods]
impl SolveResult {
    fn __repr__(&self) -> String {
        format!(
            "SolveResult(status={:?}, objective={:?}, iterations={})",
            self.status, self.objective, self.iterations
        )
    }
}

#[derive(FromPyObject)]
enum Bound {
    Scalar(f64),
    Values(Vec<f64>),
}

impl Bound {
    fn expand(self, m: usize) -> Vec<f64> {
        match self {
            Bound::Scalar(v) => vec![v; m],
            Bound::Values(v) => v,
        }
    }
}

fn instance(ped: &Pedigree, theta: f64, lower: Bound, upper: Bound) -> PyResult<SelectionInstance> {
    let m = ped.inner.len();
    SelectionInstance::new(ped.inner.clone(), lower.expand(m), upper.expand(m), theta).map_err(py_err)
}

#[pyfunction]
fn parse_pedigree(text: &str) -> PyResult<Pedigree> {
    let inner = ocs_core::pedigree::parse_pedigree(text.as_bytes()).map_err(py_err)?;
    Ok(Pedigree { inner })
}

#[pyfunction]
fn read_pedigree(path: std::path::PathBuf) -> PyResult<Pedigree> {
    let file = std::fs::File::open(&path).map_err(|e| OcsError::new_err(format!("io: {}: {e}", path.display())))?;
    let inner = ocs_core::pedigree::parse_pedigree(std::io::BufReader::new(file)).map_err(py_err)?;
    Ok(Pedigree { inner })
}

#[pyfunction]
#[pyo3(signature = (seed=1, founders=20, cycles=5, offspring=20, selection_fraction=0.5))]
fn generate_pedigree(
    seed: u64,
    founders: usize,
    cycles: usize,
    offspring: usize,
    selection_fraction: f64,
) -> PyResult<Pedigree> {
    let inner = simulate(&GeneratorConfig {
        seed,
        n_founders: founders,
        n_cycles: cycles,
        offspring_per_cycle: offspring,
        selection_fraction,
    })
    .map_err(py_err)?;
    Ok(Pedigree { inner })
}

/// Maximizes `ebvᵀx` subject to `Σx = 1`, `lower ≤ x ≤ upper` and
/// `xᵀAx/2 ≤ theta`. Bounds are a number or one value per member.
#[pyfunction]
#[pyo3(signature = (pedigree, theta, lower=Bound::Scalar(0.0), upper=Bound::Scalar(1.0), formulation="compact", tol=None, max_iter=None))]
#[allow(clippy::too_many_arguments)]
fn solve(
    py: Python<'_>,
    pedigree: &Pedigree,
    theta: f64,
    lower: Bound,
    upper: Bound,
    formulation: &str,
    tol: Option<f64>,
    max_iter: Option<usize>,
) -> PyResult<SolveResult> {
    let formulation: Formulation = formulation.parse().map_err(|e: ocs_core::Error| PyValueError::new_err(e.to_string()))?;
    let inst = instance(pedigree, theta, lower, upper)?;
    let mut cfg = SolverConfig::default();
    if let Some(t) = tol {
        cfg.tol_gap = t;
        cfg.tol_feas = t;
    }
    if let Some(n) = max_iter {
        cfg.max_iter = n;
    }
    let (built, sol) = py
        .detach(|| -> ocs_core::Result<_> {
            let built = build(&inst, formulation)?;
            let sol = run_solver(&built.problem, &cfg)?;
            Ok((built, sol))
        })
        .map_err(py_err)?;
    let optimal = sol.status == Status::Optimal;
    let (contributions, coancestry) = if optimal {
        (
            Some(built.recover(&sol.z).map_err(py_err)?),
            Some(built.group_coancestry(&sol.z).map_err(py_err)?),
        )
    } else {
        (None, None)
    };
    Ok(SolveResult {
        status: sol.status.to_string(),
        objective: optimal.then_some(sol.objective),
        group_coancestry: coancestry,
        contributions,
        labels: inst.pedigree().labels().to_vec(),
        iterations: sol.iterations,
        gap: optimal.then_some(sol.gap),
        formulation: formulation.to_string(),
    })
}

/// The instance's SDP data as sparse SDPA text.
#[pyfunction]
#[pyo3(signature = (pedigree, theta, lower=Bound::Scalar(0.0), upper=Bound::Scalar(1.0)))]
fn export_sdpa(pedigree: &Pedigree, theta: f64, lower: Bound, upper: Bound) -> PyResult<String> {
    let inst = instance(pedigree, theta, lower, upper)?;
    let kin = KinshipModel::new(inst.pedigree()).map_err(py_err)?;
    let sdp = build_sdp(&inst, &kin.inverse).map_err(py_err)?;
    let mut buf = Vec::new();
    write_sdpa(&sdp, &mut buf).map_err(py_err)?;
    Ok(String::from_utf8(buf).expect("ASCII output"))
}

#[pymodule]
#[pyo3(name = "ocs")]
pub fn ocs_module(m: &pyo3::Bound<'_, PyModule>) -> PyResult<()> {
    m.add("OcsError", m.py().get_type::<OcsError>())?;
    m.add_class::<Pedigree>()?;
    m.add_class::<SolveResult>()?;
    m.add_function(wrap_pyfunction!(parse_pedigree, m)?)?;
    m.add_function(wrap_pyfunction!(read_pedigree, m)?)?;
    m.add_function(wrap_pyfunction!(generate_pedigree, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(export_sdpa, m)?)?;
    Ok(())
}
