//! Python bindings: grids, the spectral calculus, Besov norms, rate fits
//! and the suite runner.

use std::path::Path;
use std::sync::Arc;

use besovlab::besov::{besov_norm, BesovParams};
use besovlab::fit::fit_rate as fit;
use besovlab::grid::{assemble_laplacian, build_domain, Field, GridDomain, GridSpec};
use besovlab::partition::{build_partition, DyadicPartition};
use besovlab::spectral::{decompose, SpectralDecomposition};
use besovlab::suite::{run_suite, ExperimentConfig, REGISTRY};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn err(e: besovlab::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(frozen, skip_from_py_object)]
#[derive(Clone)]
struct Grid {
    spec: GridSpec,
}

#[pymethods]
impl Grid {
    /// Unit interval with `n` interior points.
    #[staticmethod]
    fn interval(n: usize) -> PyResult<Self> {
        Ok(Self { spec: GridSpec::unit_interval(n).map_err(err)? })
    }

    /// Unit square with `m x m` interior points.
    #[staticmethod]
    fn square(m: usize) -> PyResult<Self> {
        Ok(Self { spec: GridSpec::unit_square(m).map_err(err)? })
    }

    #[staticmethod]
    fn from_mask(text: &str) -> PyResult<Self> {
        Ok(Self { spec: GridSpec::parse_mask(text).map_err(err)? })
    }

    fn to_mask(&self) -> String {
        self.spec.to_mask_string()
    }

    fn refined(&self) -> Self {
        Self { spec: self.spec.refined() }
    }

    #[getter]
    fn dim(&self) -> usize {
        self.spec.dim()
    }

    #[getter]
    fn h(&self) -> f64 {
        self.spec.h()
    }

    #[getter]
    fn n(&self) -> usize {
        self.spec.mask().iter().filter(|&&m| m).count()
    }

    fn __repr__(&self) -> String {
        format!("Grid(dim={}, n={}, h={})", self.dim(), self.n(), self.h())
    }
}

/// Eigendecomposition of the Dirichlet Laplacian on a grid, with its dyadic
/// partition.
#[pyclass(frozen)]
struct Spectral {
    domain: Arc<GridDomain>,
    dec: SpectralDecomposition,
    part: DyadicPartition,
}

impl Spectral {
    fn field(&self, values: Vec<f64>) -> PyResult<Field> {
        Field::new(self.domain.clone(), values).map_err(err)
    }
}

#[pymethods]
impl Spectral {
    #[new]
    fn new(py: Python<'_>, grid: &Grid) -> PyResult<Self> {
        let spec = grid.spec.clone();
        py.detach(|| {
            let domain = build_domain(spec)?;
            let dec = decompose(&assemble_laplacian(&domain))?;
            let part = build_partition(&dec);
            Ok(Self { domain, dec, part })
        })
        .map_err(err)
    }

    #[getter]
    fn n(&self) -> usize {
        self.dec.n()
    }

    #[getter]
    fn eigenvalues(&self) -> Vec<f64> {
        self.dec.eigenvalues().to_vec()
    }

    #[getter]
    fn j_range(&self) -> (i32, i32) {
        (self.part.j_min(), self.part.j_max())
    }

    /// Lattice positions of the interior cells.
    fn positions(&self) -> Vec<Vec<f64>> {
        (0..self.domain.n()).map(|i| self.domain.position(i)[..self.domain.dim()].to_vec()).collect()
    }

    fn eigenvector(&self, k: usize) -> PyResult<Vec<f64>> {
        if k >= self.dec.n() {
            return Err(PyValueError::new_err(format!("mode {k} out of range")));
        }
        Ok(self.dec.vector(k).to_vec())
    }

    fn coefficients(&self, values: Vec<f64>) -> PyResult<Vec<f64>> {
        self.dec.coefficients(&self.field(values)?).map_err(err)
    }

    fn synthesize(&self, coeffs: Vec<f64>) -> PyResult<Vec<f64>> {
        if coeffs.len() != self.dec.n() {
            return Err(PyValueError::new_err("coefficient length does not match the grid"));
        }
        Ok(self.dec.synthesize(&coeffs).into_values())
    }

    /// `exp(-t A^(alpha/2)) f`.
    #[pyo3(signature = (values, t, alpha = 2.0))]
    fn semigroup(&self, values: Vec<f64>, t: f64, alpha: f64) -> PyResult<Vec<f64>> {
        let f = self.field(values)?;
        Ok(self.dec.semigroup_apply(t, alpha, &f).map_err(err)?.into_values())
    }

    /// `A^(alpha/2) f`.
    fn fractional_power(&self, values: Vec<f64>, alpha: f64) -> PyResult<Vec<f64>> {
        let f = self.field(values)?;
        Ok(self.dec.fractional_power(alpha, &f).map_err(err)?.into_values())
    }

    fn lp_norm(&self, values: Vec<f64>, p: f64) -> PyResult<f64> {
        self.field(values)?.lp_norm(p).map_err(err)
    }

    #[pyo3(signature = (values, s, p, q, homogeneous = true))]
    fn besov_norm(&self, values: Vec<f64>, s: f64, p: f64, q: f64, homogeneous: bool) -> PyResult<f64> {
        let prm = BesovParams { s, p, q, homogeneous };
        besov_norm(&self.dec, &self.part, &self.field(values)?, &prm).map_err(err)
    }

    /// `phi_j(sqrt A) f`.
    fn block(&self, values: Vec<f64>, j: i32) -> PyResult<Vec<f64>> {
        let f = self.field(values)?;
        Ok(self.part.phi_block(&self.dec, j, &f).map_err(err)?.into_values())
    }
}

/// `(slope, intercept, r_squared)` of a log-log least-squares fit.
#[pyfunction]
fn fit_rate(points: Vec<(f64, f64)>) -> PyResult<(f64, f64, f64)> {
    let f = fit(&points).map_err(err)?;
    Ok((f.slope, f.intercept, f.r_squared))
}

/// Registered suite names.
#[pyfunction]
fn suites() -> Vec<&'static str> {
    REGISTRY.iter().map(|r| r.0).collect()
}

/// Runs a JSON config; returns `(csv, json, all_pass)`.
#[pyfunction]
#[pyo3(signature = (config, base_dir = ".", jobs = 0))]
fn run_config(py: Python<'_>, config: &str, base_dir: &str, jobs: usize) -> PyResult<(String, String, bool)> {
    let cfg = ExperimentConfig::from_json(config).map_err(err)?;
    let (report, _) = py.detach(|| run_suite(&cfg, Path::new(base_dir), jobs)).map_err(err)?;
    Ok((report.to_csv(), report.to_json(), report.all_pass()))
}

#[pymodule]
fn _besovlab(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Grid>()?;
    m.add_class::<Spectral>()?;
    m.add_function(wrap_pyfunction!(fit_rate, m)?)?;
    m.add_function(wrap_pyfunction!(suites, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    Ok(())
}
