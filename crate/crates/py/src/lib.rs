//! Python bindings for `latgauge-core`. Fields cross the boundary as nested
//! lists indexed `[i][j]`; sites as `(i, j)` tuples.

use std::sync::Arc;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use latgauge_core::algebra::center_basis;
use latgauge_core::continuum::{d_log_check, g_scaling_check, kvec_convergence, ConvergenceSeries};
use latgauge_core::dynamics::{
    constraint_residual, energy, Leapfrog, PhaseSpaceState, SourceConfig,
};
use latgauge_core::fme::{
    embezzlement_null_test, pi_imbalance_tau, sweep_tau, NullScope, ProtocolSpec,
};
use latgauge_core::gaussian::{
    coulomb_energy_shift, coulomb_momentum, ground_energy, point_charges,
};
use latgauge_core::{
    acceptance, seeded_rng, Error, GridSpec, KernelTable, Region, ScalarField, Site,
};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::InvalidGrid(_)
        | Error::GridMismatch(..)
        | Error::InvalidArgument(_)
        | Error::InvalidMatter(_)
        | Error::InvalidProtocol(_)
        | Error::Parse(_) => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

type Grid2 = Vec<Vec<f64>>;

fn rows(f: &ScalarField) -> Grid2 {
    let n = f.grid().n();
    (0..n)
        .map(|i| (0..n).map(|j| f.get(i, j)).collect())
        .collect()
}

fn charge_field(grid: GridSpec, charges: &[(usize, usize, f64)]) -> PyResult<ScalarField> {
    point_charges(grid, charges).map_err(to_py)
}

/// Periodic `N × N` lattice with spacing `a` and its G/D kernel tables.
#[pyclass(frozen, name = "Lattice")]
struct PyLattice {
    grid: GridSpec,
    kernels: Arc<KernelTable>,
}

#[pymethods]
impl PyLattice {
    #[new]
    #[pyo3(signature = (n, a = 1.0))]
    fn new(n: usize, a: f64) -> PyResult<Self> {
        let grid = GridSpec::new(n, a).map_err(to_py)?;
        let kernels = KernelTable::build_shared(grid).map_err(to_py)?;
        Ok(Self { grid, kernels })
    }

    #[getter]
    fn n(&self) -> usize {
        self.grid.n()
    }

    #[getter]
    fn a(&self) -> f64 {
        self.grid.a()
    }

    fn g(&self, di: isize, dj: isize) -> f64 {
        self.kernels.g(di, dj)
    }

    fn d(&self, di: isize, dj: isize) -> f64 {
        self.kernels.d(di, dj)
    }

    fn ground_energy(&self) -> f64 {
        ground_energy(&self.grid)
    }

    /// `E_ρ − E₀` for point charges `[(i, j, q), …]`.
    fn coulomb_energy_shift(&self, charges: Vec<(usize, usize, f64)>) -> PyResult<f64> {
        let rho = charge_field(self.grid, &charges)?;
        coulomb_energy_shift(&rho, &self.kernels).map_err(to_py)
    }

    /// Coulomb momentum `(p_x, p_y)` as two nested lists.
    fn coulomb_momentum(&self, charges: Vec<(usize, usize, f64)>) -> PyResult<(Grid2, Grid2)> {
        let rho = charge_field(self.grid, &charges)?;
        let p = coulomb_momentum(&rho, &self.kernels).map_err(to_py)?.p;
        Ok((rows(&p.x), rows(&p.y)))
    }

    /// Leapfrog run from a seeded random state; returns `(t, H, max |C|)` rows.
    #[pyo3(signature = (steps, dt = 0.05, seed = 0))]
    fn evolve(&self, steps: usize, dt: f64, seed: u64) -> PyResult<Vec<(f64, f64, f64)>> {
        let source = SourceConfig::vacuum(self.grid);
        let start = PhaseSpaceState::random(self.grid, &mut seeded_rng(seed));
        let mut out = Vec::with_capacity(steps + 1);
        let mut record = |s: &PhaseSpaceState| {
            out.push((
                s.time,
                energy(s, &source),
                constraint_residual(s, &source).norm_inf(),
            ))
        };
        record(&start);
        Leapfrog::new(&source, dt)
            .and_then(|lf| lf.run(&start, steps, |_, s| record(s)))
            .map_err(to_py)?;
        Ok(out)
    }

    /// Sweeps τ for charges at `site_a` and `site_b` on one row; returns
    /// `(tau, [phi_LL, phi_LR, phi_RL, phi_RR], entropy)` rows.
    fn fme_sweep(
        &self,
        site_a: (usize, usize),
        site_b: (usize, usize),
        taus: Vec<f64>,
    ) -> PyResult<Vec<(f64, [f64; 4], f64)>> {
        let spec = self.protocol(site_a, site_b)?;
        let rows = sweep_tau(&spec, &self.kernels, &taus).map_err(to_py)?;
        Ok(rows
            .into_iter()
            .map(|r| (r.tau, r.phi, r.entropy))
            .collect())
    }

    fn pi_imbalance_tau(&self, site_a: (usize, usize), site_b: (usize, usize)) -> PyResult<f64> {
        let spec = self.protocol(site_a, site_b)?;
        pi_imbalance_tau(&spec, &self.kernels).map_err(to_py)
    }

    /// True when split followed by merge restores the state exactly.
    fn null_test(&self, site_a: (usize, usize), site_b: (usize, usize)) -> PyResult<bool> {
        let spec = self.protocol(site_a, site_b)?;
        let mut ok = true;
        for scope in [NullScope::Both, NullScope::OnlyA, NullScope::OnlyB] {
            ok &= embezzlement_null_test(&spec, &self.kernels, scope)
                .map_err(to_py)?
                .passed();
        }
        Ok(ok)
    }

    /// Dimension of the center of the algebra of the `m × m` region at `(i, j)`.
    fn center_dimension(&self, i: usize, j: usize, m: usize) -> PyResult<usize> {
        let region = Region::new(&self.grid, Site::new(i, j), m).map_err(to_py)?;
        Ok(center_basis(&region, &self.grid).rank())
    }

    fn __repr__(&self) -> String {
        format!("Lattice(n={}, a={})", self.grid.n(), self.grid.a())
    }
}

impl PyLattice {
    fn protocol(&self, a: (usize, usize), b: (usize, usize)) -> PyResult<ProtocolSpec> {
        ProtocolSpec::around_sites(self.grid, Site::new(a.0, a.1), Site::new(b.0, b.1))
            .map_err(to_py)
    }
}

/// `(N values, observable values, (extrapolated limit, order))`.
type Series = (Vec<usize>, Vec<f64>, Option<(f64, f64)>);

fn series(s: ConvergenceSeries) -> Series {
    (s.n_values, s.values, s.fit.map(|f| (f.estimate, f.rate)))
}

/// `[D(r1) − D(r2)]/ln(r2/r1)` over `n_list`: `(N, values, (estimate, rate))`.
#[pyfunction]
fn d_log_series(n_list: Vec<usize>, r1: usize, r2: usize) -> PyResult<Series> {
    d_log_check(&n_list, r1, r2).map(series).map_err(to_py)
}

#[pyfunction]
fn g_scaling_series(n_list: Vec<usize>, r: usize) -> PyResult<Series> {
    g_scaling_check(&n_list, r).map(series).map_err(to_py)
}

#[pyfunction]
fn kvec_series(n_list: Vec<usize>, fraction: f64) -> PyResult<Series> {
    kvec_convergence(&n_list, fraction)
        .map(series)
        .map_err(to_py)
}

/// Runs one acceptance criterion: `(id, name, passed, detail, seconds)`.
#[pyfunction]
#[pyo3(signature = (id, seed = 20_240_601))]
fn acceptance_check(id: usize, seed: u64) -> PyResult<(usize, String, bool, String, f64)> {
    let r = acceptance::run(id, seed)
        .ok_or_else(|| PyValueError::new_err(format!("no criterion {id}")))?;
    Ok((
        r.id,
        r.name.to_string(),
        r.passed,
        r.detail,
        r.elapsed.as_secs_f64(),
    ))
}

#[pymodule]
fn latgauge(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyLattice>()?;
    m.add_function(wrap_pyfunction!(d_log_series, m)?)?;
    m.add_function(wrap_pyfunction!(g_scaling_series, m)?)?;
    m.add_function(wrap_pyfunction!(kvec_series, m)?)?;
    m.add_function(wrap_pyfunction!(acceptance_check, m)?)?;
    Ok(())
}
