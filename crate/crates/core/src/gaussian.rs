//! Gaussian ground states of the field, with and without static charges.
//!
//! Every state the protocol touches is a phase times a copy of the vacuum
//! Gaussian displaced in momentum space, so a state is stored as
//! `(kernel, shift, phase)` rather than as a sampled wave functional.
//! Units: ħ = 1.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::dynamics::physical_constraint_residual;
use crate::error::Result;
use crate::lattice::{Direction, GridSpec, ScalarField, VectorField};
use crate::spectral::{
    d_spectrum, dft_forward, dft_inverse, g_spectrum, is_zero_mode, kernel_quadratic_form,
    wave_vector, zero_mode_content, KernelTable,
};

/// Tolerance on the Gauss residual for a momentum sample to count as physical.
pub const CONSTRAINT_TOLERANCE: f64 = 1e-8;

/// Wraps an angle into `(−π, π]`.
pub fn wrap_phase(theta: f64) -> f64 {
    PI - (PI - theta).rem_euclid(2.0 * PI)
}

/// `½ Σ |k̄|` over all modes.
pub fn ground_energy(grid: &GridSpec) -> f64 {
    let n = grid.n();
    let mut total = 0.0;
    for alpha in 0..n {
        for beta in 0..n {
            total += wave_vector(grid, alpha, beta)
                .expect("mode in range")
                .norm();
        }
    }
    0.5 * total
}

/// `E_ρ − E₀ = ½ Σ Σ D(i−n, j−m) ρ[i,j] ρ[n,m]`, summed over the support
/// of ρ.
pub fn coulomb_energy_shift(rho: &ScalarField, kernels: &KernelTable) -> Result<f64> {
    let grid = *kernels.grid();
    grid.ensure_same(rho.grid())?;
    let charges: Vec<(isize, isize, f64)> = grid
        .sites()
        .filter_map(|s| {
            let v = rho.at(s);
            (v != 0.0).then_some((s.i as isize, s.j as isize, v))
        })
        .collect();
    let mut total = 0.0;
    for &(i, j, qa) in &charges {
        for &(n, m, qb) in &charges {
            total += kernels.d(i - n, j - m) * qa * qb;
        }
    }
    Ok(0.5 * total)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoulombMomentum {
    pub p: VectorField,
    /// Set when ρ had weight on a `|k̄| = 0` mode. That part is dropped, so
    /// `p` solves the Gauss law only for the projected charge.
    pub non_neutral: bool,
}

/// Background momentum `p_ρ` with `p̃_s = i k̄_s ρ̃ / |k̄|²` on every
/// nonzero mode.
pub fn coulomb_momentum(rho: &ScalarField, kernels: &KernelTable) -> Result<CoulombMomentum> {
    let grid = *kernels.grid();
    grid.ensure_same(rho.grid())?;
    let spectrum = dft_forward(rho);
    let component = |dir: Direction| {
        let modes = spectrum.multiply(|alpha, beta| {
            if is_zero_mode(&grid, alpha, beta) {
                return Complex64::new(0.0, 0.0);
            }
            let k = wave_vector(&grid, alpha, beta).expect("mode in range");
            Complex64::new(0.0, k.component(dir) / k.norm_sqr())
        });
        dft_inverse(&modes)
    };
    let p = VectorField::new(component(Direction::X)?, component(Direction::Y)?)?;
    let scale = rho.norm_inf().max(1.0);
    let non_neutral = zero_mode_content(rho) > 1e-12 * scale * grid.n_sites() as f64;
    Ok(CoulombMomentum { p, non_neutral })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyReport {
    pub e0: f64,
    pub e_shift: f64,
    pub total: f64,
}

impl EnergyReport {
    pub fn for_source(rho: &ScalarField, kernels: &KernelTable) -> Result<Self> {
        let e0 = ground_energy(kernels.grid());
        let e_shift = coulomb_energy_shift(rho, kernels)?;
        Ok(Self {
            e0,
            e_shift,
            total: e0 + e_shift,
        })
    }
}

#[derive(Debug, Clone)]
pub struct GaussianFieldState {
    kernel: Arc<KernelTable>,
    pub shift: VectorField,
    phase: f64,
    pub norm_const_log: f64,
}

impl GaussianFieldState {
    pub fn vacuum(kernel: Arc<KernelTable>) -> Self {
        let grid = *kernel.grid();
        Self {
            kernel,
            shift: VectorField::zeros(grid),
            phase: 0.0,
            norm_const_log: 0.0,
        }
    }

    /// Ground state in the sector of the static charge `rho`.
    pub fn with_source(kernel: Arc<KernelTable>, rho: &ScalarField) -> Result<Self> {
        let shift = coulomb_momentum(rho, &kernel)?.p;
        Ok(Self {
            kernel,
            shift,
            phase: 0.0,
            norm_const_log: 0.0,
        })
    }

    pub fn kernel(&self) -> &Arc<KernelTable> {
        &self.kernel
    }

    pub fn grid(&self) -> &GridSpec {
        self.kernel.grid()
    }

    pub fn phase(&self) -> f64 {
        self.phase
    }

    pub fn with_phase(mut self, phase: f64) -> Self {
        self.phase = wrap_phase(phase);
        self
    }

    /// `phase ← wrap(phase − energy·τ)`.
    pub fn evolve_phase(&self, energy: f64, tau: f64) -> Self {
        let mut out = self.clone();
        out.phase = wrap_phase(self.phase - energy * tau);
        out
    }

    pub fn displace(&self, delta_p: &VectorField) -> Result<Self> {
        self.grid().ensure_same(delta_p.grid())?;
        let mut out = self.clone();
        out.shift = &self.shift + delta_p;
        Ok(out)
    }

    /// `log A − ½ Σ Σ G (p − p_ρ)(p − p_ρ)` together with whether the sample
    /// satisfies the sourced Gauss law. The delta functional is reported as
    /// the flag and never folded into the modulus.
    pub fn log_amplitude_p(
        &self,
        p_sample: &VectorField,
        rho: &ScalarField,
    ) -> Result<(f64, bool)> {
        self.grid().ensure_same(p_sample.grid())?;
        self.grid().ensure_same(rho.grid())?;
        let dev = p_sample - &self.shift;
        let quad = kernel_quadratic_form(&dev, g_spectrum);
        let residual = physical_constraint_residual(p_sample, rho).norm_inf();
        Ok((
            self.norm_const_log - 0.5 * quad,
            residual < CONSTRAINT_TOLERANCE,
        ))
    }

    /// Same-sector overlap test used by the protocol: equal shifts within
    /// `tol` and equal kernels.
    pub fn same_field(&self, other: &Self, tol: f64) -> bool {
        (Arc::ptr_eq(&self.kernel, &other.kernel) || *self.kernel == *other.kernel)
            && self.shift.max_abs_diff(&other.shift) <= tol
    }
}

/// Fourier-side Coulomb shift, `(1/2N²) Σ' |ρ̃|² / |k̄|²`.
pub fn coulomb_energy_shift_spectral(rho: &ScalarField) -> f64 {
    let grid = *rho.grid();
    let n = grid.n();
    let t = dft_forward(rho);
    let total: f64 = t
        .modes()
        .iter()
        .enumerate()
        .map(|(k, m)| d_spectrum(&grid, k / n, k % n) * m.norm_sqr())
        .sum();
    0.5 * total / grid.n_sites() as f64
}

/// Unit point charges at the given sites.
pub fn point_charges(grid: GridSpec, charges: &[(usize, usize, f64)]) -> Result<ScalarField> {
    let mut rho = ScalarField::zeros(grid);
    for &(i, j, q) in charges {
        if i >= grid.n() || j >= grid.n() {
            return Err(crate::Error::InvalidArgument(format!(
                "charge site ({i},{j}) outside an N={} grid",
                grid.n()
            )));
        }
        rho.set(i, j, rho.get(i, j) + q);
    }
    Ok(rho)
}
