//! Discrete Fourier transform in the lattice convention, discrete wave
//! vectors, and the real-space kernels G and D.
//!
//! Convention: `f̃[α,β] = Σ_{i,j} f[i,j] exp(-2πi(iα + jβ)/N)` with inverse
//! normalisation `1/N²`. Row index `i` pairs with `α` (and `k̄_y`), column
//! index `j` pairs with `β` (and `k̄_x`).

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Direction, GridSpec, ScalarField, VectorField};

/// Relative bound on the imaginary residue accepted by [`dft_inverse`].
pub const NON_REAL_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct FourierField {
    grid: GridSpec,
    modes: Vec<Complex64>,
}

impl FourierField {
    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            modes: vec![Complex64::new(0.0, 0.0); grid.n_sites()],
        }
    }

    pub fn from_modes(grid: GridSpec, modes: Vec<Complex64>) -> Result<Self> {
        if modes.len() != grid.n_sites() {
            return Err(Error::InvalidArgument(format!(
                "expected {} modes, got {}",
                grid.n_sites(),
                modes.len()
            )));
        }
        Ok(Self { grid, modes })
    }

    pub fn from_fn(grid: GridSpec, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let n = grid.n();
        let mut modes = Vec::with_capacity(n * n);
        for alpha in 0..n {
            for beta in 0..n {
                modes.push(f(alpha, beta));
            }
        }
        Self { grid, modes }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn modes(&self) -> &[Complex64] {
        &self.modes
    }

    #[inline]
    pub fn get(&self, alpha: usize, beta: usize) -> Complex64 {
        self.modes[alpha * self.grid.n() + beta]
    }

    pub fn set(&mut self, alpha: usize, beta: usize, v: Complex64) {
        let n = self.grid.n();
        self.modes[alpha * n + beta] = v;
    }

    pub fn norm_inf(&self) -> f64 {
        self.modes.iter().fold(0.0, |m, c| m.max(c.norm()))
    }

    /// Mode-wise product with a function of `(α, β)`.
    pub fn multiply(&self, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let n = self.grid.n();
        let modes = self
            .modes
            .iter()
            .enumerate()
            .map(|(k, &m)| m * f(k / n, k % n))
            .collect();
        Self {
            grid: self.grid,
            modes,
        }
    }

    /// Largest relative violation of `f̃[-α,-β] = conj(f̃[α,β])`.
    pub fn conjugate_symmetry_defect(&self) -> f64 {
        let n = self.grid.n();
        let scale = self.norm_inf().max(f64::MIN_POSITIVE);
        let mut worst: f64 = 0.0;
        for alpha in 0..n {
            for beta in 0..n {
                let mirror = self.get((n - alpha) % n, (n - beta) % n);
                worst = worst.max((self.get(alpha, beta) - mirror.conj()).norm());
            }
        }
        worst / scale
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveVector {
    pub kx: f64,
    pub ky: f64,
}

impl WaveVector {
    pub fn norm(&self) -> f64 {
        self.kx.hypot(self.ky)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.kx * self.kx + self.ky * self.ky
    }

    pub fn component(&self, dir: Direction) -> f64 {
        match dir {
            Direction::X => self.kx,
            Direction::Y => self.ky,
        }
    }
}

/// `sin(2π m / n)`, exactly zero when `2m ≡ 0 (mod n)`.
fn lattice_sine(m: usize, n: usize) -> f64 {
    let m = m % n;
    if (2 * m).is_multiple_of(n) {
        0.0
    } else {
        (2.0 * PI * m as f64 / n as f64).sin()
    }
}

pub fn wave_vector(grid: &GridSpec, alpha: usize, beta: usize) -> Result<WaveVector> {
    let n = grid.n();
    if alpha >= n || beta >= n {
        return Err(Error::InvalidArgument(format!(
            "mode ({alpha},{beta}) out of range for N={n}"
        )));
    }
    Ok(wave_vector_unchecked(grid, alpha, beta))
}

#[inline]
pub(crate) fn wave_vector_unchecked(grid: &GridSpec, alpha: usize, beta: usize) -> WaveVector {
    let n = grid.n();
    WaveVector {
        kx: lattice_sine(beta, n) / grid.a(),
        ky: lattice_sine(alpha, n) / grid.a(),
    }
}

/// True for the modes where `|k̄| = 0`: `(0,0)` for odd N, and
/// `{0, N/2}²` for even N.
pub fn is_zero_mode(grid: &GridSpec, alpha: usize, beta: usize) -> bool {
    let n = grid.n();
    (2 * alpha).is_multiple_of(n) && (2 * beta).is_multiple_of(n)
}

pub fn zero_modes(grid: &GridSpec) -> Vec<(usize, usize)> {
    let n = grid.n();
    let mut out = Vec::new();
    for alpha in 0..n {
        for beta in 0..n {
            if is_zero_mode(grid, alpha, beta) {
                out.push((alpha, beta));
            }
        }
    }
    out
}

fn fft_2d(grid: &GridSpec, data: &mut [Complex64], inverse: bool) {
    let n = grid.n();
    let mut planner = FftPlanner::<f64>::new();
    let fft = if inverse {
        planner.plan_fft_inverse(n)
    } else {
        planner.plan_fft_forward(n)
    };
    // rows (j -> β)
    fft.process(data);
    // columns (i -> α)
    let mut column = vec![Complex64::new(0.0, 0.0); n];
    for j in 0..n {
        for i in 0..n {
            column[i] = data[i * n + j];
        }
        fft.process(&mut column);
        for i in 0..n {
            data[i * n + j] = column[i];
        }
    }
}

pub fn dft_forward(field: &ScalarField) -> FourierField {
    let grid = *field.grid();
    let mut data: Vec<Complex64> = field
        .values()
        .iter()
        .map(|&v| Complex64::new(v, 0.0))
        .collect();
    fft_2d(&grid, &mut data, false);
    FourierField { grid, modes: data }
}

/// Complex inverse transform without the realness check.
pub fn dft_inverse_complex(modes: &FourierField) -> Vec<Complex64> {
    let grid = modes.grid;
    let mut data = modes.modes.clone();
    fft_2d(&grid, &mut data, true);
    let scale = 1.0 / grid.n_sites() as f64;
    data.iter_mut().for_each(|c| *c *= scale);
    data
}

pub fn dft_inverse(modes: &FourierField) -> Result<ScalarField> {
    realify(modes.grid, modes.norm_inf(), dft_inverse_complex(modes))
}

fn realify(grid: GridSpec, scale: f64, data: Vec<Complex64>) -> Result<ScalarField> {
    let residue = data.iter().fold(0.0_f64, |m, c| m.max(c.im.abs()));
    let bound = NON_REAL_TOLERANCE * scale;
    if residue > bound {
        return Err(Error::NonRealResult { residue, bound });
    }
    ScalarField::from_values(grid, data.into_iter().map(|c| c.re).collect())
}

fn twiddles(n: usize, sign: f64) -> Vec<Complex64> {
    (0..n)
        .map(|k| Complex64::from_polar(1.0, sign * 2.0 * PI * k as f64 / n as f64))
        .collect()
}

/// Direct `O(N⁴)` forward sum. Reference implementation for the fast path.
pub fn dft_forward_direct(field: &ScalarField) -> FourierField {
    let grid = *field.grid();
    let n = grid.n();
    let w = twiddles(n, -1.0);
    FourierField::from_fn(grid, |alpha, beta| {
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                acc += w[(i * alpha + j * beta) % n] * field.get(i, j);
            }
        }
        acc
    })
}

/// Direct `O(N⁴)` inverse sum.
pub fn dft_inverse_direct(modes: &FourierField) -> Result<ScalarField> {
    let grid = modes.grid;
    let n = grid.n();
    let w = twiddles(n, 1.0);
    let mut data = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for alpha in 0..n {
                for beta in 0..n {
                    acc += w[(i * alpha + j * beta) % n] * modes.get(alpha, beta);
                }
            }
            data.push(acc / (n * n) as f64);
        }
    }
    realify(grid, modes.norm_inf(), data)
}

/// Removes every `|k̄| = 0` component of a field (the field's mean for odd N).
/// Any divergence lies in the range of this projection.
pub fn project_out_zero_modes(field: &ScalarField) -> ScalarField {
    let grid = *field.grid();
    let mut spectrum = dft_forward(field);
    for (alpha, beta) in zero_modes(&grid) {
        spectrum.set(alpha, beta, Complex64::new(0.0, 0.0));
    }
    let data = dft_inverse_complex(&spectrum);
    ScalarField::from_values(grid, data.into_iter().map(|c| c.re).collect())
        .expect("size preserved by the transform")
}

/// Largest magnitude among the `|k̄| = 0` Fourier components.
pub fn zero_mode_content(field: &ScalarField) -> f64 {
    let grid = *field.grid();
    let spectrum = dft_forward(field);
    zero_modes(&grid)
        .into_iter()
        .fold(0.0, |m, (a, b)| m.max(spectrum.get(a, b).norm()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ZeroModePolicy {
    /// Drop every mode with `|k̄| = 0` from the kernel sums.
    Exclude,
}

impl ZeroModePolicy {
    pub fn code(self) -> u8 {
        match self {
            ZeroModePolicy::Exclude => 0,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(ZeroModePolicy::Exclude),
            _ => None,
        }
    }
}

/// Real-space kernels `G(Δ) = N⁻² Σ' e^{-ik·Δ}/|k̄|` and
/// `D(Δ) = N⁻² Σ' e^{-ik·Δ}/|k̄|²`, indexed by `(Δi mod N, Δj mod N)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelTable {
    grid: GridSpec,
    g_values: Vec<f64>,
    d_values: Vec<f64>,
    policy: ZeroModePolicy,
}

impl KernelTable {
    pub fn build(grid: GridSpec) -> Result<Self> {
        let n = grid.n();
        let excluded = zero_modes(&grid).len();
        let expected = if n.is_multiple_of(2) { 4 } else { 1 };
        if excluded != expected {
            return Err(Error::KernelSymmetry(format!(
                "expected {expected} zero modes for N={n}, found {excluded}"
            )));
        }

        let g_hat =
            FourierField::from_fn(grid, |a, b| Complex64::new(g_spectrum(&grid, a, b), 0.0));
        let d_hat =
            FourierField::from_fn(grid, |a, b| Complex64::new(d_spectrum(&grid, a, b), 0.0));
        let g_values = kernel_from_spectrum(&grid, g_hat)?;
        let d_values = kernel_from_spectrum(&grid, d_hat)?;
        let table = Self {
            grid,
            g_values,
            d_values,
            policy: ZeroModePolicy::Exclude,
        };
        table.check_even()?;
        Ok(table)
    }

    pub fn build_shared(grid: GridSpec) -> Result<Arc<Self>> {
        Self::build(grid).map(Arc::new)
    }

    pub(crate) fn from_parts(
        grid: GridSpec,
        g_values: Vec<f64>,
        d_values: Vec<f64>,
        policy: ZeroModePolicy,
    ) -> Result<Self> {
        if g_values.len() != grid.n_sites() || d_values.len() != grid.n_sites() {
            return Err(Error::InvalidArgument("kernel table size mismatch".into()));
        }
        let table = Self {
            grid,
            g_values,
            d_values,
            policy,
        };
        table.check_even()?;
        Ok(table)
    }

    fn check_even(&self) -> Result<()> {
        let n = self.grid.n() as isize;
        for (name, vals) in [("G", &self.g_values), ("D", &self.d_values)] {
            let scale = vals.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1.0);
            for di in 0..n {
                for dj in 0..n {
                    let a = vals[self.grid.index(di, dj)];
                    let b = vals[self.grid.index(-di, -dj)];
                    if (a - b).abs() > 1e-10 * scale {
                        return Err(Error::KernelSymmetry(format!(
                            "{name}({di},{dj}) = {a} but {name}(-Δ) = {b}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn policy(&self) -> ZeroModePolicy {
        self.policy
    }

    #[inline]
    pub fn g(&self, di: isize, dj: isize) -> f64 {
        self.g_values[self.grid.index(di, dj)]
    }

    #[inline]
    pub fn d(&self, di: isize, dj: isize) -> f64 {
        self.d_values[self.grid.index(di, dj)]
    }

    pub fn g_values(&self) -> &[f64] {
        &self.g_values
    }

    pub fn d_values(&self) -> &[f64] {
        &self.d_values
    }
}

/// `1/|k̄|`, zero on excluded modes.
pub fn g_spectrum(grid: &GridSpec, alpha: usize, beta: usize) -> f64 {
    if is_zero_mode(grid, alpha, beta) {
        0.0
    } else {
        1.0 / wave_vector_unchecked(grid, alpha, beta).norm()
    }
}

/// `1/|k̄|²`, zero on excluded modes.
pub fn d_spectrum(grid: &GridSpec, alpha: usize, beta: usize) -> f64 {
    if is_zero_mode(grid, alpha, beta) {
        0.0
    } else {
        1.0 / wave_vector_unchecked(grid, alpha, beta).norm_sqr()
    }
}

fn kernel_from_spectrum(grid: &GridSpec, spectrum: FourierField) -> Result<Vec<f64>> {
    // N⁻² Σ_k s(k) e^{-ik·Δ} is a forward transform scaled by N⁻².
    let mut data = spectrum.modes;
    fft_2d(grid, &mut data, false);
    let scale = 1.0 / grid.n_sites() as f64;
    let magnitude = data.iter().fold(0.0_f64, |m, c| m.max(c.re.abs())) * scale;
    let residue = data.iter().fold(0.0_f64, |m, c| m.max(c.im.abs())) * scale;
    if residue > 1e-10 * magnitude.max(1.0) {
        return Err(Error::KernelSymmetry(format!(
            "kernel sum has imaginary residue {residue:e}"
        )));
    }
    Ok(data.into_iter().map(|c| c.re * scale).collect())
}

/// Applies `dbar_s` in Fourier space: multiplies by `i k̄_s`.
pub fn spectral_derivative(modes: &FourierField, dir: Direction) -> FourierField {
    let grid = *modes.grid();
    modes.multiply(|a, b| Complex64::new(0.0, wave_vector_unchecked(&grid, a, b).component(dir)))
}

/// Quadratic form `Σ_s Σ_{ij,nm} K(i-n, j-m) v_s[i,j] v_s[n,m]` evaluated as
/// `N⁻² Σ_k K̂(k) |ṽ_s(k)|²`.
pub fn kernel_quadratic_form(
    field: &VectorField,
    spectrum: impl Fn(&GridSpec, usize, usize) -> f64,
) -> f64 {
    let grid = *field.grid();
    let n = grid.n();
    let mut total = 0.0;
    for comp in [&field.x, &field.y] {
        let t = dft_forward(comp);
        for (k, m) in t.modes().iter().enumerate() {
            total += spectrum(&grid, k / n, k % n) * m.norm_sqr();
        }
    }
    total / grid.n_sites() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::dbar;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid(n: usize) -> GridSpec {
        GridSpec::new(n, 1.0).unwrap()
    }

    #[test]
    fn constant_field_has_only_the_zero_mode() {
        let t = dft_forward(&ScalarField::constant(grid(4), 1.0));
        assert!((t.get(0, 0) - Complex64::new(16.0, 0.0)).norm() < 1e-12);
        for a in 0..4 {
            for b in 0..4 {
                if (a, b) != (0, 0) {
                    assert!(t.get(a, b).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn delta_at_origin_is_flat_in_fourier_space() {
        let g = grid(5);
        let mut f = ScalarField::zeros(g);
        f.set(0, 0, 1.0);
        for m in dft_forward(&f).modes() {
            assert!((m - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn inverse_of_zero_mode_delta_is_constant() {
        let g = grid(6);
        let mut t = FourierField::zeros(g);
        t.set(0, 0, Complex64::new(36.0, 0.0));
        let f = dft_inverse(&t).unwrap();
        assert!(f.values().iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn round_trip_and_fast_path_match_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for n in [4, 5, 8, 9] {
            let f = ScalarField::random(grid(n), &mut rng);
            let fast = dft_forward(&f);
            let slow = dft_forward_direct(&f);
            for (x, y) in fast.modes().iter().zip(slow.modes()) {
                assert!((x - y).norm() < 1e-10 * slow.norm_inf());
            }
            let back = dft_inverse(&fast).unwrap();
            let back_direct = dft_inverse_direct(&slow).unwrap();
            assert!((&back - &f).norm_inf() < 1e-12 * f.norm_inf());
            assert!((&back_direct - &f).norm_inf() < 1e-12 * f.norm_inf());
            assert!(fast.conjugate_symmetry_defect() < 1e-10);
        }
    }

    #[test]
    fn non_conjugate_symmetric_modes_are_rejected() {
        let g = grid(5);
        let mut t = FourierField::zeros(g);
        t.set(1, 0, Complex64::new(1.0, 0.0));
        assert!(matches!(dft_inverse(&t), Err(Error::NonRealResult { .. })));
    }

    #[test]
    fn derivative_is_multiplication_by_i_kbar() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = GridSpec::new(8, 0.7).unwrap();
        let f = ScalarField::random(g, &mut rng);
        let ft = dft_forward(&f);
        for dir in Direction::BOTH {
            let lhs = dft_forward(&dbar(&f, dir));
            let rhs = spectral_derivative(&ft, dir);
            for (x, y) in lhs.modes().iter().zip(rhs.modes()) {
                assert!((x - y).norm() < 1e-11 * ft.norm_inf().max(1.0));
            }
        }
    }

    #[test]
    fn wave_vector_examples() {
        let g4 = grid(4);
        assert_eq!(wave_vector(&g4, 0, 0).unwrap().norm(), 0.0);
        let k = wave_vector(&g4, 1, 0).unwrap();
        assert_eq!((k.kx, k.ky), (0.0, 1.0));
        let k = wave_vector(&g4, 2, 0).unwrap();
        assert_eq!((k.kx, k.ky), (0.0, 0.0));
        let k = wave_vector(&grid(3), 1, 1).unwrap();
        let s = (2.0 * PI / 3.0).sin();
        assert_eq!((k.kx, k.ky), (s, s));
        assert!((k.norm() - 1.224_744_871_391_589).abs() < 1e-12);
        assert!(wave_vector(&g4, 4, 0).is_err());
    }

    #[test]
    fn zero_mode_counts() {
        assert_eq!(zero_modes(&grid(7)), vec![(0, 0)]);
        assert_eq!(zero_modes(&grid(8)), vec![(0, 0), (0, 4), (4, 0), (4, 4)]);
    }

    /// Enumerates the primed mode sum directly.
    fn kernel_by_enumeration(g: &GridSpec, di: isize, dj: isize, power: i32) -> f64 {
        let n = g.n();
        let mut acc = Complex64::new(0.0, 0.0);
        for a in 0..n {
            for b in 0..n {
                if is_zero_mode(g, a, b) {
                    continue;
                }
                let k = wave_vector(g, a, b).unwrap().norm();
                let phase = -2.0 * PI * (di as f64 * a as f64 + dj as f64 * b as f64) / n as f64;
                acc += Complex64::from_polar(1.0, phase) / k.powi(power);
            }
        }
        assert!(acc.im.abs() < 1e-10 * acc.re.abs().max(1.0));
        acc.re / (n * n) as f64
    }

    #[test]
    fn kernels_match_mode_enumeration() {
        for n in [3, 6, 7] {
            let g = GridSpec::new(n, 1.3).unwrap();
            let t = KernelTable::build(g).unwrap();
            for di in 0..n as isize {
                for dj in 0..n as isize {
                    assert!((t.g(di, dj) - kernel_by_enumeration(&g, di, dj, 1)).abs() < 1e-12);
                    assert!((t.d(di, dj) - kernel_by_enumeration(&g, di, dj, 2)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn g_origin_on_three_by_three() {
        // (1/9)(4/0.8660254 + 4/1.2247449), enumerated by hand
        let s = (2.0 * PI / 3.0).sin();
        let expected = (4.0 / s + 4.0 / (2.0_f64.sqrt() * s)) / 9.0;
        let t = KernelTable::build(grid(3)).unwrap();
        assert!((t.g(0, 0) - expected).abs() < 1e-12);
        assert!((t.g(0, 0) - 0.876_087_608_580_879).abs() < 1e-12);
    }

    #[test]
    fn kernels_are_even() {
        let t = KernelTable::build(grid(7)).unwrap();
        for di in -7..7 {
            for dj in -7..7 {
                assert!((t.g(di, dj) - t.g(-di, -dj)).abs() < 1e-11);
                assert!((t.d(di, dj) - t.d(-di, -dj)).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn d_axis_difference_on_101() {
        // Frozen from the dense mode sum; the odd/even sublattice structure of
        // the stencil makes this strongly negative (see continuum checks).
        let t = KernelTable::build(grid(101)).unwrap();
        let diff = t.d(0, 1) - t.d(0, 2);
        assert!((diff - (-2.243_451_065_611_086)).abs() < 1e-9, "{diff}");
        assert!((t.d(1, 0) - t.d(0, 1)).abs() < 1e-12);
    }

    #[test]
    fn zero_mode_projection_removes_mean_for_odd_n() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f = ScalarField::random(grid(7), &mut rng);
        let p = project_out_zero_modes(&f);
        let expected = f.map(|v| v - f.mean());
        assert!((&p - &expected).norm_inf() < 1e-13);
        assert!(zero_mode_content(&p) < 1e-12);
    }
}
