//! Classical temporal-gauge dynamics: Hamiltonian, equations of motion,
//! the sourced Gauss constraint and a kick-drift-kick leapfrog.

use crate::error::{Error, Result};
use crate::lattice::{curl_z, dbar, divergence, Direction, GridSpec, ScalarField, VectorField};
use crate::spectral::{project_out_zero_modes, wave_vector};

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpaceState {
    pub q: VectorField,
    pub p: VectorField,
    pub time: f64,
}

impl PhaseSpaceState {
    pub fn new(q: VectorField, p: VectorField) -> Result<Self> {
        q.grid().ensure_same(p.grid())?;
        Ok(Self { q, p, time: 0.0 })
    }

    pub fn vacuum(grid: GridSpec) -> Self {
        Self {
            q: VectorField::zeros(grid),
            p: VectorField::zeros(grid),
            time: 0.0,
        }
    }

    pub fn random(grid: GridSpec, rng: &mut impl rand::Rng) -> Self {
        Self {
            q: VectorField::random(grid, rng),
            p: VectorField::random(grid, rng),
            time: 0.0,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        self.q.grid()
    }

    pub fn magnetic(&self) -> ScalarField {
        curl_z(&self.q)
    }
}

/// Static charges and currents.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceConfig {
    pub rho: ScalarField,
    pub jx: ScalarField,
    pub jy: ScalarField,
}

impl SourceConfig {
    pub fn vacuum(grid: GridSpec) -> Self {
        Self {
            rho: ScalarField::zeros(grid),
            jx: ScalarField::zeros(grid),
            jy: ScalarField::zeros(grid),
        }
    }

    pub fn static_charges(rho: ScalarField) -> Self {
        let grid = *rho.grid();
        Self {
            rho,
            jx: ScalarField::zeros(grid),
            jy: ScalarField::zeros(grid),
        }
    }

    pub fn new(rho: ScalarField, jx: ScalarField, jy: ScalarField) -> Result<Self> {
        rho.grid().ensure_same(jx.grid())?;
        rho.grid().ensure_same(jy.grid())?;
        Ok(Self { rho, jx, jy })
    }

    pub fn grid(&self) -> &GridSpec {
        self.rho.grid()
    }

    pub fn is_static(&self) -> bool {
        self.jx
            .values()
            .iter()
            .chain(self.jy.values())
            .all(|&v| v == 0.0)
    }

    pub fn current(&self) -> VectorField {
        VectorField {
            x: self.jx.clone(),
            y: self.jy.clone(),
        }
    }

    /// `dbar_x Jx + dbar_y Jy + rho_dot`, with `rho_dot` supplied by the caller
    /// (zero for static charges).
    pub fn continuity_residual(&self, rho_dot: &ScalarField) -> Result<ScalarField> {
        self.grid().ensure_same(rho_dot.grid())?;
        Ok(&divergence(&self.current()) + rho_dot)
    }
}

/// `H = ½ Σ (p_x² + p_y² + b²) − Σ J·q`.
pub fn energy(state: &PhaseSpaceState, source: &SourceConfig) -> f64 {
    let b = state.magnetic();
    let kinetic = state.p.dot(&state.p);
    let magnetic = b.dot(&b);
    let coupling = source.jx.dot(&state.q.x) + source.jy.dot(&state.q.y);
    0.5 * (kinetic + magnetic) - coupling
}

/// Force on the momenta, `−∂H/∂q`.
pub fn force(q: &VectorField, source: &SourceConfig) -> VectorField {
    let b = curl_z(q);
    VectorField {
        x: &source.jx - &dbar(&b, Direction::Y),
        y: &dbar(&b, Direction::X) + &source.jy,
    }
}

pub fn eom_rhs(state: &PhaseSpaceState, source: &SourceConfig) -> (VectorField, VectorField) {
    (state.p.clone(), force(&state.q, source))
}

/// Energy exactly conserved by the kick-drift-kick map for a quadratic
/// Hamiltonian: `H − (dt²/8)|F|²`.
pub fn modified_energy(state: &PhaseSpaceState, source: &SourceConfig, dt: f64) -> f64 {
    let f = force(&state.q, source);
    energy(state, source) - dt * dt / 8.0 * f.dot(&f)
}

/// `C_ρ = div p + ρ`.
pub fn constraint_residual(state: &PhaseSpaceState, source: &SourceConfig) -> ScalarField {
    &divergence(&state.p) + &source.rho
}

/// Gauss residual with the `|k̄| = 0` content of ρ removed; the only part
/// of the constraint a periodic momentum field can satisfy.
pub fn physical_constraint_residual(p: &VectorField, rho: &ScalarField) -> ScalarField {
    &divergence(p) + &project_out_zero_modes(rho)
}

pub fn gauge_transform(state: &PhaseSpaceState, epsilon: &ScalarField) -> PhaseSpaceState {
    PhaseSpaceState {
        q: &state.q - &VectorField::gradient(epsilon),
        p: state.p.clone(),
        time: state.time,
    }
}

/// Angular frequency of the transverse mode `(alpha, beta)`.
pub fn mode_frequency(grid: &GridSpec, alpha: usize, beta: usize) -> Result<f64> {
    Ok(wave_vector(grid, alpha, beta)?.norm())
}

/// `0.1·a/√2`, a tenth of the inverse maximum mode frequency.
pub fn default_dt(grid: &GridSpec) -> f64 {
    0.1 * grid.a() / std::f64::consts::SQRT_2
}

const DRIFT_LIMIT: f64 = 0.01;

/// Kick-drift-kick integrator. The force at the end of one step is reused
/// as the opening kick of the next.
#[derive(Debug, Clone)]
pub struct Leapfrog<'s> {
    source: &'s SourceConfig,
    dt: f64,
}

impl<'s> Leapfrog<'s> {
    pub fn new(source: &'s SourceConfig, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "dt must be positive, got {dt}"
            )));
        }
        Ok(Self { source, dt })
    }

    /// Advances `n_steps`, calling `observe` after each step with the step
    /// index (1-based) and the current state.
    pub fn run(
        &self,
        state: &PhaseSpaceState,
        n_steps: usize,
        mut observe: impl FnMut(usize, &PhaseSpaceState),
    ) -> Result<PhaseSpaceState> {
        state.grid().ensure_same(self.source.grid())?;
        let dt = self.dt;
        let h0 = energy(state, self.source);
        let bound = DRIFT_LIMIT * h0.abs() + 1e-12;
        let mut s = state.clone();
        let mut f = force(&s.q, self.source);
        for step in 1..=n_steps {
            s.p = s.p.axpy(0.5 * dt, &f);
            s.q = s.q.axpy(dt, &s.p);
            f = force(&s.q, self.source);
            s.p = s.p.axpy(0.5 * dt, &f);
            s.time += dt;

            let h = energy(&s, self.source);
            if !h.is_finite() || (h - h0).abs() > bound {
                return Err(Error::UnstableStep {
                    step,
                    initial: h0,
                    current: h,
                });
            }
            observe(step, &s);
        }
        Ok(s)
    }
}

pub fn step_leapfrog(
    state: &PhaseSpaceState,
    source: &SourceConfig,
    dt: f64,
    n_steps: usize,
) -> Result<PhaseSpaceState> {
    Leapfrog::new(source, dt)?.run(state, n_steps, |_, _| {})
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded_rng;
    use crate::spectral::dft_forward;
    use num_complex::Complex64;

    fn grid(n: usize) -> GridSpec {
        GridSpec::new(n, 1.0).unwrap()
    }

    #[test]
    fn energy_of_zero_and_uniform_momentum() {
        let g = grid(4);
        let vac = SourceConfig::vacuum(g);
        assert_eq!(energy(&PhaseSpaceState::vacuum(g), &vac), 0.0);

        let mut s = PhaseSpaceState::vacuum(g);
        s.p.x = ScalarField::constant(g, 1.0);
        assert_eq!(energy(&s, &vac), 8.0);
    }

    fn spectral_energy(state: &PhaseSpaceState) -> f64 {
        let g = *state.grid();
        let n2 = g.n_sites() as f64;
        let px = dft_forward(&state.p.x);
        let py = dft_forward(&state.p.y);
        let qx = dft_forward(&state.q.x);
        let qy = dft_forward(&state.q.y);
        let mut total = 0.0;
        for alpha in 0..g.n() {
            for beta in 0..g.n() {
                let k = wave_vector(&g, alpha, beta).unwrap();
                let i = Complex64::i();
                let b = i * k.kx * qy.get(alpha, beta) - i * k.ky * qx.get(alpha, beta);
                total +=
                    px.get(alpha, beta).norm_sqr() + py.get(alpha, beta).norm_sqr() + b.norm_sqr();
            }
        }
        0.5 * total / n2
    }

    #[test]
    fn energy_matches_fourier_evaluation() {
        let mut rng = seeded_rng(3);
        for n in [5, 8, 13] {
            let s = PhaseSpaceState::random(grid(n), &mut rng);
            let h = energy(&s, &SourceConfig::vacuum(grid(n)));
            let oracle = spectral_energy(&s);
            assert!((h - oracle).abs() <= 1e-9 * oracle.abs(), "{h} vs {oracle}");
        }
    }

    #[test]
    fn pure_gauge_q_feels_no_force() {
        let mut rng = seeded_rng(4);
        let g = grid(7);
        let eps = ScalarField::random(g, &mut rng);
        let s = gauge_transform(&PhaseSpaceState::vacuum(g), &eps);
        let (_, dp) = eom_rhs(&s, &SourceConfig::vacuum(g));
        assert!(dp.norm_inf() < 1e-14);
    }

    #[test]
    fn b_dot_and_constraint_rate() {
        let mut rng = seeded_rng(5);
        let g = grid(9);
        let s = PhaseSpaceState::random(g, &mut rng);
        let (dq, dp) = eom_rhs(&s, &SourceConfig::vacuum(g));
        let b_dot = curl_z(&dq);
        let expected = &dbar(&s.p.y, Direction::X) - &dbar(&s.p.x, Direction::Y);
        assert_eq!(b_dot, expected);
        assert!(divergence(&dp).norm_inf() < 1e-14);
    }

    #[test]
    fn zero_state_stays_zero() {
        let g = grid(6);
        let out = step_leapfrog(
            &PhaseSpaceState::vacuum(g),
            &SourceConfig::vacuum(g),
            0.3,
            50,
        )
        .unwrap();
        assert_eq!(out.q.norm_inf(), 0.0);
        assert_eq!(out.p.norm_inf(), 0.0);
    }

    fn transverse_mode(g: GridSpec, alpha: usize, beta: usize) -> PhaseSpaceState {
        let k = wave_vector(&g, alpha, beta).unwrap();
        let n = g.n() as f64;
        let phase = |i: usize, j: usize| {
            (2.0 * std::f64::consts::PI * (i * alpha + j * beta) as f64 / n).cos()
        };
        let q = VectorField {
            x: ScalarField::from_fn(g, |i, j| -k.ky * phase(i, j)),
            y: ScalarField::from_fn(g, |i, j| k.kx * phase(i, j)),
        };
        PhaseSpaceState::new(q, VectorField::zeros(g)).unwrap()
    }

    #[test]
    fn single_mode_period() {
        let g = grid(16);
        let (alpha, beta) = (1, 2);
        let omega = mode_frequency(&g, alpha, beta).unwrap();
        let dt = 0.01 / omega;
        let s0 = transverse_mode(g, alpha, beta);
        let probe = |s: &PhaseSpaceState| s.q.y.get(0, 0);

        let src = SourceConfig::vacuum(g);
        let mut prev = probe(&s0);
        let mut crossings = Vec::new();
        Leapfrog::new(&src, dt)
            .unwrap()
            .run(&s0, 2000, |_, s| {
                let cur = probe(s);
                if prev < 0.0 && cur >= 0.0 {
                    crossings.push(s.time - dt * cur / (cur - prev));
                }
                prev = cur;
            })
            .unwrap();
        assert!(crossings.len() >= 2);
        let period = crossings[1] - crossings[0];
        let expected = 2.0 * std::f64::consts::PI / omega;
        assert!(
            (period - expected).abs() < 1e-3 * expected,
            "{period} vs {expected}"
        );
    }

    #[test]
    fn constraint_is_conserved_in_vacuum() {
        let mut rng = seeded_rng(6);
        let g = grid(12);
        let src = SourceConfig::vacuum(g);
        let s0 = PhaseSpaceState::random(g, &mut rng);
        let c0 = constraint_residual(&s0, &src);
        let s1 = step_leapfrog(&s0, &src, default_dt(&g), 2000).unwrap();
        let growth = (&constraint_residual(&s1, &src) - &c0).norm_inf();
        assert!(growth < 1e-9, "{growth}");
    }

    #[test]
    fn modified_energy_is_conserved_with_static_sources() {
        let mut rng = seeded_rng(7);
        let g = grid(10);
        let src = SourceConfig::new(
            ScalarField::random(g, &mut rng),
            ScalarField::random(g, &mut rng),
            ScalarField::random(g, &mut rng),
        )
        .unwrap();
        let dt = 0.05;
        let s0 = PhaseSpaceState::random(g, &mut rng);
        let m0 = modified_energy(&s0, &src, dt);
        let s1 = step_leapfrog(&s0, &src, dt, 500).unwrap();
        let m1 = modified_energy(&s1, &src, dt);
        assert!((m1 - m0).abs() < 1e-10 * m0.abs().max(1.0), "{m0} {m1}");
    }

    #[test]
    fn large_step_is_reported_unstable() {
        let mut rng = seeded_rng(8);
        let g = grid(8);
        let s0 = PhaseSpaceState::random(g, &mut rng);
        let err = step_leapfrog(&s0, &SourceConfig::vacuum(g), 2.5, 100).unwrap_err();
        assert!(matches!(err, Error::UnstableStep { .. }));
        assert!(step_leapfrog(&s0, &SourceConfig::vacuum(g), 0.0, 1).is_err());
    }

    #[test]
    fn gauge_transform_properties() {
        let mut rng = seeded_rng(9);
        let g = grid(7);
        let src = SourceConfig::static_charges(ScalarField::random_integers(g, -2, 2, &mut rng));
        let s = PhaseSpaceState::random(g, &mut rng);

        let c = ScalarField::constant(g, 3.7);
        assert_eq!(gauge_transform(&s, &c), s);

        let e1 = ScalarField::random(g, &mut rng);
        let e2 = ScalarField::random(g, &mut rng);
        let t = gauge_transform(&s, &e1);
        assert!((&curl_z(&t.q) - &curl_z(&s.q)).norm_inf() < 1e-11);
        let vac = SourceConfig::vacuum(g);
        assert!((energy(&t, &vac) - energy(&s, &vac)).abs() < 1e-11);
        assert_eq!(constraint_residual(&t, &src), constraint_residual(&s, &src));

        let composed = gauge_transform(&t, &e2);
        let once = gauge_transform(&s, &(&e1 + &e2));
        assert!(composed.q.max_abs_diff(&once.q) < 1e-15);
    }

    #[test]
    fn residual_definitions() {
        let mut rng = seeded_rng(10);
        let g = grid(5);
        let s = PhaseSpaceState::random(g, &mut rng);
        let vac = SourceConfig::vacuum(g);
        assert_eq!(constraint_residual(&s, &vac), divergence(&s.p));
        assert_eq!(
            constraint_residual(&PhaseSpaceState::vacuum(g), &vac).norm_inf(),
            0.0
        );
    }

    #[test]
    fn continuity_residual_for_static_charges() {
        let g = grid(5);
        let src = SourceConfig::static_charges(ScalarField::constant(g, 1.0));
        assert!(src.is_static());
        let r = src.continuity_residual(&ScalarField::zeros(g)).unwrap();
        assert_eq!(r.norm_inf(), 0.0);
    }
}
