//! Field-mediated entanglement protocol.
//!
//! Two charges on one lattice row, each conditioned on its own spin, are
//! moved two sites left (↑) or right (↓) with a dressing that keeps Gauss's
//! law intact. Each of the four branches then relaxes to its ground state,
//! picks up the phase `−(E_ρ(s) − E₀)τ`, and is merged back. The spins
//! end up carrying all of the entanglement.

use std::f64::consts::LN_2;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::dynamics::physical_constraint_residual;
use crate::error::{Error, Result};
use crate::gaussian::{coulomb_energy_shift, wrap_phase, GaussianFieldState};
use crate::lattice::{Direction, GridSpec, Region, ScalarField, Site};
use crate::matter::{apply_ladder, LadderMode, MatterConfig, MatterSuperposition};
use crate::spectral::KernelTable;

/// Gauss residual allowed on any intermediate branch.
pub const GAUSS_TOLERANCE: f64 = 1e-9;
/// Allowed spread of matter/field data across branches at the end.
pub const SEPARABILITY_TOLERANCE: f64 = 1e-9;
const DENSITY_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Hop {
    Left,
    Right,
}

impl Hop {
    pub fn sign(self) -> isize {
        match self {
            Hop::Left => -1,
            Hop::Right => 1,
        }
    }

    pub fn reversed(self) -> Self {
        match self {
            Hop::Left => Hop::Right,
            Hop::Right => Hop::Left,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dressing {
    Applied,
    /// Bare matter hop; breaks Gauss's law. Diagnostic use only.
    Disabled,
}

/// Matter branch, fixed order LL, LR, RL, RR. The first letter is region A,
/// the second region B; spin ↑ moves left, ↓ moves right.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Branch {
    LL,
    LR,
    RL,
    RR,
}

impl Branch {
    pub const ALL: [Branch; 4] = [Branch::LL, Branch::LR, Branch::RL, Branch::RR];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn hops(self) -> (Hop, Hop) {
        match self {
            Branch::LL => (Hop::Left, Hop::Left),
            Branch::LR => (Hop::Left, Hop::Right),
            Branch::RL => (Hop::Right, Hop::Left),
            Branch::RR => (Hop::Right, Hop::Right),
        }
    }

    pub fn spin_label(self) -> &'static str {
        match self {
            Branch::LL => "↑↑",
            Branch::LR => "↑↓",
            Branch::RL => "↓↑",
            Branch::RR => "↓↓",
        }
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolSpec {
    pub grid: GridSpec,
    pub site_a: Site,
    pub site_b: Site,
    pub region_a: Region,
    pub region_b: Region,
    pub displacement: usize,
    pub tau: f64,
    /// Relaxation phases after the split, indexed by `Branch::index`.
    pub gamma: [f64; 4],
    /// Relaxation phases after the merge.
    pub gamma_prime: [f64; 4],
}

impl ProtocolSpec {
    pub fn new(
        grid: GridSpec,
        site_a: Site,
        site_b: Site,
        region_a: Region,
        region_b: Region,
    ) -> Result<Self> {
        let spec = Self {
            grid,
            site_a,
            site_b,
            region_a,
            region_b,
            displacement: 2,
            tau: 0.0,
            gamma: [0.0; 4],
            gamma_prime: [0.0; 4],
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Square regions of side `2·displacement + 3` centred on each charge.
    pub fn around_sites(grid: GridSpec, site_a: Site, site_b: Site) -> Result<Self> {
        let half = 3;
        let region = |s: Site| {
            if s.i < half || s.j < half {
                return Err(Error::InvalidProtocol(format!(
                    "site {s} too close to the grid edge"
                )));
            }
            Region::new(&grid, Site::new(s.i - half, s.j - half), 2 * half + 1)
                .map_err(|e| Error::InvalidProtocol(e.to_string()))
        };
        Self::new(grid, site_a, site_b, region(site_a)?, region(site_b)?)
    }

    pub fn with_tau(mut self, tau: f64) -> Result<Self> {
        self.tau = tau;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidProtocol(m));
        if self.displacement != 2 {
            return bad(format!("displacement must be 2, got {}", self.displacement));
        }
        if !(self.tau >= 0.0 && self.tau.is_finite()) {
            return bad(format!(
                "tau must be finite and non-negative, got {}",
                self.tau
            ));
        }
        if self
            .gamma
            .iter()
            .chain(&self.gamma_prime)
            .any(|g| !g.is_finite())
        {
            return bad("relaxation phases must be finite".into());
        }
        if self.site_a.i != self.site_b.i {
            return bad("both charges must sit on the same row".into());
        }
        if !self.region_a.is_disjoint(&self.region_b) {
            return bad("regions A and B overlap".into());
        }
        for (site, region, name) in [
            (self.site_a, &self.region_a, "A"),
            (self.site_b, &self.region_b, "B"),
        ] {
            for hop in [Hop::Left, Hop::Right] {
                let target = shifted(site, hop, self.displacement as isize);
                match target {
                    Some(t) if region.contains_strictly(t) => {}
                    _ => {
                        return bad(format!(
                            "moving {site} {hop:?} by two leaves the interior of region {name}"
                        ))
                    }
                }
            }
        }
        Ok(())
    }

    pub fn initial_config(&self) -> Result<MatterConfig> {
        MatterConfig::from_sites(&self.grid, &[self.site_a, self.site_b])
    }

    /// Matter configuration of a split branch.
    pub fn branch_config(&self, branch: Branch) -> Result<MatterConfig> {
        let (ha, hb) = branch.hops();
        let d = self.displacement as isize;
        let a = shifted(self.site_a, ha, d).expect("validated");
        let b = shifted(self.site_b, hb, d).expect("validated");
        MatterConfig::from_sites(&self.grid, &[a, b])
    }
}

fn shifted(site: Site, hop: Hop, by: isize) -> Option<Site> {
    let j = site.j as isize + hop.sign() * by;
    (j >= 0).then(|| Site::new(site.i, j as usize))
}

#[derive(Debug, Clone)]
pub struct BranchState {
    pub branch: Branch,
    pub matter: MatterConfig,
    pub field: GaussianFieldState,
}

impl BranchState {
    /// `½ e^{iθ}`, the amplitude of this branch in the normalized state.
    pub fn amplitude(&self) -> Complex64 {
        Complex64::from_polar(0.5, self.field.phase())
    }

    /// Sourced Gauss residual of the field shift against this branch's matter.
    pub fn gauss_residual(&self) -> Result<f64> {
        let rho = self.matter.density(self.field.grid())?;
        Ok(physical_constraint_residual(&self.field.shift, &rho).norm_inf())
    }
}

/// Moves the charge at `from` two sites along its row, dressing the field
/// on the intermediate link: `p_x` there shifts by `2a` times the hop sign.
pub fn dressed_move(
    branch: &BranchState,
    from: Site,
    hop: Hop,
    dressing: Dressing,
) -> Result<BranchState> {
    let grid = *branch.field.grid();
    let to = shifted(from, hop, 2)
        .filter(|t| t.j < grid.n())
        .ok_or_else(|| Error::InvalidProtocol(format!("move from {from} leaves the grid")))?;
    let link = shifted(from, hop, 1).expect("between two on-grid sites");

    let state = MatterSuperposition::basis(branch.matter.clone());
    let moved = apply_ladder(&state, to, from, LadderMode::Strict)?;
    let matter = moved.branches().keys().next().expect("one branch").clone();

    let field = match dressing {
        Dressing::Applied => {
            let mut delta = crate::lattice::VectorField::zeros(grid);
            delta
                .component_mut(Direction::X)
                .add_at(link, 2.0 * grid.a() * hop.sign() as f64);
            branch.field.displace(&delta)?
        }
        Dressing::Disabled => branch.field.clone(),
    };
    Ok(BranchState {
        branch: branch.branch,
        matter,
        field,
    })
}

#[derive(Debug, Clone)]
pub struct ProtocolTrace {
    pub spec: ProtocolSpec,
    /// Branch states after each step 0..=5, in `Branch::ALL` order.
    pub steps: Vec<Vec<BranchState>>,
    /// Largest sourced Gauss residual over the branches at each step.
    pub gauss_residuals: Vec<f64>,
    /// `E_ρ(s) − E₀` of each split configuration.
    pub energy_shifts: [f64; 4],
    /// `φ(s) = −(E_ρ(s) − E₀)τ`, unwrapped.
    pub phi: [f64; 4],
    /// `θ(s) = γ(s) + γ′(s) + φ(s)`, unwrapped.
    pub theta: [f64; 4],
    /// Spin amplitudes over ↑↑, ↑↓, ↓↑, ↓↓.
    pub final_spin: [Complex64; 4],
    pub h_sigma_a: f64,
    pub ent_increase: f64,
}

impl ProtocolTrace {
    /// Number of distinct matter/field pairs among the branches at `step`.
    pub fn distinct_branches(&self, step: usize, tol: f64) -> usize {
        let mut reps: Vec<&BranchState> = Vec::new();
        for b in &self.steps[step] {
            if !reps
                .iter()
                .any(|r| r.matter == b.matter && r.field.same_field(&b.field, tol))
            {
                reps.push(b);
            }
        }
        reps.len()
    }

    pub fn norm_sqr(&self, step: usize) -> f64 {
        self.steps[step]
            .iter()
            .map(|b| b.amplitude().norm_sqr())
            .sum()
    }
}

fn max_gauss_residual(branches: &[BranchState]) -> Result<f64> {
    branches
        .iter()
        .try_fold(0.0_f64, |m, b| Ok(m.max(b.gauss_residual()?)))
}

fn split(
    spec: &ProtocolSpec,
    branches: &[BranchState],
    dressing: Dressing,
) -> Result<Vec<BranchState>> {
    branches
        .iter()
        .map(|b| {
            let (ha, hb) = b.branch.hops();
            let s = dressed_move(b, spec.site_a, ha, dressing)?;
            dressed_move(&s, spec.site_b, hb, dressing)
        })
        .collect()
}

fn merge(
    spec: &ProtocolSpec,
    branches: &[BranchState],
    dressing: Dressing,
) -> Result<Vec<BranchState>> {
    let d = spec.displacement as isize;
    branches
        .iter()
        .map(|b| {
            let (ha, hb) = b.branch.hops();
            let from_a = shifted(spec.site_a, ha, d).expect("validated");
            let from_b = shifted(spec.site_b, hb, d).expect("validated");
            let s = dressed_move(b, from_a, ha.reversed(), dressing)?;
            dressed_move(&s, from_b, hb.reversed(), dressing)
        })
        .collect()
}

pub fn initial_branches(
    spec: &ProtocolSpec,
    kernels: &Arc<KernelTable>,
) -> Result<Vec<BranchState>> {
    kernels.grid().ensure_same(&spec.grid)?;
    let s0 = spec.initial_config()?;
    let field = GaussianFieldState::with_source(kernels.clone(), &s0.density(&spec.grid)?)?;
    Ok(Branch::ALL
        .iter()
        .map(|&branch| BranchState {
            branch,
            matter: s0.clone(),
            field: field.clone(),
        })
        .collect())
}

/// `E_LL + E_RR − E_LR − E_RL`; the spin phase imbalance is `−τ` times this.
pub fn phase_imbalance_rate(spec: &ProtocolSpec, kernels: &KernelTable) -> Result<f64> {
    let e = branch_energy_shifts(spec, kernels)?;
    Ok(e[0] + e[3] - e[1] - e[2])
}

pub fn branch_energy_shifts(spec: &ProtocolSpec, kernels: &KernelTable) -> Result<[f64; 4]> {
    let mut out = [0.0; 4];
    for b in Branch::ALL {
        let rho = spec.branch_config(b)?.density(&spec.grid)?;
        out[b.index()] = coulomb_energy_shift(&rho, kernels)?;
    }
    Ok(out)
}

/// Smallest τ at which the phase imbalance reaches π.
pub fn pi_imbalance_tau(spec: &ProtocolSpec, kernels: &KernelTable) -> Result<f64> {
    let rate = phase_imbalance_rate(spec, kernels)?;
    if rate == 0.0 {
        return Err(Error::InvalidProtocol("phase imbalance never grows".into()));
    }
    Ok(std::f64::consts::PI / rate.abs())
}

pub fn run_protocol(spec: &ProtocolSpec, kernels: &Arc<KernelTable>) -> Result<ProtocolTrace> {
    spec.validate()?;
    let grid = spec.grid;
    let s0 = spec.initial_config()?;
    let rho0 = s0.density(&grid)?;
    let mut steps = Vec::with_capacity(6);

    let step0 = initial_branches(spec, kernels)?;
    let step1 = split(spec, &step0, Dressing::Applied)?;

    let step2 = step1
        .iter()
        .map(|b| {
            let rho = b.matter.density(&grid)?;
            let field = GaussianFieldState::with_source(kernels.clone(), &rho)?
                .with_phase(b.field.phase() + spec.gamma[b.branch.index()]);
            Ok(BranchState { field, ..b.clone() })
        })
        .collect::<Result<Vec<_>>>()?;

    let energy_shifts = branch_energy_shifts(spec, kernels)?;
    let step3: Vec<BranchState> = step2
        .iter()
        .map(|b| BranchState {
            field: b
                .field
                .evolve_phase(energy_shifts[b.branch.index()], spec.tau),
            ..b.clone()
        })
        .collect();

    let step4 = merge(spec, &step3, Dressing::Applied)?;

    let mut step5 = Vec::with_capacity(4);
    for b in &step4 {
        if b.matter != s0 {
            return Err(Error::NotSeparable(format!(
                "branch {} ends in configuration {} instead of {}",
                b.branch, b.matter, s0
            )));
        }
        let residual = physical_constraint_residual(&b.field.shift, &rho0).norm_inf();
        if residual > SEPARABILITY_TOLERANCE {
            return Err(Error::NotSeparable(format!(
                "branch {} is left in a different field sector (Gauss residual {residual:e})",
                b.branch
            )));
        }
        let field = GaussianFieldState::with_source(kernels.clone(), &rho0)?
            .with_phase(b.field.phase() + spec.gamma_prime[b.branch.index()]);
        step5.push(BranchState { field, ..b.clone() });
    }
    let reference = &step5[0].field;
    if step5
        .iter()
        .any(|b| !b.field.same_field(reference, SEPARABILITY_TOLERANCE))
    {
        return Err(Error::NotSeparable(
            "final field states differ across branches".into(),
        ));
    }

    steps.extend([step0, step1, step2, step3, step4, step5]);
    let gauss_residuals = steps
        .iter()
        .map(|s| max_gauss_residual(s))
        .collect::<Result<Vec<_>>>()?;

    let mut phi = [0.0; 4];
    let mut theta = [0.0; 4];
    let mut final_spin = [Complex64::new(0.0, 0.0); 4];
    for b in Branch::ALL {
        let k = b.index();
        phi[k] = -energy_shifts[k] * spec.tau;
        theta[k] = spec.gamma[k] + spec.gamma_prime[k] + phi[k];
        final_spin[k] = steps[5][k].amplitude();
    }
    let h_sigma_a = vn_entropy(&reduced_spin_a(&final_spin))?;
    Ok(ProtocolTrace {
        spec: spec.clone(),
        steps,
        gauss_residuals,
        energy_shifts,
        phi,
        theta,
        final_spin,
        h_sigma_a,
        ent_increase: h_sigma_a,
    })
}

/// Entropy gained between the initial product state and the end of the
/// protocol. Matter and field coincide at both ends, so only the spins count.
pub fn entanglement_increase(trace: &ProtocolTrace) -> Result<f64> {
    let initial: Vec<Complex64> = trace.steps[0].iter().map(BranchState::amplitude).collect();
    let initial: [Complex64; 4] = initial.try_into().expect("four branches");
    let before = vn_entropy(&reduced_spin_a(&initial))?;
    Ok(vn_entropy(&reduced_spin_a(&trace.final_spin))? - before)
}

/// Partial trace over spin B of a two-spin pure state in the basis
/// ↑↑, ↑↓, ↓↑, ↓↓.
pub fn reduced_spin_a(psi: &[Complex64; 4]) -> DMatrix<Complex64> {
    DMatrix::from_fn(2, 2, |r, c| {
        (0..2).map(|b| psi[2 * r + b] * psi[2 * c + b].conj()).sum()
    })
}

/// `−Tr ρ ln ρ` in nats.
pub fn vn_entropy(rho: &DMatrix<Complex64>) -> Result<f64> {
    let n = rho.nrows();
    if n == 0 || rho.ncols() != n {
        return Err(Error::NotDensityMatrix(format!(
            "shape {}x{}",
            n,
            rho.ncols()
        )));
    }
    let herm = (rho - rho.adjoint())
        .iter()
        .fold(0.0_f64, |m, z| m.max(z.norm()));
    if herm > DENSITY_TOLERANCE {
        return Err(Error::NotDensityMatrix(format!(
            "not Hermitian (defect {herm:e})"
        )));
    }
    let trace = rho.trace();
    if (trace - Complex64::new(1.0, 0.0)).norm() > DENSITY_TOLERANCE {
        return Err(Error::NotDensityMatrix(format!("trace is {trace}")));
    }
    let eig = rho.clone().symmetric_eigenvalues();
    if let Some(min) = eig.iter().copied().reduce(f64::min) {
        if min < -DENSITY_TOLERANCE {
            return Err(Error::NotDensityMatrix(format!(
                "negative eigenvalue {min:e}"
            )));
        }
    }
    Ok(eig
        .iter()
        .filter(|&&l| l > 1e-15)
        .map(|&l| -l * l.ln())
        .sum::<f64>()
        + 0.0)
}

/// Entropy of spin A for `½ Σ_s e^{iθ(s)} |σ(s)⟩`: the reduced eigenvalues are
/// `½(1 ± |cos(Δ/2)|)` with `Δ = θ_LL + θ_RR − θ_LR − θ_RL`.
pub fn four_phase_entropy(theta: [f64; 4]) -> f64 {
    let delta = theta[0] + theta[3] - theta[1] - theta[2];
    let c = (0.5 * delta).cos().abs().min(1.0);
    let lam = [0.5 * (1.0 + c), 0.5 * (1.0 - c)];
    let h: f64 = lam.iter().filter(|&&l| l > 0.0).map(|&l| -l * l.ln()).sum();
    h.clamp(0.0, LN_2) + 0.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NullScope {
    Both,
    OnlyA,
    OnlyB,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NullTestReport {
    pub matter_equal: bool,
    pub max_shift_diff: f64,
    pub max_phase_diff: f64,
    pub spin_restored: bool,
}

impl NullTestReport {
    pub fn passed(&self) -> bool {
        self.matter_equal
            && self.max_shift_diff <= 1e-12
            && self.max_phase_diff <= 1e-12
            && self.spin_restored
    }
}

/// Split immediately followed by merge, with no relaxation or evolution in
/// between; the state must come back unchanged.
pub fn embezzlement_null_test(
    spec: &ProtocolSpec,
    kernels: &Arc<KernelTable>,
    scope: NullScope,
) -> Result<NullTestReport> {
    spec.validate()?;
    let step0 = initial_branches(spec, kernels)?;
    let d = spec.displacement as isize;
    let mut out = Vec::with_capacity(4);
    for b in &step0 {
        let (ha, hb) = b.branch.hops();
        let mut s = b.clone();
        if scope != NullScope::OnlyB {
            s = dressed_move(&s, spec.site_a, ha, Dressing::Applied)?;
        }
        if scope != NullScope::OnlyA {
            s = dressed_move(&s, spec.site_b, hb, Dressing::Applied)?;
        }
        if scope != NullScope::OnlyB {
            let from = shifted(spec.site_a, ha, d).expect("validated");
            s = dressed_move(&s, from, ha.reversed(), Dressing::Applied)?;
        }
        if scope != NullScope::OnlyA {
            let from = shifted(spec.site_b, hb, d).expect("validated");
            s = dressed_move(&s, from, hb.reversed(), Dressing::Applied)?;
        }
        out.push(s);
    }
    let matter_equal = out.iter().zip(&step0).all(|(x, y)| x.matter == y.matter);
    let max_shift_diff = out.iter().zip(&step0).fold(0.0_f64, |m, (x, y)| {
        m.max(x.field.shift.max_abs_diff(&y.field.shift))
    });
    let max_phase_diff = out.iter().zip(&step0).fold(0.0_f64, |m, (x, y)| {
        m.max(wrap_phase(x.field.phase() - y.field.phase()).abs())
    });
    let plus = Complex64::new(0.5, 0.0);
    let spin_restored = out.iter().all(|b| (b.amplitude() - plus).norm() <= 1e-12);
    Ok(NullTestReport {
        matter_equal,
        max_shift_diff,
        max_phase_diff,
        spin_restored,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub tau: f64,
    pub phi: [f64; 4],
    pub entropy: f64,
}

pub fn sweep_tau(
    spec: &ProtocolSpec,
    kernels: &Arc<KernelTable>,
    taus: &[f64],
) -> Result<Vec<SweepRow>> {
    taus.iter()
        .map(|&tau| {
            let trace = run_protocol(&spec.clone().with_tau(tau)?, kernels)?;
            Ok(SweepRow {
                tau,
                phi: trace.phi,
                entropy: trace.h_sigma_a,
            })
        })
        .collect()
}

/// Gauss residual left by a bare matter hop at the two crosses it touches.
pub fn undressed_residual(branch: &BranchState, from: Site, hop: Hop) -> Result<ScalarField> {
    let moved = dressed_move(branch, from, hop, Dressing::Disabled)?;
    let rho = moved.matter.density(moved.field.grid())?;
    Ok(physical_constraint_residual(&moved.field.shift, &rho))
}
