//! Exact algebra of field-linear operators.
//!
//! An operator is `Σ α·q_s(i,j) + Σ β·p_s(i,j) + γ·𝟙` with rational
//! coefficients. Commutators of such operators are multiples of the
//! identity, so gauge invariance, generator sets and centers all reduce to
//! exact linear algebra over ℚ. Coefficients assume unit spacing (the
//! symmetric stencil contributes ½); physical spacing is applied when an
//! operator is evaluated on a classical field.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde_json::{json, Value};

use crate::lattice::{Direction, GridSpec, Region, ScalarField, Site, VectorField};

pub type Mode = (Site, Direction);

fn half() -> BigRational {
    BigRational::new(BigInt::from(1), BigInt::from(2))
}

#[cfg(test)]
fn rat(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

fn to_f64(r: &BigRational) -> f64 {
    use num_traits::ToPrimitive;
    r.to_f64().expect("rational fits in f64")
}

fn comp_name(d: Direction) -> &'static str {
    match d {
        Direction::X => "x",
        Direction::Y => "y",
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LinearOperator {
    q: BTreeMap<Mode, BigRational>,
    p: BTreeMap<Mode, BigRational>,
    scalar: BigRational,
}

fn accumulate(map: &mut BTreeMap<Mode, BigRational>, key: Mode, c: BigRational) {
    let entry = map.entry(key).or_insert_with(BigRational::zero);
    *entry += c;
    if entry.is_zero() {
        map.remove(&key);
    }
}

impl LinearOperator {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn q(site: Site, comp: Direction) -> Self {
        let mut op = Self::zero();
        op.q.insert((site, comp), BigRational::one());
        op
    }

    pub fn p(site: Site, comp: Direction) -> Self {
        let mut op = Self::zero();
        op.p.insert((site, comp), BigRational::one());
        op
    }

    pub fn identity(c: BigRational) -> Self {
        Self {
            scalar: c,
            ..Self::zero()
        }
    }

    /// `b̂ = ∂̄_x q_y − ∂̄_y q_x` at `site`.
    pub fn b_hat(grid: &GridSpec, site: Site) -> Self {
        let mut op = Self::zero();
        op.add_q(site.offset(grid, 0, 1), Direction::Y, half());
        op.add_q(site.offset(grid, 0, -1), Direction::Y, -half());
        op.add_q(site.offset(grid, 1, 0), Direction::X, -half());
        op.add_q(site.offset(grid, -1, 0), Direction::X, half());
        op
    }

    /// Field part of the Gauss constraint, `∂̄_x p_x + ∂̄_y p_y` at `site`.
    pub fn cross(grid: &GridSpec, site: Site) -> Self {
        let mut op = Self::zero();
        op.add_p(site.offset(grid, 0, 1), Direction::X, half());
        op.add_p(site.offset(grid, 0, -1), Direction::X, -half());
        op.add_p(site.offset(grid, 1, 0), Direction::Y, half());
        op.add_p(site.offset(grid, -1, 0), Direction::Y, -half());
        op
    }

    /// `Ĉ_ρ = ∂̄·p + ρ` at `site`, with the static charge as a scalar.
    pub fn constraint(grid: &GridSpec, site: Site, rho: BigRational) -> Self {
        let mut op = Self::cross(grid, site);
        op.scalar = rho;
        op
    }

    pub fn add_q(&mut self, site: Site, comp: Direction, c: BigRational) {
        accumulate(&mut self.q, (site, comp), c);
    }

    pub fn add_p(&mut self, site: Site, comp: Direction, c: BigRational) {
        accumulate(&mut self.p, (site, comp), c);
    }

    pub fn q_coeffs(&self) -> &BTreeMap<Mode, BigRational> {
        &self.q
    }

    pub fn p_coeffs(&self) -> &BTreeMap<Mode, BigRational> {
        &self.p
    }

    pub fn scalar(&self) -> &BigRational {
        &self.scalar
    }

    pub fn is_zero(&self) -> bool {
        self.q.is_empty() && self.p.is_empty() && self.scalar.is_zero()
    }

    pub fn support(&self) -> BTreeSet<Site> {
        self.q
            .keys()
            .chain(self.p.keys())
            .map(|(s, _)| *s)
            .collect()
    }

    /// `(min_i, min_j, max_i, max_j)` of the support, if any.
    pub fn bounding_box(&self) -> Option<(usize, usize, usize, usize)> {
        let sites = self.support();
        let first = sites.iter().next()?;
        Some(
            sites
                .iter()
                .fold((first.i, first.j, first.i, first.j), |(a, b, c, d), s| {
                    (a.min(s.i), b.min(s.j), c.max(s.i), d.max(s.j))
                }),
        )
    }

    pub fn scaled(&self, c: &BigRational) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        Self {
            q: self.q.iter().map(|(k, v)| (*k, v * c)).collect(),
            p: self.p.iter().map(|(k, v)| (*k, v * c)).collect(),
            scalar: &self.scalar * c,
        }
    }

    pub fn plus(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (k, v) in &other.q {
            accumulate(&mut out.q, *k, v.clone());
        }
        for (k, v) in &other.p {
            accumulate(&mut out.p, *k, v.clone());
        }
        out.scalar += &other.scalar;
        out
    }

    /// Restriction to the modes at sites inside `region` (scalar dropped).
    pub fn restricted(&self, region: &Region) -> Self {
        let keep = |m: &&Mode| region.contains(m.0);
        Self {
            q: self
                .q
                .iter()
                .filter(|(k, _)| keep(k))
                .map(|(k, v)| (*k, v.clone()))
                .collect(),
            p: self
                .p
                .iter()
                .filter(|(k, _)| keep(k))
                .map(|(k, v)| (*k, v.clone()))
                .collect(),
            scalar: BigRational::zero(),
        }
    }

    /// Value on a classical configuration. Coefficients are read in units of
    /// `1/a^power`, so stencil operators pass `power = 1`.
    pub fn evaluate(&self, q: Option<&VectorField>, p: &VectorField, power: i32) -> f64 {
        let a = p.grid().a();
        let side = |map: &BTreeMap<Mode, BigRational>, f: &VectorField| {
            map.iter()
                .map(|((s, d), c)| to_f64(c) * f.component(*d).at(*s))
                .sum::<f64>()
        };
        let mut total = side(&self.p, p);
        if let Some(q) = q {
            total += side(&self.q, q);
        }
        total / a.powi(power) + to_f64(&self.scalar)
    }
}

impl fmt::Display for LinearOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        let mut term = |f: &mut fmt::Formatter<'_>, c: &BigRational, name: String| {
            let sign = if c.is_negative() { "-" } else { "+" };
            let mag = c.abs();
            let body = if mag.is_one() && !name.is_empty() {
                name
            } else if name.is_empty() {
                mag.to_string()
            } else {
                format!("{mag} {name}")
            };
            let r = if first {
                let lead = if c.is_negative() { "-" } else { "" };
                write!(f, "{lead}{body}")
            } else {
                write!(f, " {sign} {body}")
            };
            first = false;
            r
        };
        for ((s, d), c) in &self.q {
            term(f, c, format!("q_{}{}", comp_name(*d), s))?;
        }
        for ((s, d), c) in &self.p {
            term(f, c, format!("p_{}{}", comp_name(*d), s))?;
        }
        if !self.scalar.is_zero() {
            term(f, &self.scalar, String::new())?;
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

/// `c` in `[lhs, rhs] = iħ c 𝟙`.
pub fn commutator_scalar(lhs: &LinearOperator, rhs: &LinearOperator) -> BigRational {
    let mut c = BigRational::zero();
    for (k, a) in &lhs.q {
        if let Some(b) = rhs.p.get(k) {
            c += a * b;
        }
    }
    for (k, a) in &lhs.p {
        if let Some(b) = rhs.q.get(k) {
            c -= a * b;
        }
    }
    c
}

/// Sites whose constraint cross can see a q at one of `sites`.
fn constraint_sites(grid: &GridSpec, sites: impl IntoIterator<Item = Site>) -> BTreeSet<Site> {
    let mut out = BTreeSet::new();
    for s in sites {
        for (di, dj) in [(0, 1), (0, -1), (1, 0), (-1, 0)] {
            out.insert(s.offset(grid, di, dj));
        }
    }
    out
}

pub fn is_gauge_invariant(op: &LinearOperator, grid: &GridSpec) -> bool {
    let sites = op.q.keys().map(|(s, _)| *s);
    constraint_sites(grid, sites)
        .into_iter()
        .all(|s| commutator_scalar(op, &LinearOperator::cross(grid, s)).is_zero())
}

// ---------------------------------------------------------------------------
// exact linear algebra

/// Reduced row echelon form in place; returns pivot columns in order.
pub fn rref(rows: &mut Vec<Vec<BigRational>>) -> Vec<usize> {
    let ncols = rows.first().map_or(0, Vec::len);
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..ncols {
        let Some(pivot) = (r..rows.len()).find(|&k| !rows[k][c].is_zero()) else {
            continue;
        };
        rows.swap(r, pivot);
        let inv = rows[r][c].recip();
        for v in rows[r].iter_mut() {
            *v *= &inv;
        }
        let pivot_row = rows[r].clone();
        for (k, row) in rows.iter_mut().enumerate() {
            if k == r || row[c].is_zero() {
                continue;
            }
            let f = row[c].clone();
            for (v, pv) in row.iter_mut().zip(&pivot_row) {
                if !pv.is_zero() {
                    *v -= &f * pv;
                }
            }
        }
        pivots.push(c);
        r += 1;
        if r == rows.len() {
            break;
        }
    }
    rows.truncate(r);
    pivots
}

pub fn rank(rows: &[Vec<BigRational>]) -> usize {
    let mut m = rows.to_vec();
    rref(&mut m).len()
}

/// Basis of `{x : A x = 0}` in reduced echelon form.
pub fn nullspace(rows: &[Vec<BigRational>], ncols: usize) -> Vec<Vec<BigRational>> {
    let mut m = rows.to_vec();
    let pivots = rref(&mut m);
    let pivot_set: BTreeSet<usize> = pivots.iter().copied().collect();
    let mut basis: Vec<Vec<BigRational>> = (0..ncols)
        .filter(|c| !pivot_set.contains(c))
        .map(|free| {
            let mut v = vec![BigRational::zero(); ncols];
            v[free] = BigRational::one();
            for (row, &pc) in m.iter().zip(&pivots) {
                v[pc] = -row[free].clone();
            }
            v
        })
        .collect();
    rref(&mut basis);
    basis
}

fn in_span(basis: &[Vec<BigRational>], v: &[BigRational]) -> bool {
    let mut m = basis.to_vec();
    let r = rank(&m);
    m.push(v.to_vec());
    rank(&m) == r
}

// ---------------------------------------------------------------------------
// supports and invariant nullspaces

/// Set of sites on which a pure-q ansatz may have coefficients.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Support {
    sites: BTreeSet<Site>,
}

impl Support {
    pub fn from_sites(sites: impl IntoIterator<Item = Site>) -> Self {
        Self {
            sites: sites.into_iter().collect(),
        }
    }

    /// Five-site plus shape around `center`.
    pub fn cross(grid: &GridSpec, center: Site) -> Self {
        Self::from_sites(
            [(0, 0), (0, 1), (0, -1), (1, 0), (-1, 0)]
                .into_iter()
                .map(|(di, dj)| center.offset(grid, di, dj)),
        )
    }

    pub fn sites(&self) -> &BTreeSet<Site> {
        &self.sites
    }

    pub fn modes(&self) -> Vec<Mode> {
        self.sites
            .iter()
            .flat_map(|s| Direction::BOTH.map(|d| (*s, d)))
            .collect()
    }
}

impl From<Region> for Support {
    fn from(region: Region) -> Self {
        Self::from_sites(region.sites())
    }
}

/// All gauge-invariant pure-q operators supported on `support`, as an
/// exact reduced-echelon basis ordered by pivot mode.
pub fn gauge_invariant_nullspace(support: &Support, grid: &GridSpec) -> Vec<LinearOperator> {
    let modes = support.modes();
    let rows: Vec<Vec<BigRational>> = constraint_sites(grid, support.sites.iter().copied())
        .into_iter()
        .map(|s| {
            let c = LinearOperator::cross(grid, s);
            modes
                .iter()
                .map(|m| c.p.get(m).cloned().unwrap_or_else(BigRational::zero))
                .collect()
        })
        .collect();
    nullspace(&rows, modes.len())
        .into_iter()
        .map(|v| {
            let mut op = LinearOperator::zero();
            for (m, c) in modes.iter().zip(v) {
                op.add_q(m.0, m.1, c);
            }
            op
        })
        .collect()
}

// ---------------------------------------------------------------------------
// local generators and centers

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeKind {
    /// Constraint cross of a boundary site with its outside arm removed.
    Truncated,
    /// Momentum component normal to the boundary at a boundary site.
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeneratorLabel {
    P { site: Site, comp: Direction },
    B { site: Site },
    Cross { site: Site },
    Edge { kind: EdgeKind, site: Site },
    Corner { site: Site, comp: Direction },
    Residual { index: usize },
}

impl GeneratorLabel {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::P { .. } => "P",
            Self::B { .. } => "B",
            Self::Cross { .. } => "CROSS",
            Self::Edge { .. } => "EDGE",
            Self::Corner { .. } => "CORNER",
            Self::Residual { .. } => "RESIDUAL",
        }
    }

    /// Whether the coefficients carry one stencil factor `1/(2a)`.
    fn stencil_power(&self) -> i32 {
        match self {
            Self::B { .. }
            | Self::Cross { .. }
            | Self::Edge {
                kind: EdgeKind::Truncated,
                ..
            } => 1,
            _ => 0,
        }
    }

    fn to_json(self) -> Value {
        let site = |s: Site| json!([s.i, s.j]);
        match self {
            Self::P { site: s, comp } | Self::Corner { site: s, comp } => {
                json!({"kind": self.kind(), "site": site(s), "comp": comp_name(comp)})
            }
            Self::B { site: s } | Self::Cross { site: s } => {
                json!({"kind": self.kind(), "site": site(s)})
            }
            Self::Edge { kind, site: s } => json!({
                "kind": "EDGE",
                "edge": match kind { EdgeKind::Truncated => "truncated", EdgeKind::Normal => "normal" },
                "site": site(s),
            }),
            Self::Residual { index } => json!({"kind": "RESIDUAL", "index": index}),
        }
    }
}

impl fmt::Display for GeneratorLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::P { site, comp } => write!(f, "P{site}{}", comp_name(*comp)),
            Self::B { site } => write!(f, "B{site}"),
            Self::Cross { site } => write!(f, "CROSS{site}"),
            Self::Edge {
                kind: EdgeKind::Truncated,
                site,
            } => write!(f, "EDGE(truncated){site}"),
            Self::Edge {
                kind: EdgeKind::Normal,
                site,
            } => write!(f, "EDGE(normal){site}"),
            Self::Corner { site, comp } => write!(f, "CORNER{site}{}", comp_name(*comp)),
            Self::Residual { index } => write!(f, "RESIDUAL#{index}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratorSet {
    pub generators: Vec<LinearOperator>,
    pub labels: Vec<GeneratorLabel>,
}

impl GeneratorSet {
    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&GeneratorLabel, &LinearOperator)> {
        self.labels.iter().zip(&self.generators)
    }

    pub fn count(&self, kind: &str) -> usize {
        self.labels.iter().filter(|l| l.kind() == kind).count()
    }

    /// Rank of the generators as vectors over the union of their modes.
    pub fn rank(&self) -> usize {
        let (rows, _) = coefficient_rows(&self.generators);
        rank(&rows)
    }

    pub fn contains_in_span(&self, op: &LinearOperator) -> bool {
        let mut all = self.generators.clone();
        all.push(op.clone());
        let (rows, _) = coefficient_rows(&all);
        let (basis, v) = rows.split_at(rows.len() - 1);
        in_span(basis, &v[0])
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (label, op) in self.iter() {
            out.push_str(&format!("{label}: {op}\n"));
        }
        out
    }

    pub fn to_json(&self, grid: &GridSpec, region: &Region) -> Value {
        let coeffs = |map: &BTreeMap<Mode, BigRational>| {
            map.iter()
                .map(|((s, d), c)| json!({"i": s.i, "j": s.j, "comp": comp_name(*d), "coeff": c.to_string()}))
                .collect::<Vec<_>>()
        };
        json!({
            "N": grid.n(),
            "a": grid.a(),
            "region": {"origin": [region.origin.i, region.origin.j], "size": region.size},
            "dimension": self.len(),
            "elements": self.iter().map(|(label, op)| json!({
                "label": label.to_json(),
                "q": coeffs(&op.q),
                "p": coeffs(&op.p),
            })).collect::<Vec<_>>(),
        })
    }
}

/// Coefficient vectors over the sorted union of q and p modes.
fn coefficient_rows(ops: &[LinearOperator]) -> (Vec<Vec<BigRational>>, Vec<(bool, Mode)>) {
    let cols: Vec<(bool, Mode)> = ops
        .iter()
        .flat_map(|op| {
            op.q.keys()
                .map(|m| (false, *m))
                .chain(op.p.keys().map(|m| (true, *m)))
        })
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let rows = ops
        .iter()
        .map(|op| {
            cols.iter()
                .map(|(is_p, m)| {
                    let map = if *is_p { &op.p } else { &op.q };
                    map.get(m).cloned().unwrap_or_else(BigRational::zero)
                })
                .collect()
        })
        .collect();
    (rows, cols)
}

fn b_fits(grid: &GridSpec, region: &Region, center: Site) -> bool {
    LinearOperator::b_hat(grid, center)
        .support()
        .iter()
        .all(|s| region.contains(*s))
        && region.contains(center)
}

/// Momenta at every site of the region (row-major, x before y), then every
/// `b̂` whose stencil lies in the region.
pub fn local_generators(region: &Region, grid: &GridSpec) -> GeneratorSet {
    let mut generators = Vec::new();
    let mut labels = Vec::new();
    for site in region.sites() {
        for comp in Direction::BOTH {
            generators.push(LinearOperator::p(site, comp));
            labels.push(GeneratorLabel::P { site, comp });
        }
    }
    for site in region.sites() {
        if b_fits(grid, region, site) {
            generators.push(LinearOperator::b_hat(grid, site));
            labels.push(GeneratorLabel::B { site });
        }
    }
    GeneratorSet { generators, labels }
}

fn boundary_normal(region: &Region, site: Site) -> Option<Direction> {
    let last = region.size - 1;
    let (ri, rj) = (site.i - region.origin.i, site.j - region.origin.j);
    let on_row = ri == 0 || ri == last;
    let on_col = rj == 0 || rj == last;
    match (on_row, on_col) {
        (true, false) => Some(Direction::Y),
        (false, true) => Some(Direction::X),
        _ => None,
    }
}

/// Exact basis of the center of the local algebra, expressed through a
/// catalog of named elements where possible: full crosses, truncated
/// crosses and normal momenta along the edges, corner momenta. Each
/// candidate is kept only if it lies in the center and raises the rank;
/// directions the catalog misses are appended as `Residual`.
pub fn center_basis(region: &Region, grid: &GridSpec) -> GeneratorSet {
    let gens = local_generators(region, grid);
    let k = gens.len();
    // Ω c = 0 with Ω_{lm} = [g_m, g_l].
    let omega: Vec<Vec<BigRational>> = gens
        .generators
        .iter()
        .map(|gl| {
            gens.generators
                .iter()
                .map(|gm| commutator_scalar(gm, gl))
                .collect()
        })
        .collect();
    let null = nullspace(&omega, k);
    let to_op = |c: &[BigRational]| {
        c.iter()
            .zip(&gens.generators)
            .fold(LinearOperator::zero(), |acc, (ci, g)| {
                acc.plus(&g.scaled(ci))
            })
    };
    let center_ops: Vec<LinearOperator> = null.iter().map(|c| to_op(c)).collect();
    let dim = center_ops.len();

    let is_central = |op: &LinearOperator| {
        gens.generators
            .iter()
            .all(|g| commutator_scalar(op, g).is_zero())
    };

    let mut candidates: Vec<(GeneratorLabel, LinearOperator)> = Vec::new();
    for site in region.sites() {
        if region.contains_strictly(site) {
            candidates.push((
                GeneratorLabel::Cross { site },
                LinearOperator::cross(grid, site),
            ));
        }
    }
    let ring: Vec<Site> = region
        .sites()
        .into_iter()
        .filter(|s| !region.contains_strictly(*s) && !region.is_corner(*s))
        .collect();
    for &site in &ring {
        let op = LinearOperator::cross(grid, site).restricted(region);
        candidates.push((
            GeneratorLabel::Edge {
                kind: EdgeKind::Truncated,
                site,
            },
            op,
        ));
    }
    for &site in &ring {
        if let Some(comp) = boundary_normal(region, site) {
            candidates.push((
                GeneratorLabel::Edge {
                    kind: EdgeKind::Normal,
                    site,
                },
                LinearOperator::p(site, comp),
            ));
        }
    }
    for site in region.sites().into_iter().filter(|s| region.is_corner(*s)) {
        for comp in Direction::BOTH {
            candidates.push((
                GeneratorLabel::Corner { site, comp },
                LinearOperator::p(site, comp),
            ));
        }
    }

    let mut chosen = GeneratorSet {
        generators: Vec::new(),
        labels: Vec::new(),
    };
    let mut current_rank = 0;
    let mut try_add = |chosen: &mut GeneratorSet, label, op: LinearOperator| {
        if chosen.len() == dim || op.is_zero() || !is_central(&op) {
            return;
        }
        chosen.generators.push(op);
        chosen.labels.push(label);
        let r = chosen.rank();
        if r > current_rank {
            current_rank = r;
        } else {
            chosen.generators.pop();
            chosen.labels.pop();
        }
    };
    for (label, op) in candidates {
        try_add(&mut chosen, label, op);
    }
    for (index, op) in center_ops.into_iter().enumerate() {
        try_add(&mut chosen, GeneratorLabel::Residual { index }, op);
    }
    debug_assert_eq!(chosen.len(), dim);
    chosen
}

/// Classical values of the center elements on a momentum configuration,
/// plus the sourced constraint `Ĉ_ρ` at every full cross.
#[derive(Debug, Clone, PartialEq)]
pub struct SectorLabels {
    pub labels: Vec<GeneratorLabel>,
    pub k: Vec<f64>,
    pub r: Vec<(Site, f64)>,
}

pub fn sector_label(
    p_field: &VectorField,
    region: &Region,
    rho: &ScalarField,
) -> crate::Result<SectorLabels> {
    let grid = *p_field.grid();
    grid.ensure_same(rho.grid())?;
    let center = center_basis(region, &grid);
    let mut k = Vec::with_capacity(center.len());
    let mut r = Vec::new();
    for (label, op) in center.iter() {
        let v = op.evaluate(None, p_field, label.stencil_power());
        if let GeneratorLabel::Cross { site } = label {
            r.push((*site, v + rho.at(*site)));
        }
        k.push(v);
    }
    Ok(SectorLabels {
        labels: center.labels,
        k,
        r,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{coulomb_momentum, point_charges};
    use crate::lattice::{curl_z, divergence};
    use crate::seeded_rng;
    use crate::spectral::{project_out_zero_modes, KernelTable};
    use proptest::prelude::*;

    fn grid(n: usize) -> GridSpec {
        GridSpec::new(n, 1.0).unwrap()
    }

    fn region(g: &GridSpec, i: usize, j: usize, m: usize) -> Region {
        Region::new(g, Site::new(i, j), m).unwrap()
    }

    #[test]
    fn canonical_commutators() {
        let s = Site::new(0, 0);
        let qx = LinearOperator::q(s, Direction::X);
        assert_eq!(
            commutator_scalar(&qx, &LinearOperator::p(s, Direction::X)),
            rat(1)
        );
        assert_eq!(
            commutator_scalar(&qx, &LinearOperator::p(s, Direction::Y)),
            rat(0)
        );
        assert_eq!(
            commutator_scalar(&LinearOperator::p(s, Direction::X), &qx),
            rat(-1)
        );
    }

    #[test]
    fn b_commutes_with_every_constraint() {
        let g = grid(7);
        for b in g.sites() {
            let bh = LinearOperator::b_hat(&g, b);
            for c in g.sites() {
                let ch = LinearOperator::constraint(&g, c, rat(3));
                assert!(commutator_scalar(&bh, &ch).is_zero());
            }
        }
    }

    #[test]
    fn gauge_invariance_examples() {
        let g = grid(7);
        let s = Site::new(3, 3);
        assert!(is_gauge_invariant(&LinearOperator::p(s, Direction::X), &g));
        assert!(!is_gauge_invariant(&LinearOperator::q(s, Direction::X), &g));
        for n in [5, 7, 9] {
            let g = grid(n);
            assert!(g
                .sites()
                .all(|s| is_gauge_invariant(&LinearOperator::b_hat(&g, s), &g)));
        }
    }

    #[test]
    fn b_hat_matches_curl_on_fields() {
        let g = GridSpec::new(6, 0.5).unwrap();
        let mut rng = seeded_rng(21);
        let q = VectorField::random(g, &mut rng);
        let b = curl_z(&q);
        let zero = VectorField::zeros(g);
        for s in g.sites() {
            let v = LinearOperator::b_hat(&g, s).evaluate(Some(&q), &zero, 1);
            assert!((v - b.at(s)).abs() < 1e-12);
        }
        let p = VectorField::random(g, &mut rng);
        let div = divergence(&p);
        for s in g.sites() {
            let v = LinearOperator::cross(&g, s).evaluate(None, &p, 1);
            assert!((v - div.at(s)).abs() < 1e-12);
        }
    }

    #[test]
    fn cross_support_nullspace_is_b() {
        let g = grid(9);
        let c = Site::new(4, 4);
        let null = gauge_invariant_nullspace(&Support::cross(&g, c), &g);
        assert_eq!(null.len(), 1);
        let b = LinearOperator::b_hat(&g, c);
        let set = GeneratorSet {
            generators: null.clone(),
            labels: vec![GeneratorLabel::Residual { index: 0 }],
        };
        assert!(set.contains_in_span(&b));
        assert!(is_gauge_invariant(&null[0], &g));
    }

    #[test]
    fn single_site_nullspace_is_empty() {
        let g = grid(9);
        let s = Support::from_sites([Site::new(2, 2)]);
        assert!(gauge_invariant_nullspace(&s, &g).is_empty());
    }

    #[test]
    fn square_support_nullspace_counts_inner_stencils() {
        let g = grid(11);
        let r = region(&g, 3, 3, 4);
        let null = gauge_invariant_nullspace(&Support::from(r), &g);
        assert_eq!(null.len(), 4);
        let set = GeneratorSet {
            labels: (0..null.len())
                .map(|index| GeneratorLabel::Residual { index })
                .collect(),
            generators: null,
        };
        for i in 4..6 {
            for j in 4..6 {
                assert!(set.contains_in_span(&LinearOperator::b_hat(&g, Site::new(i, j))));
            }
        }
    }

    #[test]
    fn four_stencils_through_a_site_are_found() {
        let g = grid(11);
        let s = Site::new(5, 5);
        let null = gauge_invariant_nullspace(&Support::from(region(&g, 3, 3, 5)), &g);
        let set = GeneratorSet {
            labels: (0..null.len())
                .map(|index| GeneratorLabel::Residual { index })
                .collect(),
            generators: null,
        };
        for (di, dj) in [(0, 1), (0, -1), (1, 0), (-1, 0)] {
            let b = LinearOperator::b_hat(&g, s.offset(&g, di, dj));
            assert!(b.support().contains(&s));
            assert!(set.contains_in_span(&b));
        }
    }

    #[test]
    fn generator_counts() {
        let g = grid(11);
        let m3 = local_generators(&region(&g, 2, 2, 3), &g);
        assert_eq!((m3.count("P"), m3.count("B")), (18, 1));
        let m5 = local_generators(&region(&g, 2, 2, 5), &g);
        assert_eq!((m5.count("P"), m5.count("B")), (50, 9));
        assert_eq!(m5.rank(), m5.len());
        assert!(m5.generators.iter().all(|op| is_gauge_invariant(op, &g)));
        assert_eq!(
            m5.labels[0],
            GeneratorLabel::P {
                site: Site::new(2, 2),
                comp: Direction::X
            }
        );
        assert_eq!(
            m5.labels[50],
            GeneratorLabel::B {
                site: Site::new(3, 3)
            }
        );
    }

    #[test]
    fn center_of_three_by_three() {
        let g = grid(9);
        let r = region(&g, 3, 3, 3);
        let center = center_basis(&r, &g);
        assert_eq!(center.len(), 17);
        assert_eq!(center.rank(), 17);
        assert_eq!(center.count("RESIDUAL"), 3);
    }

    #[test]
    fn center_of_five_by_five() {
        let g = grid(11);
        let r = region(&g, 3, 3, 5);
        let center = center_basis(&r, &g);
        let gens = local_generators(&r, &g);
        assert_eq!(center.len(), 41);
        assert_eq!(center.rank(), 41);
        for op in &center.generators {
            for gen in &gen_ops(&gens) {
                assert!(commutator_scalar(op, gen).is_zero());
            }
        }
        for site in r.sites().into_iter().filter(|s| r.contains_strictly(*s)) {
            assert!(center.contains_in_span(&LinearOperator::cross(&g, site)));
        }
        assert_eq!(center.count("CROSS"), 9);
    }

    fn gen_ops(set: &GeneratorSet) -> Vec<LinearOperator> {
        set.generators.clone()
    }

    #[test]
    fn separated_regions_commute() {
        let g = grid(13);
        let a = local_generators(&region(&g, 0, 0, 4), &g);
        let b = local_generators(&region(&g, 6, 6, 4), &g);
        for x in &a.generators {
            for y in &b.generators {
                assert!(commutator_scalar(x, y).is_zero());
            }
        }
    }

    #[test]
    fn vacuum_sector_labels_vanish() {
        let g = grid(9);
        let r = region(&g, 2, 2, 5);
        let s = sector_label(&VectorField::zeros(g), &r, &ScalarField::zeros(g)).unwrap();
        assert!(s.k.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn coulomb_field_labels() {
        let g = GridSpec::new(15, 0.5).unwrap();
        let kernels = KernelTable::build(g).unwrap();
        let rho = point_charges(g, &[(7, 7, 1.0)]).unwrap();
        let p = coulomb_momentum(&rho, &kernels).unwrap().p;
        let r = region(&g, 5, 5, 5);
        let labels = sector_label(&p, &r, &rho).unwrap();
        let projected = project_out_zero_modes(&rho);
        for ((label, v), (site, c)) in labels
            .labels
            .iter()
            .zip(&labels.k)
            .filter(|(l, _)| matches!(l, GeneratorLabel::Cross { .. }))
            .zip(&labels.r)
        {
            let GeneratorLabel::Cross { site: s } = label else {
                unreachable!()
            };
            assert_eq!(s, site);
            assert!((v + projected.at(*s)).abs() < 1e-9);
            assert!((c - (rho.at(*s) - projected.at(*s))).abs() < 1e-9);
        }
        for (label, v) in labels.labels.iter().zip(&labels.k) {
            if let GeneratorLabel::Edge {
                kind: EdgeKind::Normal,
                ..
            } = label
            {
                assert!(v.abs() > 1e-6);
            }
        }
    }

    #[test]
    fn labels_ignore_fields_outside_the_closure() {
        let g = grid(13);
        let mut rng = seeded_rng(22);
        let r = region(&g, 2, 2, 5);
        let p = VectorField::random(g, &mut rng);
        let mut other = p.clone();
        for s in g.sites() {
            if s.i >= 9 || s.j >= 9 {
                other.x.add_at(s, 1.0);
                other.y.add_at(s, -2.0);
            }
        }
        let rho = ScalarField::zeros(g);
        assert_eq!(
            sector_label(&p, &r, &rho).unwrap().k,
            sector_label(&other, &r, &rho).unwrap().k
        );
    }

    #[test]
    fn rref_nullspace_small() {
        let m = vec![vec![rat(1), rat(2), rat(3)], vec![rat(2), rat(4), rat(6)]];
        let null = nullspace(&m, 3);
        assert_eq!(null.len(), 2);
        for v in &null {
            let dot: BigRational = m[0].iter().zip(v).map(|(a, b)| a * b).sum();
            assert!(dot.is_zero());
        }
    }

    fn arb_op() -> impl Strategy<Value = LinearOperator> {
        let entry = (
            0usize..4,
            0usize..4,
            prop::bool::ANY,
            prop::bool::ANY,
            -5i64..=5,
        );
        prop::collection::vec(entry, 0..8).prop_map(|es| {
            let mut op = LinearOperator::zero();
            for (i, j, is_p, is_x, c) in es {
                let d = if is_x { Direction::X } else { Direction::Y };
                if is_p {
                    op.add_p(Site::new(i, j), d, rat(c));
                } else {
                    op.add_q(Site::new(i, j), d, rat(c));
                }
            }
            op
        })
    }

    proptest! {
        #[test]
        fn commutator_is_antisymmetric_and_bilinear(a in arb_op(), b in arb_op(), c in arb_op(), k in -4i64..4) {
            prop_assert_eq!(commutator_scalar(&a, &b), -commutator_scalar(&b, &a));
            let lhs = commutator_scalar(&a.scaled(&rat(k)).plus(&c), &b);
            let rhs = rat(k) * commutator_scalar(&a, &b) + commutator_scalar(&c, &b);
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn sparse_maps_hold_no_zeros(a in arb_op(), b in arb_op()) {
            let s = a.plus(&b).plus(&a.scaled(&rat(-1)));
            prop_assert!(s.q_coeffs().values().all(|v| !v.is_zero()));
            prop_assert!(s.p_coeffs().values().all(|v| !v.is_zero()));
            prop_assert_eq!(s, b.clone().plus(&LinearOperator::zero()));
        }
    }
}
