//! One qubit per site: occupation bitsets, superpositions over them and
//! the hopping ladder operator `a†_create a_annihilate`.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::{GridSpec, Region, ScalarField, Site};

const NORM_TOLERANCE: f64 = 1e-12;

/// Occupation pattern of an `N × N` lattice, one bit per site, row-major.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MatterConfig {
    side: usize,
    words: Vec<u64>,
}

impl MatterConfig {
    pub fn empty(side: usize) -> Self {
        Self {
            side,
            words: vec![0; (side * side).div_ceil(64)],
        }
    }

    pub fn from_sites(grid: &GridSpec, sites: &[Site]) -> Result<Self> {
        let mut cfg = Self::empty(grid.n());
        for &s in sites {
            if s.i >= grid.n() || s.j >= grid.n() {
                return Err(Error::InvalidMatter(format!("site {s} is off the grid")));
            }
            if cfg.is_occupied(s) {
                return Err(Error::InvalidMatter(format!("site {s} listed twice")));
            }
            cfg.set(s, true);
        }
        Ok(cfg)
    }

    pub fn side(&self) -> usize {
        self.side
    }

    fn bit(&self, s: Site) -> (usize, u64) {
        let k = s.i * self.side + s.j;
        (k / 64, 1u64 << (k % 64))
    }

    pub fn is_occupied(&self, s: Site) -> bool {
        let (w, m) = self.bit(s);
        self.words[w] & m != 0
    }

    fn set(&mut self, s: Site, on: bool) {
        let (w, m) = self.bit(s);
        if on {
            self.words[w] |= m;
        } else {
            self.words[w] &= !m;
        }
    }

    pub fn total_charge(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Occupied sites in row-major order.
    pub fn sites(&self) -> Vec<Site> {
        let mut out = Vec::with_capacity(self.total_charge());
        for (w, &word) in self.words.iter().enumerate() {
            let mut bits = word;
            while bits != 0 {
                let k = w * 64 + bits.trailing_zeros() as usize;
                out.push(Site::new(k / self.side, k % self.side));
                bits &= bits - 1;
            }
        }
        out
    }

    /// Eigenvalue field of `ρ̂`: 1 on occupied sites, 0 elsewhere.
    pub fn density(&self, grid: &GridSpec) -> Result<ScalarField> {
        if grid.n() != self.side {
            return Err(Error::GridMismatch(format!(
                "configuration is {0}x{0}, grid is {1}x{1}",
                self.side,
                grid.n()
            )));
        }
        let mut rho = ScalarField::zeros(*grid);
        for s in self.sites() {
            rho.set(s.i, s.j, 1.0);
        }
        Ok(rho)
    }

    /// `a†_create a_annihilate` on a basis configuration; `None` if the
    /// operator annihilates it.
    pub fn hop(&self, create_at: Site, annihilate_at: Site) -> Option<Self> {
        if !self.is_occupied(annihilate_at) || self.is_occupied(create_at) {
            return None;
        }
        let mut out = self.clone();
        out.set(annihilate_at, false);
        out.set(create_at, true);
        Some(out)
    }
}

impl fmt::Display for MatterConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sites: Vec<String> = self
            .sites()
            .iter()
            .map(|s| format!("{},{}", s.i, s.j))
            .collect();
        write!(f, "{}", sites.join(";"))
    }
}

/// How `apply_ladder` treats branches the operator annihilates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LadderMode {
    /// Drop them and renormalize the survivors.
    Renormalize,
    /// Fail on any dropped branch.
    Strict,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatterSuperposition {
    branches: BTreeMap<MatterConfig, Complex64>,
}

impl MatterSuperposition {
    pub fn new(branches: BTreeMap<MatterConfig, Complex64>) -> Result<Self> {
        let mut charges = branches.keys().map(MatterConfig::total_charge);
        let Some(first) = charges.next() else {
            return Err(Error::InvalidMatter("superposition has no branches".into()));
        };
        if charges.any(|c| c != first) {
            return Err(Error::InvalidMatter(
                "branches carry different total charge".into(),
            ));
        }
        let norm: f64 = branches.values().map(Complex64::norm_sqr).sum();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::InvalidMatter(format!(
                "squared norm is {norm}, not 1"
            )));
        }
        Ok(Self { branches })
    }

    pub fn basis(config: MatterConfig) -> Self {
        Self {
            branches: BTreeMap::from([(config, Complex64::new(1.0, 0.0))]),
        }
    }

    pub fn branches(&self) -> &BTreeMap<MatterConfig, Complex64> {
        &self.branches
    }

    pub fn total_charge(&self) -> usize {
        self.branches
            .keys()
            .next()
            .map_or(0, MatterConfig::total_charge)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.branches.values().map(Complex64::norm_sqr).sum()
    }
}

pub fn apply_ladder(
    state: &MatterSuperposition,
    create_at: Site,
    annihilate_at: Site,
    mode: LadderMode,
) -> Result<MatterSuperposition> {
    if create_at == annihilate_at {
        return Err(Error::InvalidMatter(format!(
            "ladder move from {annihilate_at} onto itself"
        )));
    }
    let mut out = BTreeMap::new();
    let mut dropped = 0;
    for (cfg, amp) in &state.branches {
        match cfg.hop(create_at, annihilate_at) {
            Some(next) => {
                out.insert(next, *amp);
            }
            None => dropped += 1,
        }
    }
    if out.is_empty() {
        return Err(Error::AnnihilatedState);
    }
    if dropped > 0 {
        if mode == LadderMode::Strict {
            return Err(Error::DroppedBranch { dropped });
        }
        let norm = out.values().map(Complex64::norm_sqr).sum::<f64>().sqrt();
        for amp in out.values_mut() {
            *amp /= norm;
        }
    }
    Ok(MatterSuperposition { branches: out })
}

/// All configurations with `n` charges, in lexicographic row-major order.
/// With `regions`, only those holding exactly one charge in each region.
pub fn enumerate_sector(
    grid: &GridSpec,
    n: usize,
    regions: Option<(&Region, &Region)>,
) -> Result<Vec<MatterConfig>> {
    let total = grid.n_sites();
    if n > total {
        return Err(Error::InvalidArgument(format!(
            "cannot place {n} charges on {total} sites"
        )));
    }
    let side = grid.n();
    let site_of = |k: usize| Site::new(k / side, k % side);
    let keep = |idx: &[usize]| match regions {
        None => true,
        Some((ra, rb)) => {
            let count = |r: &Region| idx.iter().filter(|&&k| r.contains(site_of(k))).count();
            count(ra) == 1 && count(rb) == 1
        }
    };

    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..n).collect();
    loop {
        if keep(&idx) {
            let sites: Vec<Site> = idx.iter().map(|&k| site_of(k)).collect();
            out.push(MatterConfig::from_sites(grid, &sites)?);
        }
        // next combination
        let Some(pos) = (0..n).rev().find(|&p| idx[p] < total - n + p) else {
            break;
        };
        idx[pos] += 1;
        for p in pos + 1..n {
            idx[p] = idx[p - 1] + 1;
        }
    }
    Ok(out)
}

/// Parses `"i,j;i,j;…"`.
pub fn parse_sites(text: &str) -> Result<Vec<Site>> {
    text.split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|pair| {
            let (i, j) = pair
                .split_once(',')
                .ok_or_else(|| Error::Parse(format!("expected `i,j`, got `{pair}`")))?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Parse(format!("bad coordinate `{s}` in `{pair}`")))
            };
            Ok(Site::new(parse(i)?, parse(j)?))
        })
        .collect()
}
