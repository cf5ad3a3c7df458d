//! Periodic N×N grid geometry, field containers and the symmetric discrete
//! calculus.
//!
//! Index convention: `i` is the row (y, increasing "up"), `j` is the column
//! (x). Every site index is reduced modulo N in both directions.

use std::ops::{Add, Mul, Neg, Sub};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    n: usize,
    a: f64,
}

impl GridSpec {
    pub fn new(n: usize, a: f64) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidGrid(format!(
                "N must be at least 3 (got {n})"
            )));
        }
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "spacing must be a positive finite number (got {a})"
            )));
        }
        Ok(Self { n, a })
    }

    /// Number of sites per side.
    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Lattice spacing.
    #[inline]
    pub fn a(&self) -> f64 {
        self.a
    }

    #[inline]
    pub fn n_sites(&self) -> usize {
        self.n * self.n
    }

    #[inline]
    pub fn wrap(&self, k: isize) -> usize {
        k.rem_euclid(self.n as isize) as usize
    }

    /// Row-major flat index of a (possibly out-of-range) site.
    #[inline]
    pub fn index(&self, i: isize, j: isize) -> usize {
        self.wrap(i) * self.n + self.wrap(j)
    }

    pub fn sites(&self) -> impl Iterator<Item = Site> + '_ {
        (0..self.n).flat_map(move |i| (0..self.n).map(move |j| Site::new(i, j)))
    }

    pub fn ensure_same(&self, other: &GridSpec) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "N={} a={} vs N={} a={}",
                self.n, self.a, other.n, other.a
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Site {
    pub i: usize,
    pub j: usize,
}

impl Site {
    pub const fn new(i: usize, j: usize) -> Self {
        Self { i, j }
    }

    /// Neighbour at offset `(di, dj)`, wrapped onto the grid.
    pub fn offset(&self, grid: &GridSpec, di: isize, dj: isize) -> Site {
        Site::new(
            grid.wrap(self.i as isize + di),
            grid.wrap(self.j as isize + dj),
        )
    }
}

impl std::fmt::Display for Site {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{})", self.i, self.j)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Direction {
    X,
    Y,
}

impl Direction {
    pub const BOTH: [Direction; 2] = [Direction::X, Direction::Y];

    /// Unit step `(di, dj)` along this direction.
    pub fn step(self) -> (isize, isize) {
        match self {
            Direction::X => (0, 1),
            Direction::Y => (1, 0),
        }
    }
}

/// Square block of sites `[origin.i, origin.i+size) × [origin.j, origin.j+size)`.
/// Regions never wrap around the periodic boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Region {
    pub origin: Site,
    pub size: usize,
}

impl Region {
    pub fn new(grid: &GridSpec, origin: Site, size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::InvalidArgument(
                "region size must be positive".into(),
            ));
        }
        if origin.i + size > grid.n() || origin.j + size > grid.n() {
            return Err(Error::InvalidArgument(format!(
                "region at {origin} of size {size} does not fit an N={} grid",
                grid.n()
            )));
        }
        Ok(Self { origin, size })
    }

    pub fn contains(&self, site: Site) -> bool {
        site.i >= self.origin.i
            && site.i < self.origin.i + self.size
            && site.j >= self.origin.j
            && site.j < self.origin.j + self.size
    }

    /// Inside and not on the boundary ring.
    pub fn contains_strictly(&self, site: Site) -> bool {
        site.i > self.origin.i
            && site.i + 1 < self.origin.i + self.size
            && site.j > self.origin.j
            && site.j + 1 < self.origin.j + self.size
    }

    pub fn is_corner(&self, site: Site) -> bool {
        let last_i = self.origin.i + self.size - 1;
        let last_j = self.origin.j + self.size - 1;
        (site.i == self.origin.i || site.i == last_i)
            && (site.j == self.origin.j || site.j == last_j)
    }

    /// Row-major list of the sites in the region.
    pub fn sites(&self) -> Vec<Site> {
        let mut out = Vec::with_capacity(self.size * self.size);
        for i in self.origin.i..self.origin.i + self.size {
            for j in self.origin.j..self.origin.j + self.size {
                out.push(Site::new(i, j));
            }
        }
        out
    }

    pub fn is_disjoint(&self, other: &Region) -> bool {
        let rows = self.origin.i + self.size <= other.origin.i
            || other.origin.i + other.size <= self.origin.i;
        let cols = self.origin.j + self.size <= other.origin.j
            || other.origin.j + other.size <= self.origin.j;
        rows || cols
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarField {
    grid: GridSpec,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.n_sites()],
        }
    }

    pub fn constant(grid: GridSpec, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.n_sites()],
        }
    }

    pub fn from_fn(grid: GridSpec, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let n = grid.n();
        let mut values = Vec::with_capacity(grid.n_sites());
        for i in 0..n {
            for j in 0..n {
                values.push(f(i, j));
            }
        }
        Self { grid, values }
    }

    pub fn from_values(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_sites() {
            return Err(Error::InvalidArgument(format!(
                "expected {} values, got {}",
                grid.n_sites(),
                values.len()
            )));
        }
        Ok(Self { grid, values })
    }

    /// Independent uniform entries in `[-1, 1)`.
    pub fn random(grid: GridSpec, rng: &mut impl Rng) -> Self {
        Self::from_fn(grid, |_, _| rng.gen_range(-1.0..1.0))
    }

    /// Independent integer entries in `[lo, hi]`.
    pub fn random_integers(grid: GridSpec, lo: i64, hi: i64, rng: &mut impl Rng) -> Self {
        Self::from_fn(grid, |_, _| rng.gen_range(lo..=hi) as f64)
    }

    #[inline]
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.grid.n() + j]
    }

    #[inline]
    pub fn at(&self, site: Site) -> f64 {
        self.get(site.i, site.j)
    }

    #[inline]
    pub fn get_wrapped(&self, i: isize, j: isize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let n = self.grid.n();
        self.values[i * n + j] = v;
    }

    pub fn add_at(&mut self, site: Site, v: f64) {
        let n = self.grid.n();
        self.values[site.i * n + site.j] += v;
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&x, &y)| f(x, y))
                .collect(),
        }
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.values.len() as f64
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| x * y)
            .sum()
    }

    pub fn norm_inf(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn norm_l2(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Field evaluated at the inverted site `(-i, -j)`.
    pub fn inverted(&self) -> Self {
        Self::from_fn(self.grid, |i, j| {
            self.get_wrapped(-(i as isize), -(j as isize))
        })
    }

    /// Field translated so that `out[i,j] = self[i-di, j-dj]`.
    pub fn translated(&self, di: isize, dj: isize) -> Self {
        Self::from_fn(self.grid, |i, j| {
            self.get_wrapped(i as isize - di, j as isize - dj)
        })
    }
}

impl Add for &ScalarField {
    type Output = ScalarField;
    fn add(self, rhs: &ScalarField) -> ScalarField {
        self.zip_with(rhs, |x, y| x + y)
    }
}

impl Sub for &ScalarField {
    type Output = ScalarField;
    fn sub(self, rhs: &ScalarField) -> ScalarField {
        self.zip_with(rhs, |x, y| x - y)
    }
}

impl Neg for &ScalarField {
    type Output = ScalarField;
    fn neg(self) -> ScalarField {
        self.map(|x| -x)
    }
}

impl Mul<f64> for &ScalarField {
    type Output = ScalarField;
    fn mul(self, rhs: f64) -> ScalarField {
        self.map(|x| x * rhs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorField {
    pub x: ScalarField,
    pub y: ScalarField,
}

impl VectorField {
    pub fn new(x: ScalarField, y: ScalarField) -> Result<Self> {
        x.grid().ensure_same(y.grid())?;
        Ok(Self { x, y })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            x: ScalarField::zeros(grid),
            y: ScalarField::zeros(grid),
        }
    }

    pub fn random(grid: GridSpec, rng: &mut impl Rng) -> Self {
        Self {
            x: ScalarField::random(grid, rng),
            y: ScalarField::random(grid, rng),
        }
    }

    /// Gradient-type field `(dbar_x f, dbar_y f)`.
    pub fn gradient(f: &ScalarField) -> Self {
        Self {
            x: dbar(f, Direction::X),
            y: dbar(f, Direction::Y),
        }
    }

    #[inline]
    pub fn grid(&self) -> &GridSpec {
        self.x.grid()
    }

    pub fn component(&self, dir: Direction) -> &ScalarField {
        match dir {
            Direction::X => &self.x,
            Direction::Y => &self.y,
        }
    }

    pub fn component_mut(&mut self, dir: Direction) -> &mut ScalarField {
        match dir {
            Direction::X => &mut self.x,
            Direction::Y => &mut self.y,
        }
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.x.dot(&other.x) + self.y.dot(&other.y)
    }

    pub fn norm_inf(&self) -> f64 {
        self.x.norm_inf().max(self.y.norm_inf())
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            x: &self.x * c,
            y: &self.y * c,
        }
    }

    /// `self + c * other`.
    pub fn axpy(&self, c: f64, other: &Self) -> Self {
        Self {
            x: self.x.zip_with(&other.x, |u, v| u + c * v),
            y: self.y.zip_with(&other.y, |u, v| u + c * v),
        }
    }

    /// Largest absolute componentwise difference.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (&self.x - &other.x)
            .norm_inf()
            .max((&self.y - &other.y).norm_inf())
    }
}

impl Add for &VectorField {
    type Output = VectorField;
    fn add(self, rhs: &VectorField) -> VectorField {
        VectorField {
            x: &self.x + &rhs.x,
            y: &self.y + &rhs.y,
        }
    }
}

impl Sub for &VectorField {
    type Output = VectorField;
    fn sub(self, rhs: &VectorField) -> VectorField {
        VectorField {
            x: &self.x - &rhs.x,
            y: &self.y - &rhs.y,
        }
    }
}

impl Neg for &VectorField {
    type Output = VectorField;
    fn neg(self) -> VectorField {
        VectorField {
            x: -&self.x,
            y: -&self.y,
        }
    }
}

/// Symmetric discrete derivative `(f[+1] - f[-1]) / 2a` along `dir`.
pub fn dbar(field: &ScalarField, dir: Direction) -> ScalarField {
    let grid = *field.grid();
    let n = grid.n();
    let inv = 1.0 / (2.0 * grid.a());
    let v = field.values();
    let mut out = Vec::with_capacity(n * n);
    match dir {
        Direction::X => {
            for i in 0..n {
                let row = &v[i * n..(i + 1) * n];
                for j in 0..n {
                    let plus = row[if j + 1 == n { 0 } else { j + 1 }];
                    let minus = row[if j == 0 { n - 1 } else { j - 1 }];
                    out.push((plus - minus) * inv);
                }
            }
        }
        Direction::Y => {
            for i in 0..n {
                let up = if i + 1 == n { 0 } else { i + 1 };
                let down = if i == 0 { n - 1 } else { i - 1 };
                for j in 0..n {
                    out.push((v[up * n + j] - v[down * n + j]) * inv);
                }
            }
        }
    }
    ScalarField { grid, values: out }
}

/// Discrete magnetic field `b = dbar_x q_y - dbar_y q_x`.
pub fn curl_z(field: &VectorField) -> ScalarField {
    &dbar(&field.y, Direction::X) - &dbar(&field.x, Direction::Y)
}

pub fn divergence(field: &VectorField) -> ScalarField {
    &dbar(&field.x, Direction::X) + &dbar(&field.y, Direction::Y)
}

/// `dbar_x dbar_x f + dbar_y dbar_y f` (the wide five-point Laplacian that
/// the symmetric stencil induces).
pub fn laplacian(field: &ScalarField) -> ScalarField {
    divergence(&VectorField::gradient(field))
}

/// `Σ g·dbar(f) + f·dbar(g)`, which vanishes on a periodic grid
/// (discrete integration by parts).
pub fn sum_by_parts_residual(f: &ScalarField, g: &ScalarField, dir: Direction) -> Result<f64> {
    f.grid().ensure_same(g.grid())?;
    Ok(g.dot(&dbar(f, dir)) + f.dot(&dbar(g, dir)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid(n: usize) -> GridSpec {
        GridSpec::new(n, 1.0).unwrap()
    }

    #[test]
    fn grid_rejects_small_n_and_bad_spacing() {
        assert!(GridSpec::new(2, 1.0).is_err());
        assert!(GridSpec::new(3, 0.0).is_err());
        assert!(GridSpec::new(3, f64::NAN).is_err());
        assert!(GridSpec::new(3, 0.5).is_ok());
    }

    #[test]
    fn dbar_of_constant_is_zero() {
        let f = ScalarField::constant(grid(6), 3.25);
        assert_eq!(dbar(&f, Direction::X).norm_inf(), 0.0);
        assert_eq!(dbar(&f, Direction::Y).norm_inf(), 0.0);
    }

    #[test]
    fn dbar_x_of_column_ramp_wraps() {
        let g = grid(5);
        let f = ScalarField::from_fn(g, |_, j| j as f64);
        let d = dbar(&f, Direction::X);
        for i in 0..5 {
            for j in 0..5 {
                let expected = if j == 0 || j == 4 { -1.5 } else { 1.0 };
                assert_eq!(d.get(i, j), expected, "site ({i},{j})");
            }
        }
        // the y-derivative of a column ramp vanishes
        assert_eq!(dbar(&f, Direction::Y).norm_inf(), 0.0);
    }

    #[test]
    fn partial_derivatives_commute() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let f = ScalarField::random(grid(7), &mut rng);
        let xy = dbar(&dbar(&f, Direction::Y), Direction::X);
        let yx = dbar(&dbar(&f, Direction::X), Direction::Y);
        assert!((&xy - &yx).norm_inf() < 1e-15);
    }

    #[test]
    fn curl_of_pure_gauge_vanishes() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let eps = ScalarField::random(grid(8), &mut rng);
        let q = -&VectorField::gradient(&eps);
        assert!(curl_z(&q).norm_inf() < 1e-15);
        assert_eq!(curl_z(&VectorField::zeros(grid(4))).norm_inf(), 0.0);
    }

    #[test]
    fn curl_of_ramp_matches_stencil() {
        let g = grid(5);
        let q = VectorField::new(
            ScalarField::zeros(g),
            ScalarField::from_fn(g, |_, j| j as f64),
        )
        .unwrap();
        let b = curl_z(&q);
        for i in 0..5 {
            for j in 0..5 {
                let jp = (j + 1) % 5;
                let jm = (j + 4) % 5;
                let expected = (jp as f64 - jm as f64) / 2.0;
                assert_eq!(b.get(i, j), expected);
            }
        }
    }

    #[test]
    fn divergence_cases() {
        let g = grid(9);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = ScalarField::random(g, &mut rng);
        let grad = VectorField::gradient(&s);
        let twice = &dbar(&dbar(&s, Direction::X), Direction::X)
            + &dbar(&dbar(&s, Direction::Y), Direction::Y);
        assert!((&divergence(&grad) - &twice).norm_inf() < 1e-15);

        let curl_like = VectorField::new(dbar(&s, Direction::Y), -&dbar(&s, Direction::X)).unwrap();
        assert!(divergence(&curl_like).norm_inf() < 1e-15);
        assert_eq!(divergence(&VectorField::zeros(g)).norm_inf(), 0.0);
    }

    #[test]
    fn summation_by_parts() {
        let g = grid(9);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = ScalarField::random(g, &mut rng);
        let h = ScalarField::random(g, &mut rng);
        let one = ScalarField::constant(g, 1.0);
        for dir in Direction::BOTH {
            assert!(sum_by_parts_residual(&f, &one, dir).unwrap().abs() < 1e-13);
            assert!(sum_by_parts_residual(&f, &f, dir).unwrap().abs() < 1e-13);
            let r = sum_by_parts_residual(&f, &h, dir).unwrap();
            assert!(r.abs() < 1e-12 * f.norm_l2() * h.norm_l2());
        }
    }

    #[test]
    fn sum_by_parts_rejects_mismatched_grids() {
        let f = ScalarField::zeros(grid(5));
        let h = ScalarField::zeros(grid(6));
        assert!(matches!(
            sum_by_parts_residual(&f, &h, Direction::X),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn region_geometry() {
        let g = grid(11);
        let r = Region::new(&g, Site::new(2, 2), 5).unwrap();
        assert!(r.contains(Site::new(2, 6)));
        assert!(!r.contains(Site::new(2, 7)));
        assert!(r.contains_strictly(Site::new(3, 5)));
        assert!(!r.contains_strictly(Site::new(2, 4)));
        assert!(r.is_corner(Site::new(6, 2)));
        assert_eq!(r.sites().len(), 25);
        assert!(Region::new(&g, Site::new(8, 0), 5).is_err());
        let other = Region::new(&g, Site::new(2, 7), 3).unwrap();
        assert!(r.is_disjoint(&other));
        assert!(!r.is_disjoint(&Region::new(&g, Site::new(4, 4), 3).unwrap()));
    }
}
