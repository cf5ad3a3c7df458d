//! Convergence series relating lattice kernels and wave vectors to their
//! continuum counterparts at fixed `a = 1` and growing `N`.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::Serialize;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::lattice::GridSpec;
use crate::spectral::{wave_vector, KernelTable};

/// Log coefficient of `1/|k̄|²` along even separations, where all four
/// cones of the lattice sine add in phase: `4 · (1/2π)`.
pub const FOUR_CONE_COEFFICIENT: f64 = 2.0 / PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Fit {
    /// Extrapolated limit.
    pub estimate: f64,
    /// Observed order `p` in `error ~ N^(−p)`.
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceSeries {
    pub observable: String,
    pub n_values: Vec<usize>,
    pub values: Vec<f64>,
    pub fit: Option<Fit>,
}

impl ConvergenceSeries {
    pub fn new(
        observable: impl Into<String>,
        n_values: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if n_values.len() != values.len() {
            return Err(Error::InvalidArgument("series lengths differ".into()));
        }
        if n_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("N values must increase".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "series contains non-finite values".into(),
            ));
        }
        let fit = richardson(&n_values, &values);
        Ok(Self {
            observable: observable.into(),
            n_values,
            values,
            fit,
        })
    }

    pub fn increments(&self) -> Vec<f64> {
        self.values
            .windows(2)
            .map(|w| (w[1] - w[0]).abs())
            .collect()
    }

    pub fn increments_shrinking(&self) -> bool {
        self.increments().windows(2).all(|w| w[1] < w[0])
    }

    pub fn last(&self) -> f64 {
        *self.values.last().expect("non-empty series")
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("N,{}\n", self.observable);
        for (n, v) in self.n_values.iter().zip(&self.values) {
            out.push_str(&format!("{n},{v:?}\n"));
        }
        out
    }
}

/// Extrapolation from the last three points, taking the convergence order
/// from the data: with increments `d1, d2` over `N1 < N2 < N3`,
/// `p = ln(d1/d2)/ln(N3/N2)` (for geometric spacing) and the tail is summed
/// as a geometric series.
fn richardson(n: &[usize], v: &[f64]) -> Option<Fit> {
    if v.len() < 3 {
        return None;
    }
    let k = v.len();
    let d1 = v[k - 2] - v[k - 3];
    let d2 = v[k - 1] - v[k - 2];
    if d1 == 0.0 || d2 == 0.0 || d1.signum() != d2.signum() {
        return None;
    }
    let ratio = d2 / d1;
    if ratio >= 1.0 {
        return None;
    }
    let rate = (1.0 / ratio).ln() / (n[k - 1] as f64 / n[k - 2] as f64).ln();
    Some(Fit {
        estimate: v[k - 1] + d2 * ratio / (1.0 - ratio),
        rate,
    })
}

fn default_builder(grid: GridSpec) -> Result<Arc<KernelTable>> {
    KernelTable::build_shared(grid)
}

fn unit_grid(n: usize) -> Result<GridSpec> {
    GridSpec::new(n, 1.0)
}

/// `r·G(0, r)` for each `N`.
pub fn g_scaling_check(n_list: &[usize], r: usize) -> Result<ConvergenceSeries> {
    g_scaling_check_with(n_list, r, default_builder)
}

pub fn g_scaling_check_with(
    n_list: &[usize],
    r: usize,
    mut build: impl FnMut(GridSpec) -> Result<Arc<KernelTable>>,
) -> Result<ConvergenceSeries> {
    if r == 0 {
        return Err(Error::InvalidArgument("r must be positive".into()));
    }
    let mut values = Vec::with_capacity(n_list.len());
    for &n in n_list {
        if 2 * r >= n {
            return Err(Error::InvalidArgument(format!(
                "r = {r} is not small against N = {n}"
            )));
        }
        let k = build(unit_grid(n)?)?;
        values.push(r as f64 * k.g(0, r as isize));
    }
    ConvergenceSeries::new(format!("r*G(r={r})"), n_list.to_vec(), values)
}

/// `[D(r1) − D(r2)] / ln(r2/r1)` for each `N`.
pub fn d_log_check(n_list: &[usize], r1: usize, r2: usize) -> Result<ConvergenceSeries> {
    d_log_check_with(n_list, r1, r2, default_builder)
}

pub fn d_log_check_with(
    n_list: &[usize],
    r1: usize,
    r2: usize,
    mut build: impl FnMut(GridSpec) -> Result<Arc<KernelTable>>,
) -> Result<ConvergenceSeries> {
    if r1 == 0 || r1 >= r2 {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= r1 < r2, got ({r1}, {r2})"
        )));
    }
    let mut values = Vec::with_capacity(n_list.len());
    for &n in n_list {
        if 2 * r2 >= n {
            return Err(Error::InvalidArgument(format!(
                "r2 = {r2} is not small against N = {n}"
            )));
        }
        let k = build(unit_grid(n)?)?;
        values.push(d_log_slope(&k, r1, r2));
    }
    ConvergenceSeries::new(format!("dlog({r1},{r2})"), n_list.to_vec(), values)
}

pub fn d_log_slope(kernels: &KernelTable, r1: usize, r2: usize) -> f64 {
    (kernels.d(0, r1 as isize) - kernels.d(0, r2 as isize)) / (r2 as f64 / r1 as f64).ln()
}

/// `|k̄ − k| / |k|` for the mode `β = round(fraction · N_min)` held fixed
/// while `N` grows, so the physical wave number shrinks like `1/N`.
pub fn kvec_convergence(n_list: &[usize], mode_fraction: f64) -> Result<ConvergenceSeries> {
    if !(mode_fraction > 0.0 && mode_fraction < 0.25) {
        return Err(Error::InvalidArgument(format!(
            "mode fraction must lie in (0, 1/4), got {mode_fraction}"
        )));
    }
    let n_min = *n_list
        .iter()
        .min()
        .ok_or_else(|| Error::InvalidArgument("empty N list".into()))?;
    let beta = ((mode_fraction * n_min as f64).round() as usize).max(1);
    let mut values = Vec::with_capacity(n_list.len());
    for &n in n_list {
        let grid = unit_grid(n)?;
        let kbar = wave_vector(&grid, 0, beta)?.norm();
        let k = 2.0 * PI * beta as f64 / (n as f64 * grid.a());
        values.push((kbar - k).abs() / k);
    }
    ConvergenceSeries::new(
        format!("kvec_rel_err(beta={beta})"),
        n_list.to_vec(),
        values,
    )
}

/// Continuum value of `[D(r1) − D(r2)] / ln(r2/r1)` for the 2D Coulomb
/// kernel `∫ d²k/(2π)² e^{ik·r}/k²`, by quadrature. After the angular
/// integral the difference becomes a Frullani integral
/// `(1/2π) ∫₀^∞ (cos k r1 − cos k r2)/k dk`, evaluated here with an
/// `erfc(√ε k)` cutoff and composite Simpson.
pub fn continuum_log_coefficient(r1: f64, r2: f64, epsilon: f64) -> Result<f64> {
    if !(r1 > 0.0 && r2 > r1 && epsilon > 0.0) {
        return Err(Error::InvalidArgument(
            "need 0 < r1 < r2 and epsilon > 0".into(),
        ));
    }
    let cutoff = 7.0 / epsilon.sqrt();
    let h = (0.02 / r2).min(cutoff / 1000.0);
    let steps = ((cutoff / h).ceil() as usize).next_multiple_of(2);
    let h = cutoff / steps as f64;
    let f = |k: f64| {
        if k == 0.0 {
            0.0
        } else {
            ((k * r1).cos() - (k * r2).cos()) * erfc(epsilon.sqrt() * k) / k
        }
    };
    let mut sum = f(0.0) + f(cutoff);
    for s in 1..steps {
        let w = if s % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(s as f64 * h);
    }
    let integral = sum * h / 3.0;
    Ok(integral / (2.0 * PI) / (r2 / r1).ln())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g_series_increments_shrink() {
        for (r, expected) in [
            (5, [-0.0343, -0.0178, -0.0090]),
            (10, [0.398, 0.518, 0.579]),
        ] {
            let s = g_scaling_check(&[51, 101, 201], r).unwrap();
            assert!(s.increments_shrinking(), "{s:?}");
            for (v, e) in s.values.iter().zip(expected) {
                assert!((v - e).abs() < 1e-3, "r={r}: {v} vs {e}");
            }
        }
        assert!(g_scaling_check(&[51], 0).is_err());
    }

    #[test]
    fn d_log_axis_values() {
        let s = d_log_check(&[51, 101, 201], 1, 2).unwrap();
        let expected = [-1.808, -2.243, -2.682].map(|x| x / 2f64.ln());
        for (v, e) in s.values.iter().zip(expected) {
            assert!((v - e).abs() < 2e-3, "{v} vs {e}");
        }
        assert!(d_log_check(&[51], 2, 2).is_err());
    }

    #[test]
    fn even_pairs_share_a_log_slope() {
        let a = d_log_check(&[201], 2, 4).unwrap().last();
        let b = d_log_check(&[201], 4, 8).unwrap().last();
        assert!((a - b).abs() < 0.02 * a.abs(), "{a} vs {b}");
        assert!((a - FOUR_CONE_COEFFICIENT).abs() < 0.03);
    }

    #[test]
    fn kvec_error_is_second_order() {
        let s = kvec_convergence(&[40, 80, 160], 0.05).unwrap();
        for w in s.values.windows(2) {
            let ratio = w[0] / w[1];
            assert!((ratio - 4.0).abs() < 0.8, "{ratio}");
        }
        let fit = s.fit.unwrap();
        assert!((fit.rate - 2.0).abs() < 0.1);
        assert!(fit.estimate.abs() < 1e-4);
        assert!(kvec_convergence(&[40], 0.25).is_err());
        assert!(kvec_convergence(&[40], 0.0).is_err());
    }

    #[test]
    fn small_fraction_limit() {
        let coarse = kvec_convergence(&[400], 0.01).unwrap().last();
        let fine = kvec_convergence(&[400], 0.0025).unwrap().last();
        assert!(fine < coarse && fine < 1e-3);
    }

    #[test]
    fn continuum_oracle_is_inverse_two_pi() {
        let v = continuum_log_coefficient(1.0, 2.0, 1e-4).unwrap();
        assert!((v - 1.0 / (2.0 * PI)).abs() < 1e-4, "{v}");
        let w = continuum_log_coefficient(2.0, 4.0, 1e-4).unwrap();
        assert!((v - w).abs() < 1e-4);
    }

    #[test]
    fn richardson_on_a_known_sequence() {
        let n = vec![10, 20, 40, 80];
        let v: Vec<f64> = n.iter().map(|&k| 3.0 + 5.0 / (k as f64).powi(2)).collect();
        let s = ConvergenceSeries::new("x", n, v).unwrap();
        let fit = s.fit.unwrap();
        assert!((fit.estimate - 3.0).abs() < 1e-12);
        assert!((fit.rate - 2.0).abs() < 1e-12);
        assert!(ConvergenceSeries::new("x", vec![2, 1], vec![0.0, 0.0]).is_err());
    }
}
