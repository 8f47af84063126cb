//! Closed-form benchmarks and least-squares growth fits.

use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Weight of the rare four-spin entangling jumps in the plateau estimate.
///
/// A Néel configuration of a four-site block has steady-state probability
/// 1/8 and admits two entangling jumps, giving 2/8.
pub const ENTANGLING_JUMP_WEIGHT: f64 = 0.25;

/// Fraction of two-spin configurations that build up entanglement.
pub const ACTIVE_PAIR_FRACTION: f64 = 0.5;

/// Entanglement entropy in bits of one spin of a flip-flopping pair started
/// in `|↑↓⟩`.
pub fn two_spin_entropy(t: f64, j: f64) -> f64 {
    let c2 = (t * j / 2.0).cos().powi(2);
    let s2 = 1.0 - c2;
    let h = |p: f64| if p > 0.0 { -p * p.log2() } else { 0.0 };
    (h(c2) + h(s2)).max(0.0)
}

/// Small-time expansion of [`two_spin_entropy`] to order `(tJ)²`.
pub fn two_spin_entropy_short_time(t: f64, j: f64) -> f64 {
    let x = (j * t / 2.0).powi(2);
    if x <= 0.0 {
        return 0.0;
    }
    x * (1.0 - x.ln()) / core::f64::consts::LN_2
}

fn check_gamma(gamma: f64, j: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidParams(format!("gamma must be positive, got {gamma}")));
    }
    if !j.is_finite() {
        return Err(Error::InvalidParams(format!("J must be finite, got {j}")));
    }
    Ok(())
}

/// Two-site contribution to the long-time trajectory entanglement for strong
/// balanced emission and absorption:
/// `J²/(16γ² ln 2) · [2(E − 1) + ln(16γ²/J²)]`.
pub fn plateau_two_site(gamma: f64, j: f64) -> Result<f64> {
    check_gamma(gamma, j)?;
    if j == 0.0 {
        return Ok(0.0);
    }
    let r = j * j / (gamma * gamma);
    Ok(r / (16.0 * core::f64::consts::LN_2)
        * (2.0 * (EULER_GAMMA - 1.0) + (16.0 * gamma * gamma / (j * j)).ln()))
}

/// Four-spin correction `J²/(32γ²)`.
pub fn plateau_four_spin(gamma: f64, j: f64) -> Result<f64> {
    check_gamma(gamma, j)?;
    // ∫ (t²J²/4) 2γ e^{-2γt} dt = J²/(8γ²)
    Ok(ENTANGLING_JUMP_WEIGHT * j * j / (8.0 * gamma * gamma))
}

/// Plateau estimate of the trajectory entanglement (bits).
pub fn plateau_estimate(gamma: f64, j: f64) -> Result<f64> {
    Ok(plateau_two_site(gamma, j)? + plateau_four_spin(gamma, j)?)
}

/// Density of the waiting time to the next jump when the decay rate of the
/// squared norm is `N γ`.
pub fn jump_time_pdf(t: f64, n_sites: usize, gamma: f64) -> f64 {
    if t < 0.0 {
        return 0.0;
    }
    let rate = n_sites as f64 * gamma;
    rate * (-rate * t).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    /// Exponent `α` of `S = A t^α`, or slope `a` of `S = a log₂ t + b`.
    pub exponent_or_slope: f64,
    /// `A` for power laws, `b` for logarithmic growth.
    pub prefactor_or_offset: f64,
    pub window: (f64, f64),
    /// Root-mean-square residual of the fitted quantity.
    pub residual: f64,
    pub n_points: usize,
}

/// Minimum number of samples inside a fit window.
pub const MIN_FIT_POINTS: usize = 8;

/// Default window of the power-law fit, in units of `1/J`.
pub const POWER_LAW_WINDOW: (f64, f64) = (1.1, 3.9);

fn select(times: &[f64], values: &[f64], window: (f64, f64)) -> Result<(Vec<f64>, Vec<f64>)> {
    if times.len() != values.len() {
        return Err(Error::Fit(format!(
            "{} times but {} values",
            times.len(),
            values.len()
        )));
    }
    if !(window.0 < window.1) {
        return Err(Error::Fit(format!("empty window {window:?}")));
    }
    let (t, v): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(values)
        .filter(|(&t, _)| t >= window.0 && t <= window.1)
        .map(|(&t, &v)| (t, v))
        .unzip();
    if t.len() < MIN_FIT_POINTS {
        return Err(Error::Fit(format!(
            "{} points in window {window:?}, need at least {MIN_FIT_POINTS}",
            t.len()
        )));
    }
    if t.iter().any(|&x| x <= 0.0) {
        return Err(Error::Fit("window includes non-positive times".into()));
    }
    Ok((t, v))
}

/// Ordinary least squares `y = a x + b`; returns `(a, b, rms)`.
fn linear_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx <= 0.0 {
        return Err(Error::Fit("abscissae are all equal".into()));
    }
    let a = sxy / sxx;
    let b = my - a * mx;
    let rms = (x
        .iter()
        .zip(y)
        .map(|(xi, yi)| (yi - a * xi - b).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok((a, b, rms))
}

/// Fits `S = A t^α` by least squares in `(ln t, ln S)`.
pub fn fit_power_law(times: &[f64], values: &[f64], window: (f64, f64)) -> Result<FitResult> {
    let (t, v) = select(times, values, window)?;
    if let Some(bad) = v.iter().find(|&&s| !(s > 0.0)) {
        return Err(Error::Fit(format!("non-positive value {bad} in window")));
    }
    let x: Vec<f64> = t.iter().map(|t| t.ln()).collect();
    let y: Vec<f64> = v.iter().map(|s| s.ln()).collect();
    let (a, b, rms) = linear_fit(&x, &y)?;
    Ok(FitResult {
        exponent_or_slope: a,
        prefactor_or_offset: b.exp(),
        window,
        residual: rms,
        n_points: t.len(),
    })
}

/// Fits `S = a log₂ t + b` by least squares in `(log₂ t, S)`.
pub fn fit_log_growth(times: &[f64], values: &[f64], window: (f64, f64)) -> Result<FitResult> {
    let (t, v) = select(times, values, window)?;
    if let Some(bad) = v.iter().find(|&&s| !s.is_finite()) {
        return Err(Error::Fit(format!("non-finite value {bad} in window")));
    }
    let x: Vec<f64> = t.iter().map(|t| t.log2()).collect();
    let (a, b, rms) = linear_fit(&x, &v)?;
    Ok(FitResult {
        exponent_or_slope: a,
        prefactor_or_offset: b,
        window,
        residual: rms,
        n_points: t.len(),
    })
}
