//! Stability thresholds of the straight state and energy bounds.
//!
//! `β_c(k)` is the buckling load; `β̄(k)` is the exponential-stability threshold,
//! equal to `β_c(k)` for `k ≤ λ₁` and to `2√k` beyond. The coercivity constant
//! `ν(β, k)` of `L = A + βA^{1/2} + k` on `H₂` is obtained by minimizing
//! `g(x) = 1 + β/x + k/x²` over the spectral variable `x = √λ ≥ π²`, relaxed to
//! a continuum; its sign changes exactly at `β = −β̄(k)`.

use serde::Serialize;
use std::f64::consts::PI;
use std::io::Write;

use crate::dynamics::{InitialData, Trajectory};
use crate::error::{Error, Result};
use crate::fmt::sci;
use crate::kernel::MemoryKernel;
use crate::par::{map_indexed, Execution};
use crate::spectral::{BeamParams, LAMBDA1};
use crate::statics::{beta_c, Classification, StationarySet};

const PI2: f64 = PI * PI;

/// Default fraction window `(a, b)` of `[0, T]` for decay fits.
pub const DEFAULT_WINDOW: (f64, f64) = (0.25, 0.9);

pub fn beta_bar(k: f64) -> f64 {
    if k <= LAMBDA1 {
        beta_c(k)
    } else {
        2.0 * k.sqrt()
    }
}

/// Coercivity constant: `⟨Lu, u⟩ ≥ ν‖u‖₂²`.
pub fn nu(beta: f64, k: f64) -> f64 {
    if beta >= 0.0 {
        return 1.0;
    }
    if 2.0 * k / -beta <= PI2 {
        1.0 + beta / PI2 + k / LAMBDA1
    } else {
        1.0 - beta * beta / (4.0 * k)
    }
}

/// Uniform bound `C ≥ 𝓔(t)` along the trajectory from `init`.
///
/// From `𝓛(t) ≤ 𝓛(0)` and `𝓛 ≥ (1 − ε/λ₁)𝓔 − ‖f‖²/ε` with `ε = λ₁/2`:
/// `C = 2𝓛(0) + 4‖f‖²/λ₁`. Without load the sharper `𝓔 ≤ 𝓛 ≤ 𝓛(0)` is used.
pub fn energy_bound(init: &InitialData, params: &BeamParams, kernel: &MemoryKernel) -> f64 {
    let l0 = init.lyapunov(params, kernel);
    if params.has_load() {
        2.0 * l0 + 4.0 * params.load_norm_sq() / LAMBDA1
    } else {
        l0
    }
}

/// Radius `R₀ = 1 + √(2K + 4‖f‖²/λ₁)` of the absorbing ball, where
/// `K = 1 + sup_{z ∈ 𝓢} 𝓛(z)`.
///
/// On a resonant family (and on each single buckled mode) `‖u‖₁² = −(β + μ)`
/// and `‖u‖₂² + k‖u‖² = μ‖u‖₁²`, so `𝓛 = μ·level + μ²/2` is constant there.
pub fn absorbing_radius(params: &BeamParams, stationary: &StationarySet) -> Result<f64> {
    let mut sup = f64::NEG_INFINITY;
    for e in &stationary.equilibria {
        sup = sup.max(crate::dynamics::lyapunov(&e.modal, 0.0, params));
    }
    if stationary.classification == Classification::Infinite {
        for fam in &stationary.families {
            sup = sup.max(fam.mu * fam.level + 0.5 * fam.mu * fam.mu);
        }
    }
    if !sup.is_finite() {
        return Err(Error::Degenerate("stationary set is empty".into()));
    }
    let k_level = 1.0 + sup;
    Ok(1.0 + (2.0 * k_level + 4.0 * params.load_norm_sq() / LAMBDA1).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayFit {
    pub rate: f64,
    pub residual: f64,
    pub window: [f64; 2],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

/// Least-squares line through `log 𝓔(t)` for `t` in the fraction window
/// `[t₀ + a(T−t₀), t₀ + b(T−t₀)]`. `rate = −slope`, `residual` is the RMS
/// deviation from the line.
pub fn estimate_decay_rate(times: &[f64], energies: &[f64], window: (f64, f64)) -> Result<DecayFit> {
    let (a, b) = window;
    if !(0.0 <= a && a < b && b <= 1.0) {
        return Err(Error::InvalidParameter(format!("window ({a}, {b}) must satisfy 0 <= a < b <= 1")));
    }
    if times.len() != energies.len() || times.is_empty() {
        return Err(Error::InvalidParameter("times and energies must be nonempty and equally long".into()));
    }
    let t0 = times[0];
    let span = times[times.len() - 1] - t0;
    let (lo, hi) = (t0 + a * span, t0 + b * span);
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(energies)
        .filter(|(t, _)| **t >= lo - 1e-12 * span && **t <= hi + 1e-12 * span)
        .map(|(t, e)| (*t, *e))
        .collect();
    if pts.len() < 2 {
        return Err(Error::Degenerate("fewer than two samples in the fit window".into()));
    }
    if pts[0].1 <= 0.0 {
        return Err(Error::Degenerate("energy vanishes at the start of the fit window".into()));
    }
    if let Some((t, _)) = pts.iter().find(|(_, e)| *e <= 0.0) {
        return Ok(DecayFit {
            rate: f64::INFINITY,
            residual: 0.0,
            window: [lo, hi],
            diagnostic: Some(format!("energy underflows to zero at t = {t}")),
        });
    }
    let (slope, intercept, rms) = linear_fit(pts.iter().map(|(t, e)| (*t, e.ln())));
    let _ = intercept;
    Ok(DecayFit { rate: -slope, residual: rms, window: [lo, hi], diagnostic: None })
}

pub fn estimate_trajectory_decay(traj: &Trajectory, window: (f64, f64)) -> Result<DecayFit> {
    estimate_decay_rate(&traj.times(), &traj.energies(), window)
}

/// Returns `(slope, intercept, rms residual)`.
fn linear_fit<I: Iterator<Item = (f64, f64)> + Clone>(pts: I) -> (f64, f64, f64) {
    let n = pts.clone().count() as f64;
    let (sx, sy) = pts.clone().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / n, sy / n);
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (x, y) in pts.clone() {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = pts.map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    (slope, intercept, (ss / n).sqrt())
}

/// Exploratory description of a decay curve: a log-linear fit plus the
/// curvature of a quadratic fit of `log 𝓔`. Positive curvature with a poor
/// linear fit is the signature of slower-than-exponential decay.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayDiagnosis {
    pub fit: DecayFit,
    pub curvature: f64,
}

pub fn diagnose_decay(times: &[f64], energies: &[f64], window: (f64, f64)) -> Result<DecayDiagnosis> {
    let fit = estimate_decay_rate(times, energies, window)?;
    let [lo, hi] = fit.window;
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(energies)
        .filter(|(t, e)| **t >= lo && **t <= hi && **e > 0.0)
        .map(|(t, e)| (*t, e.ln()))
        .collect();
    // quadratic least squares via centered normal equations
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mut m = [[0.0; 3]; 3];
    let mut r = [0.0; 3];
    for &(x, y) in &pts {
        let x = x - mx;
        let basis = [1.0, x, x * x];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += basis[i] * basis[j];
            }
            r[i] += basis[i] * y;
        }
    }
    let curvature = solve3(m, r).map_or(0.0, |c| 2.0 * c[2]);
    Ok(DecayDiagnosis { fit, curvature })
}

fn solve3(mut m: [[f64; 3]; 3], mut r: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[piv][col].abs() < 1e-300 {
            return None;
        }
        m.swap(col, piv);
        r.swap(col, piv);
        for row in col + 1..3 {
            let f = m[row][col] / m[col][col];
            for j in col..3 {
                m[row][j] -= f * m[col][j];
            }
            r[row] -= f * r[col];
        }
    }
    let mut x = [0.0; 3];
    for i in (0..3).rev() {
        let s: f64 = (i + 1..3).map(|j| m[i][j] * x[j]).sum();
        x[i] = (r[i] - s) / m[i][i];
    }
    Some(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    /// `β > −β̄(k)`: exponential decay to the straight state.
    Exponential,
    /// `−β_c(k) < β < −β̄(k)`: unique equilibrium without exponential decay.
    Gap,
    /// `β < −β_c(k)`: buckled equilibria exist.
    Buckled,
    /// On one of the two threshold curves.
    Boundary,
}

impl Region {
    pub fn as_str(self) -> &'static str {
        match self {
            Region::Exponential => "exponential",
            Region::Gap => "gap",
            Region::Buckled => "buckled",
            Region::Boundary => "boundary",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityVerdict {
    pub beta: f64,
    pub k: f64,
    pub beta_c: f64,
    pub beta_bar: f64,
    pub region: Region,
    pub nu: f64,
}

const BOUNDARY_TOL: f64 = 1e-12;

pub fn classify(beta: f64, k: f64) -> StabilityVerdict {
    let bc = beta_c(k);
    let bb = beta_bar(k);
    let on = |thr: f64| (beta + thr).abs() <= BOUNDARY_TOL * thr.max(1.0);
    let region = if on(bb) || on(bc) {
        Region::Boundary
    } else if beta > -bb {
        Region::Exponential
    } else if beta > -bc {
        Region::Gap
    } else {
        Region::Buckled
    };
    StabilityVerdict { beta, k, beta_c: bc, beta_bar: bb, region, nu: nu(beta, k) }
}

/// Evaluates [`classify`] on a `steps × steps` grid including the range ends,
/// ordered by `k` then `β`.
pub fn stability_map(
    k_range: (f64, f64),
    beta_range: (f64, f64),
    steps: usize,
    exec: Execution,
) -> Result<Vec<StabilityVerdict>> {
    if steps == 0 {
        return Err(Error::InvalidParameter("steps must be positive".into()));
    }
    if !(k_range.0 >= 0.0 && k_range.0 <= k_range.1) || !(beta_range.0 <= beta_range.1) {
        return Err(Error::InvalidParameter("ranges must be ordered with k >= 0".into()));
    }
    let at = |r: (f64, f64), i: usize| {
        if steps == 1 || i + 1 == steps {
            if steps == 1 { r.0 } else { r.1 }
        } else {
            r.0 + (r.1 - r.0) * i as f64 / (steps - 1) as f64
        }
    };
    Ok(map_indexed(exec, steps * steps, |idx| {
        let (ki, bi) = (idx / steps, idx % steps);
        classify(at(beta_range, bi), at(k_range, ki))
    }))
}

pub fn write_map_csv<W: Write>(cells: &[StabilityVerdict], mut out: W) -> std::io::Result<()> {
    writeln!(out, "k,beta,beta_c,beta_bar,nu,region")?;
    for c in cells {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            sci(c.k),
            sci(c.beta),
            sci(c.beta_c),
            sci(c.beta_bar),
            sci(c.nu),
            c.region.as_str()
        )?;
    }
    Ok(())
}
