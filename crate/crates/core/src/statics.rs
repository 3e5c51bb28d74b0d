//! Steady states of the unloaded beam: `u'''' − (β + ‖u'‖²)u'' + ku = 0` with
//! hinged ends.
//!
//! On a single mode `A sin(nπx)` the equation reduces to
//! `A n²π² [β + μ_n(k) + A²n²π²/2] = 0` with `μ_n(k) = k/(n²π²) + n²π²`, which
//! gives the buckled amplitudes `A = ±(1/(nπ))·√(−2[β + μ_n(k)])`. When two
//! modes share the same `μ` (resonant `k = i²j²π⁴`) every combination
//! `a sin(iπx) + b sin(jπx)` with `(i²π²/2)a² + (j²π²/2)b² = −(β + μ_i)` is an
//! equilibrium as well. Two distinct indices can share a level only through
//! `ij = √k/π²`, so no level is ever shared by three modes.

use serde::Serialize;
use std::f64::consts::PI;
use std::io::Write;

use crate::error::{Error, Result};
use crate::fmt::sci;
use crate::par::{map_indexed, Execution};
use crate::spectral::{
    eigenvalue, h1_sq, modal_from_physical, sqrt_eigenvalue, BeamParams, ModalState, DEFAULT_MODES, LAMBDA1,
};

pub const DEFAULT_RESONANCE_TOL: f64 = 1e-9;

/// Amplitudes below this are written as 0 in branch tables.
pub const AMPLITUDE_CLAMP: f64 = 1e-12;

/// `μ_n(k) = k/(n²π²) + n²π²`.
pub fn mu_n(k: f64, n: usize) -> f64 {
    let w = sqrt_eigenvalue(n);
    k / w + w
}

/// Index `n_k` with `(n_k−1)²n_k² ≤ k/π⁴ < n_k²(n_k+1)²`; it minimizes `μ_n(k)`.
pub fn critical_index(k: f64) -> usize {
    let q = k / LAMBDA1;
    let mut n = 1usize;
    loop {
        let upper = ((n * n) * (n + 1) * (n + 1)) as f64;
        if q < upper {
            return n;
        }
        n += 1;
    }
}

/// Critical buckling load `β_c(k) = min_n μ_n(k)`.
pub fn beta_c(k: f64) -> f64 {
    mu_n(k, critical_index(k))
}

/// A pair of modes sharing the level `mu = μ_i(k) = μ_j(k)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Resonance {
    pub i: usize,
    pub j: usize,
    pub mu: f64,
}

/// All resonant pairs `i < j` with `k/π⁴ = i²j²` (relative tolerance `rel_tol`),
/// sorted by increasing level.
pub fn resonant_pairs(k: f64, rel_tol: f64) -> Vec<Resonance> {
    let q = k / LAMBDA1;
    if q < 4.0 * (1.0 - rel_tol) {
        return Vec::new();
    }
    let jmax = q.sqrt().ceil() as usize + 1;
    let mut out = Vec::new();
    for j in 2..=jmax {
        for i in 1..j {
            let p = ((i * i) * (j * j)) as f64;
            if (q - p).abs() <= rel_tol * p {
                out.push(Resonance { i, j, mu: mu_n(k, i) });
            }
        }
    }
    out.sort_by(|a, b| a.mu.total_cmp(&b.mu));
    out
}

/// The resonant pair with the smallest non-simple level, if `k` is resonant.
pub fn resonance(k: f64, rel_tol: f64) -> Option<Resonance> {
    resonant_pairs(k, rel_tol).into_iter().next()
}

/// Exact entry point for `k = multiple·π⁴`.
pub fn resonance_exact(multiple: u64) -> Option<Resonance> {
    let mut best: Option<Resonance> = None;
    let mut j = 2u64;
    while j * j <= multiple {
        for i in 1..j {
            if i * i * j * j == multiple {
                let k = multiple as f64 * LAMBDA1;
                let r = Resonance { i: i as usize, j: j as usize, mu: mu_n(k, i as usize) };
                if best.is_none_or(|b| r.mu < b.mu) {
                    best = Some(r);
                }
            }
        }
        j += 1;
    }
    best
}

/// `n★(β) = |{n : β + μ_n(k) < 0}|`.
pub fn n_star(beta: f64, k: f64) -> usize {
    live_modes(beta, k).len()
}

/// Modes with `β + μ_n(k) < 0`, ascending. Finite since `μ_n ≥ n²π²`.
pub fn live_modes(beta: f64, k: f64) -> Vec<usize> {
    if beta >= 0.0 {
        return Vec::new();
    }
    let nmax = ((-beta).sqrt() / PI).floor() as usize + 1;
    (1..=nmax).filter(|&n| beta + mu_n(k, n) < 0.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
    #[serde(rename = "0")]
    Zero,
}

impl Sign {
    pub fn symbol(self) -> &'static str {
        match self {
            Sign::Plus => "+",
            Sign::Minus => "-",
            Sign::Zero => "0",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Equilibrium {
    /// Buckling mode; 0 for the straight state.
    pub mode_index: usize,
    pub sign: Sign,
    /// `A` in `u(x) = A sin(nπx)`.
    pub physical_amplitude: f64,
    #[serde(skip)]
    pub modal: ModalState,
}

impl Equilibrium {
    pub fn zero(modes: usize) -> Self {
        Equilibrium { mode_index: 0, sign: Sign::Zero, physical_amplitude: 0.0, modal: ModalState::zeros(modes) }
    }

    fn buckled(n: usize, sign: Sign, amplitude: f64, modes: usize) -> Self {
        let mut modal = ModalState::zeros(modes);
        modal.c[n - 1] = modal_from_physical(amplitude);
        Equilibrium { mode_index: n, sign, physical_amplitude: amplitude, modal }
    }
}

/// `A_n^+ = (1/(nπ))√(−2[β + μ_n(k)])`, or `None` when `β + μ_n ≥ 0`.
pub fn buckled_amplitude(beta: f64, k: f64, n: usize) -> Option<f64> {
    let level = -(beta + mu_n(k, n));
    (level > 0.0).then(|| (2.0 * level).sqrt() / (n as f64 * PI))
}

/// Ellipse of two-mode equilibria `a sin(iπx) + b sin(jπx)` at a resonant level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResonantFamily {
    pub modes: (usize, usize),
    /// `−(β + μ_m(k)) > 0`, the common value of `‖u'‖²` on the family.
    pub level: f64,
    pub mu: f64,
    /// Coefficients `(i²π²/2, j²π²/2)` of `a²` and `b²`.
    pub ellipse: (f64, f64),
}

impl ResonantFamily {
    /// Member at angle `theta` on the ellipse.
    pub fn member(&self, theta: f64, modes: usize) -> ModalState {
        let (i, j) = self.modes;
        let a = (self.level / self.ellipse.0).sqrt() * theta.cos();
        let b = (self.level / self.ellipse.1).sqrt() * theta.sin();
        let mut s = ModalState::zeros(modes.max(j));
        s.c[i - 1] = modal_from_physical(a);
        s.c[j - 1] = modal_from_physical(b);
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    NullOnly,
    Finite,
    Infinite,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationarySet {
    pub classification: Classification,
    pub equilibria: Vec<Equilibrium>,
    pub families: Vec<ResonantFamily>,
    pub n_star: usize,
    /// Truncation used for the modal vectors.
    #[serde(skip)]
    pub modes: usize,
}

/// Enumerates all steady states of the unloaded beam.
pub fn enumerate_equilibria(params: &BeamParams, rel_tol: f64) -> Result<StationarySet> {
    params.validate()?;
    if params.has_load() {
        return Err(Error::Unsupported(
            "closed-form equilibria are only available for f = 0".into(),
        ));
    }
    let (beta, k) = (params.beta, params.k);
    let live = live_modes(beta, k);
    let n_star = live.len();
    let modes = DEFAULT_MODES.max(live.last().copied().unwrap_or(0));
    let mut equilibria = vec![Equilibrium::zero(modes)];

    if beta >= -beta_c(k) {
        return Ok(StationarySet {
            classification: Classification::NullOnly,
            equilibria,
            families: Vec::new(),
            n_star,
            modes,
        });
    }

    let pairs: Vec<Resonance> = resonant_pairs(k, rel_tol)
        .into_iter()
        .filter(|r| beta + r.mu < 0.0)
        .collect();
    let non_simple = |n: usize| pairs.iter().any(|r| r.i == n || r.j == n);

    for &n in &live {
        if non_simple(n) {
            continue;
        }
        let a = buckled_amplitude(beta, k, n).expect("live mode has positive level");
        equilibria.push(Equilibrium::buckled(n, Sign::Plus, a, modes));
        equilibria.push(Equilibrium::buckled(n, Sign::Minus, -a, modes));
    }
    let families: Vec<ResonantFamily> = pairs
        .iter()
        .map(|r| ResonantFamily {
            modes: (r.i, r.j),
            level: -(beta + r.mu),
            mu: r.mu,
            ellipse: (sqrt_eigenvalue(r.i) / 2.0, sqrt_eigenvalue(r.j) / 2.0),
        })
        .collect();
    let classification = if families.is_empty() { Classification::Finite } else { Classification::Infinite };
    Ok(StationarySet { classification, equilibria, families, n_star, modes })
}

/// L² norm of the modal residual
/// `r_n = λ_n c_n + (β + ‖u‖₁²) n²π² c_n + k c_n − f_n`.
pub fn static_residual(u: &ModalState, params: &BeamParams) -> f64 {
    let s = params.beta + h1_sq(&u.c);
    let modes = u.c.len().max(params.f_modes.len());
    let mut acc = 0.0;
    for i in 0..modes {
        let n = i + 1;
        let c = u.c.get(i).copied().unwrap_or(0.0);
        let r = eigenvalue(n) * c + s * sqrt_eigenvalue(n) * c + params.k * c - params.f(n);
        acc += r * r;
    }
    acc.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchRow {
    pub beta: f64,
    /// 0 for the straight branch.
    pub n: usize,
    pub a_plus: f64,
    pub a_minus: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FamilyMarker {
    pub beta: f64,
    pub i: usize,
    pub j: usize,
    pub level: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BranchTable {
    pub rows: Vec<BranchRow>,
    pub families: Vec<FamilyMarker>,
}

impl BranchTable {
    /// Largest sampled β at which branch `n` is present, i.e. its numerical birth point.
    pub fn birth(&self, n: usize) -> Option<f64> {
        self.rows.iter().filter(|r| r.n == n).map(|r| r.beta).max_by(f64::total_cmp)
    }

    /// Largest sampled β carrying a marker for the family on `(i, j)`.
    pub fn family_onset(&self, i: usize, j: usize) -> Option<f64> {
        self.families
            .iter()
            .filter(|m| m.i == i && m.j == j)
            .map(|m| m.beta)
            .max_by(f64::total_cmp)
    }

    /// Buckled branch indices in order of appearance as β decreases.
    pub fn birth_order(&self) -> Vec<usize> {
        let mut ns: Vec<usize> = self.rows.iter().map(|r| r.n).filter(|&n| n > 0).collect();
        ns.sort_unstable();
        ns.dedup();
        ns.sort_by(|a, b| self.birth(*b).unwrap().total_cmp(&self.birth(*a).unwrap()));
        ns
    }

    pub fn write_branches<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "beta,n,a_plus,a_minus")?;
        for r in &self.rows {
            writeln!(out, "{},{},{},{}", sci(r.beta), r.n, sci(r.a_plus), sci(r.a_minus))?;
        }
        Ok(())
    }

    pub fn write_families<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "beta,i,j,level")?;
        for m in &self.families {
            writeln!(out, "{},{},{},{}", sci(m.beta), m.i, m.j, sci(m.level))?;
        }
        Ok(())
    }
}

/// Samples `steps + 1` equally spaced loads in `[beta_min, beta_max]` and lists
/// every live branch. Non-simple levels are emitted as family markers only.
pub fn bifurcation_sweep(
    k: f64,
    beta_min: f64,
    beta_max: f64,
    steps: usize,
    exec: Execution,
) -> Result<BranchTable> {
    if !(beta_min < beta_max) {
        return Err(Error::InvalidParameter(format!("beta_min {beta_min} must be below beta_max {beta_max}")));
    }
    if steps == 0 {
        return Err(Error::InvalidParameter("steps must be positive".into()));
    }
    if !(k >= 0.0) {
        return Err(Error::InvalidParameter(format!("k must be >= 0, got {k}")));
    }
    let pairs = resonant_pairs(k, DEFAULT_RESONANCE_TOL);
    let non_simple = |n: usize| pairs.iter().any(|r| r.i == n || r.j == n);
    let h = (beta_max - beta_min) / steps as f64;
    let per_sample = map_indexed(exec, steps + 1, |s| {
        let beta = if s == steps { beta_max } else { beta_min + h * s as f64 };
        let mut rows = vec![BranchRow { beta, n: 0, a_plus: 0.0, a_minus: 0.0 }];
        let nmax = if beta < 0.0 { ((-beta).sqrt() / PI).floor() as usize + 1 } else { 0 };
        for n in 1..=nmax {
            let level = -(beta + mu_n(k, n));
            if level < 0.0 || non_simple(n) {
                continue;
            }
            let mut a = (2.0 * level).sqrt() / (n as f64 * PI);
            if a < AMPLITUDE_CLAMP {
                a = 0.0;
            }
            rows.push(BranchRow { beta, n, a_plus: a, a_minus: -a });
        }
        let markers: Vec<FamilyMarker> = pairs
            .iter()
            .filter(|r| beta + r.mu < 0.0)
            .map(|r| FamilyMarker { beta, i: r.i, j: r.j, level: -(beta + r.mu) })
            .collect();
        (rows, markers)
    });
    let mut table = BranchTable::default();
    for (rows, markers) in per_sample {
        table.rows.extend(rows);
        table.families.extend(markers);
    }
    Ok(table)
}
