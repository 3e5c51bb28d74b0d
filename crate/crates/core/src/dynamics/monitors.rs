//! Energy-type functionals evaluated on a modal state and a history norm.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::spectral::{BeamParams, ModalState, Norms, LAMBDA1};

/// `𝓔 = ‖u‖₂² + ‖∂_t u‖² + ‖η‖²_{0,μ}`.
pub fn energy(norms: &Norms, velocity_sq: f64, eta_norm_sq: f64) -> f64 {
    norms.h2 + velocity_sq + eta_norm_sq
}

/// `E = 𝓔 + ½(β + ‖u‖₁²)² + k‖u‖²`.
pub fn augmented_energy(state: &ModalState, eta_norm_sq: f64, params: &BeamParams) -> f64 {
    let n = state.norms();
    let s = params.beta + n.h1;
    energy(&n, state.velocity_norm_sq(), eta_norm_sq) + 0.5 * s * s + params.k * n.l2
}

/// `𝓛 = E − 2⟨f, u⟩`, nonincreasing along trajectories.
pub fn lyapunov(state: &ModalState, eta_norm_sq: f64, params: &BeamParams) -> f64 {
    let fu: f64 = state.c.iter().enumerate().map(|(i, c)| params.f(i + 1) * c).sum();
    augmented_energy(state, eta_norm_sq, params) - 2.0 * fu
}

/// Value of `Φ = E + ε⟨∂_t u, u⟩` together with the sandwich constants
/// `m₀𝓔 ≤ Φ ≤ m₁𝓔 + m₂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhiValue {
    pub phi: f64,
    pub m0: f64,
    pub m1: f64,
    pub m2: f64,
}

/// Admissible range: `0 ≤ ε < 2` and, when `k > 0`, `ε < 2k`.
pub fn check_phi_eps(eps: f64, k: f64) -> Result<()> {
    if !(0.0..2.0).contains(&eps) || (k > 0.0 && eps >= 2.0 * k) {
        return Err(Error::InvalidParameter(format!(
            "epsilon {eps} outside the admissible range (0 <= eps < 2, eps < 2k for k = {k})"
        )));
    }
    Ok(())
}

/// Sandwich constants for a given `ε`. `energy_bound` is the uniform bound `C`
/// on `𝓔(t)`; it enters `m₂ = ½(|β| + C/√λ₁)²`.
///
/// For `k = 0` the term `k‖u‖²` is absent and the Young split is absorbed by
/// `‖u‖₂² ≥ λ₁‖u‖²`, leaving `m₀ = 1 − ε/2`.
pub fn phi_constants(eps: f64, params: &BeamParams, energy_bound: f64) -> Result<(f64, f64, f64)> {
    check_phi_eps(eps, params.k)?;
    let k = params.k;
    let m0 = if eps == 0.0 {
        1.0
    } else if k > 0.0 {
        (1.0 - eps / 2.0).min(1.0 - eps / (2.0 * k))
    } else {
        1.0 - eps / 2.0
    };
    let m1 = 2.0 + (k + eps / 2.0) / LAMBDA1 + eps / 2.0;
    let c_bar = params.beta.abs() + energy_bound / LAMBDA1.sqrt();
    Ok((m0, m1, 0.5 * c_bar * c_bar))
}

pub fn phi(
    state: &ModalState,
    eta_norm_sq: f64,
    params: &BeamParams,
    eps: f64,
    energy_bound: f64,
) -> Result<PhiValue> {
    let (m0, m1, m2) = phi_constants(eps, params, energy_bound)?;
    Ok(PhiValue { phi: phi_value(state, eta_norm_sq, params, eps), m0, m1, m2 })
}

/// `Φ` alone, without range checks.
pub fn phi_value(state: &ModalState, eta_norm_sq: f64, params: &BeamParams, eps: f64) -> f64 {
    let cross: f64 = state.c.iter().zip(&state.cdot).map(|(c, v)| c * v).sum();
    augmented_energy(state, eta_norm_sq, params) + eps * cross
}

/// Default `ε = ½·min(1, k)`.
pub fn default_phi_eps(k: f64) -> f64 {
    0.5 * k.min(1.0)
}
