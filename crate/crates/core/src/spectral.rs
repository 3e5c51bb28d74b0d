//! Modal basis of the hinged beam and the norms of the scale `‖u‖_ℓ = ‖A^{ℓ/4}u‖`.
//!
//! Modal coefficients refer to the orthonormal basis `e_n(x) = √2 sin(nπx)`.
//! All norms are returned squared.

use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};

pub use crate::history::functional_j;

/// Default Galerkin truncation for statics and analysis.
pub const DEFAULT_MODES: usize = 16;

/// `λ₁ = π⁴`, the smallest eigenvalue of `∂_xxxx` with hinged ends.
pub const LAMBDA1: f64 = PI * PI * PI * PI;

/// `n⁴π⁴`.
pub fn eigenvalue(n: usize) -> f64 {
    let nn = (n * n) as f64;
    nn * nn * LAMBDA1
}

/// `√λ_n = n²π²`, eigenvalue of `A^{1/2} = −∂_xx`.
pub fn sqrt_eigenvalue(n: usize) -> f64 {
    (n * n) as f64 * PI * PI
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamParams {
    pub beta: f64,
    pub k: f64,
    /// Components of the static load on the orthonormal modes; missing entries are 0.
    #[serde(default)]
    pub f_modes: Vec<f64>,
}

impl BeamParams {
    pub fn new(beta: f64, k: f64, f_modes: Vec<f64>) -> Result<Self> {
        if !beta.is_finite() {
            return Err(Error::InvalidParameter(format!("beta must be finite, got {beta}")));
        }
        if !(k >= 0.0) || !k.is_finite() {
            return Err(Error::InvalidParameter(format!("foundation stiffness k must be >= 0, got {k}")));
        }
        if f_modes.iter().any(|f| !f.is_finite()) {
            return Err(Error::InvalidParameter("load components must be finite".into()));
        }
        Ok(BeamParams { beta, k, f_modes })
    }

    /// Unloaded beam (`f = 0`).
    pub fn unloaded(beta: f64, k: f64) -> Result<Self> {
        Self::new(beta, k, Vec::new())
    }

    pub fn validate(&self) -> Result<()> {
        Self::new(self.beta, self.k, self.f_modes.clone()).map(|_| ())
    }

    /// Load component on mode `n` (1-based).
    pub fn f(&self, n: usize) -> f64 {
        self.f_modes.get(n - 1).copied().unwrap_or(0.0)
    }

    pub fn has_load(&self) -> bool {
        self.f_modes.iter().any(|&f| f != 0.0)
    }

    /// `‖f‖²`.
    pub fn load_norm_sq(&self) -> f64 {
        self.f_modes.iter().map(|f| f * f).sum()
    }

    pub fn check_truncation(&self, modes: usize) -> Result<()> {
        let tail = self.f_modes.iter().skip(modes).any(|&f| f != 0.0);
        if tail {
            return Err(Error::InvalidParameter(format!(
                "load has {} components but truncation is N = {modes}",
                self.f_modes.len()
            )));
        }
        Ok(())
    }
}

/// Truncated modal displacement `c` and velocity `cdot`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModalState {
    pub c: Vec<f64>,
    pub cdot: Vec<f64>,
}

impl ModalState {
    pub fn zeros(modes: usize) -> Self {
        ModalState { c: vec![0.0; modes], cdot: vec![0.0; modes] }
    }

    pub fn new(c: Vec<f64>, cdot: Vec<f64>) -> Result<Self> {
        if c.len() != cdot.len() {
            return Err(Error::InvalidParameter(format!(
                "displacement has {} modes, velocity has {}",
                c.len(),
                cdot.len()
            )));
        }
        if c.is_empty() {
            return Err(Error::InvalidParameter("truncation order must be >= 1".into()));
        }
        Ok(ModalState { c, cdot })
    }

    /// Static configuration with zero velocity.
    pub fn at_rest(c: Vec<f64>) -> Self {
        let n = c.len();
        ModalState { c, cdot: vec![0.0; n] }
    }

    /// Zero-padded (or truncated) copy with `modes` coefficients.
    pub fn resized(&self, modes: usize) -> Self {
        let mut c = self.c.clone();
        let mut cdot = self.cdot.clone();
        c.resize(modes, 0.0);
        cdot.resize(modes, 0.0);
        ModalState { c, cdot }
    }

    pub fn modes(&self) -> usize {
        self.c.len()
    }

    pub fn norms(&self) -> Norms {
        norms(self)
    }

    /// `‖∂_t u‖²`.
    pub fn velocity_norm_sq(&self) -> f64 {
        self.cdot.iter().map(|v| v * v).sum()
    }
}

/// Squared norms `(‖u‖², ‖u‖₁², ‖u‖₂²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub l2: f64,
    pub h1: f64,
    pub h2: f64,
}

pub fn norms(state: &ModalState) -> Norms {
    norms_of(&state.c)
}

pub fn norms_of(c: &[f64]) -> Norms {
    let mut out = Norms { l2: 0.0, h1: 0.0, h2: 0.0 };
    for (i, &cn) in c.iter().enumerate() {
        let sq = cn * cn;
        out.l2 += sq;
        out.h1 += sqrt_eigenvalue(i + 1) * sq;
        out.h2 += eigenvalue(i + 1) * sq;
    }
    out
}

/// `‖u‖₁² = Σ n²π² c_n²`.
pub fn h1_sq(c: &[f64]) -> f64 {
    c.iter().enumerate().map(|(i, x)| sqrt_eigenvalue(i + 1) * x * x).sum()
}

/// Synthesizes `u(x) = Σ c_n √2 sin(nπx)`.
pub fn evaluate_physical(state: &ModalState, x: f64) -> Result<f64> {
    evaluate_modes(&state.c, x)
}

pub fn evaluate_modes(c: &[f64], x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::InvalidParameter(format!("x = {x} outside [0, 1]")));
    }
    if x == 0.0 || x == 1.0 {
        return Ok(0.0);
    }
    Ok(c.iter()
        .enumerate()
        .map(|(i, cn)| cn * SQRT_2 * ((i + 1) as f64 * PI * x).sin())
        .sum())
}

/// Modal coefficient of a physical amplitude `A sin(nπx)`.
pub fn modal_from_physical(amplitude: f64) -> f64 {
    amplitude / SQRT_2
}

pub fn physical_from_modal(c: f64) -> f64 {
    c * SQRT_2
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const PI2: f64 = PI * PI;

    #[test]
    fn eigenvalues() {
        assert_relative_eq!(eigenvalue(1), 97.409_091_034_002_437, max_relative = 1e-15);
        assert_relative_eq!(eigenvalue(2), 16.0 * LAMBDA1);
        assert_relative_eq!(eigenvalue(3), 81.0 * LAMBDA1);
    }

    #[test]
    fn norms_examples() {
        let s = ModalState::at_rest(vec![1.0 / SQRT_2]);
        let n = s.norms();
        assert_relative_eq!(n.l2, 0.5, max_relative = 1e-14);
        assert_relative_eq!(n.h1, PI2 / 2.0, max_relative = 1e-14);
        assert_relative_eq!(n.h2, LAMBDA1 / 2.0, max_relative = 1e-14);

        let z = ModalState::zeros(4).norms();
        assert_eq!((z.l2, z.h1, z.h2), (0.0, 0.0, 0.0));

        let n = ModalState::at_rest(vec![1.0, 1.0]).norms();
        assert_relative_eq!(n.l2, 2.0);
        assert_relative_eq!(n.h1, PI2 + 4.0 * PI2, max_relative = 1e-14);
        assert_relative_eq!(n.h2, LAMBDA1 + 16.0 * LAMBDA1, max_relative = 1e-14);
    }

    #[test]
    fn physical_evaluation() {
        let s = ModalState::at_rest(vec![0.3, -1.2, 0.7]);
        assert_eq!(evaluate_physical(&s, 0.0).unwrap(), 0.0);
        assert_eq!(evaluate_physical(&s, 1.0).unwrap(), 0.0);
        let one = ModalState::at_rest(vec![1.0 / SQRT_2]);
        assert_relative_eq!(evaluate_physical(&one, 0.5).unwrap(), 1.0, max_relative = 1e-15);
        let two = ModalState::at_rest(vec![0.0, 1.0]);
        assert!(evaluate_physical(&two, 0.5).unwrap().abs() < 1e-15);
        assert!(evaluate_physical(&s, 1.5).is_err());
        assert!(evaluate_physical(&s, -0.1).is_err());
    }

    /// Orthonormality oracle: integrate e_n and its derivatives on a 1000-interval
    /// grid (composite Simpson) and compare to the modal norms.
    #[test]
    fn basis_norms_match_quadrature() {
        let m = 1000;
        let h = 1.0 / m as f64;
        for n in 1..=5 {
            let mut c = vec![0.0; n];
            c[n - 1] = 1.0;
            let modal = norms_of(&c);
            let w = n as f64 * PI;
            let (mut l2, mut h1, mut h2) = (0.0, 0.0, 0.0);
            for i in 0..=m {
                let x = i as f64 * h;
                let wt = if i == 0 || i == m { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                let u = evaluate_modes(&c, x).unwrap();
                let ux = SQRT_2 * w * (w * x).cos();
                let uxx = -w * w * u;
                l2 += wt * u * u;
                h1 += wt * ux * ux;
                h2 += wt * uxx * uxx;
            }
            let s = h / 3.0;
            assert_relative_eq!(l2 * s, modal.l2, max_relative = 1e-6);
            assert_relative_eq!(h1 * s, modal.h1, max_relative = 1e-6);
            assert_relative_eq!(h2 * s, modal.h2, max_relative = 1e-6);
        }
    }

    #[test]
    fn rejects_negative_foundation() {
        assert!(BeamParams::unloaded(0.0, -1.0).is_err());
        let p = BeamParams::new(1.0, 2.0, vec![0.5]).unwrap();
        assert_eq!(p.f(1), 0.5);
        assert_eq!(p.f(7), 0.0);
        assert!(p.check_truncation(1).is_ok());
        assert!(BeamParams::new(0.0, 0.0, vec![0.0, 0.0, 1.0]).unwrap().check_truncation(2).is_err());
    }

    proptest! {
        #[test]
        fn poincare_chain(c in proptest::collection::vec(-10.0f64..10.0, 1..24)) {
            let n = norms_of(&c);
            let tol = 1e-12 * (1.0 + n.h2);
            prop_assert!(n.h2 + tol >= PI2 * n.h1);
            prop_assert!(n.h1 + tol >= PI2 * n.l2);
        }
    }
}
