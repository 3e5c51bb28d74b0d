//! Exponential-kernel reduction: for `μ = κδe^{−δs}` the moments
//! `w_n = ∫μ η_n` and `m_n = ∫μ η_n²` obey, after integrating
//! `∂_t η = −∂_s η + ∂_t u` by parts with `η(0) = 0` and `μ' = −δμ`,
//!
//! ```text
//! ẇ_n = −δ w_n + κ ċ_n,      ṁ_n = −δ m_n + 2 ċ_n w_n
//! ```
//!
//! so the whole system closes on `(c, ċ, w, m)` and is advanced by classical RK4.

use crate::spectral::{eigenvalue, sqrt_eigenvalue};

/// Coefficients of one linear-in-state modal system sharing the scalar
/// `β + ‖u‖₁²` with the reference solution.
#[derive(Debug, Clone)]
pub(crate) struct ModalCoefficients {
    pub lambda: Vec<f64>,
    pub sqrt_lambda: Vec<f64>,
    pub k: f64,
    pub f: Vec<f64>,
    pub delta: f64,
    pub kappa: f64,
}

impl ModalCoefficients {
    pub fn new(modes: usize, k: f64, f: Vec<f64>, delta: f64, kappa: f64) -> Self {
        ModalCoefficients {
            lambda: (1..=modes).map(eigenvalue).collect(),
            sqrt_lambda: (1..=modes).map(sqrt_eigenvalue).collect(),
            k,
            f,
            delta,
            kappa,
        }
    }

    pub fn modes(&self) -> usize {
        self.lambda.len()
    }

    pub fn h1_sq(&self, c: &[f64]) -> f64 {
        c.iter().zip(&self.sqrt_lambda).map(|(c, w)| w * c * c).sum()
    }

    /// `c̈_n = f_n − λ_n c_n − λ_n w_n − s·√λ_n c_n − k c_n`.
    #[inline]
    pub fn accel(&self, n: usize, c: f64, w: f64, s: f64) -> f64 {
        self.f[n] - self.lambda[n] * (c + w) - s * self.sqrt_lambda[n] * c - self.k * c
    }
}

/// State layout: `[c | ċ | w | m | D]` with `D = ∫₀^t 𝒥(η)`.
pub(crate) struct MomentSystem {
    pub coef: ModalCoefficients,
    pub beta: f64,
}

impl MomentSystem {
    pub fn len(&self) -> usize {
        4 * self.coef.modes() + 1
    }

    pub fn rhs(&self, y: &[f64], out: &mut [f64]) {
        let n = self.coef.modes();
        let (c, rest) = y.split_at(n);
        let (v, rest) = rest.split_at(n);
        let (w, rest) = rest.split_at(n);
        let m = &rest[..n];
        let s = self.beta + self.coef.h1_sq(c);
        let (d, k) = (self.coef.delta, self.coef.kappa);
        let mut diss = 0.0;
        for i in 0..n {
            out[i] = v[i];
            out[n + i] = self.coef.accel(i, c[i], w[i], s);
            out[2 * n + i] = -d * w[i] + k * v[i];
            out[3 * n + i] = -d * m[i] + 2.0 * v[i] * w[i];
            diss += self.coef.lambda[i] * m[i];
        }
        out[4 * n] = d * diss;
    }
}

/// Workspace for classical fourth-order Runge–Kutta on a fixed-size state.
pub(crate) struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    pub fn new(len: usize) -> Self {
        Rk4 { k1: vec![0.0; len], k2: vec![0.0; len], k3: vec![0.0; len], k4: vec![0.0; len], tmp: vec![0.0; len] }
    }

    pub fn step<F: Fn(&[f64], &mut [f64])>(&mut self, f: F, y: &mut [f64], h: f64) {
        f(y, &mut self.k1);
        for i in 0..y.len() {
            self.tmp[i] = y[i] + 0.5 * h * self.k1[i];
        }
        f(&self.tmp, &mut self.k2);
        for i in 0..y.len() {
            self.tmp[i] = y[i] + 0.5 * h * self.k2[i];
        }
        f(&self.tmp, &mut self.k3);
        for i in 0..y.len() {
            self.tmp[i] = y[i] + h * self.k3[i];
        }
        f(&self.tmp, &mut self.k4);
        for i in 0..y.len() {
            y[i] += h / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }
}
