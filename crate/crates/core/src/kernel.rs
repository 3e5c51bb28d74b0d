//! Memory kernels `μ(s)` with `μ' + δμ ≤ 0` and total mass `κ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-sample tolerance of the discrete decay check for tabulated kernels.
pub const TABLE_DECAY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum MemoryKernel {
    /// `μ ≡ 0`: the purely elastic beam, used as the conservative reference case.
    Memoryless,
    /// `μ(s) = κ δ e^{−δs}`.
    Exponential { delta: f64, kappa: f64 },
    Tabulated(TabulatedKernel),
}

/// Samples `μ_i = μ(i·ds)` on a uniform grid starting at `s = 0`. Beyond the
/// last sample the kernel continues as `μ_last e^{−δ(s − s_last)}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabulatedKernel {
    pub delta: f64,
    pub kappa: f64,
    pub ds: f64,
    pub values: Vec<f64>,
}

impl MemoryKernel {
    pub fn exponential(delta: f64, kappa: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidKernel(format!("decay rate must be > 0, got {delta}")));
        }
        if !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::InvalidKernel(format!("total mass must be > 0, got {kappa}")));
        }
        Ok(MemoryKernel::Exponential { delta, kappa })
    }

    /// Builds a tabulated kernel from `(s_i, μ_i)` pairs on a uniform grid with `s_0 = 0`.
    pub fn tabulated(delta: f64, kappa: f64, samples: &[(f64, f64)]) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InvalidKernel("table needs at least two samples".into()));
        }
        if samples[0].0.abs() > 1e-12 {
            return Err(Error::InvalidKernel("table must start at s = 0".into()));
        }
        let ds = samples[1].0 - samples[0].0;
        if !(ds > 0.0) {
            return Err(Error::InvalidKernel("table grid must be increasing".into()));
        }
        for (i, w) in samples.windows(2).enumerate() {
            let step = w[1].0 - w[0].0;
            if (step - ds).abs() > 1e-9 * ds.max(1.0) {
                return Err(Error::InvalidKernel(format!("non-uniform grid at sample {}", i + 1)));
            }
        }
        let values: Vec<f64> = samples.iter().map(|s| s.1).collect();
        MemoryKernel::from_table(delta, kappa, ds, values)
    }

    pub fn from_table(delta: f64, kappa: f64, ds: f64, values: Vec<f64>) -> Result<Self> {
        if !(delta > 0.0) || !(kappa > 0.0) || !(ds > 0.0) {
            return Err(Error::InvalidKernel("delta, kappa and ds must be positive".into()));
        }
        let table = TabulatedKernel { delta, kappa, ds, values };
        table.validate()?;
        Ok(MemoryKernel::Tabulated(table))
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            MemoryKernel::Memoryless => Ok(()),
            MemoryKernel::Exponential { delta, kappa } => Self::exponential(*delta, *kappa).map(|_| ()),
            MemoryKernel::Tabulated(t) => t.validate(),
        }
    }

    pub fn is_memoryless(&self) -> bool {
        matches!(self, MemoryKernel::Memoryless)
    }

    /// Decay rate `δ`. The memoryless kernel reports 0.
    pub fn delta(&self) -> f64 {
        match self {
            MemoryKernel::Memoryless => 0.0,
            MemoryKernel::Exponential { delta, .. } => *delta,
            MemoryKernel::Tabulated(t) => t.delta,
        }
    }

    /// Nominal total mass `κ`.
    pub fn kappa(&self) -> f64 {
        match self {
            MemoryKernel::Memoryless => 0.0,
            MemoryKernel::Exponential { kappa, .. } => *kappa,
            MemoryKernel::Tabulated(t) => t.kappa,
        }
    }

    pub fn eval(&self, s: f64) -> f64 {
        match self {
            MemoryKernel::Memoryless => 0.0,
            MemoryKernel::Exponential { delta, kappa } => kappa * delta * (-delta * s).exp(),
            MemoryKernel::Tabulated(t) => t.eval(s),
        }
    }

    /// `−μ'(s)`; finite differences of the table for tabulated kernels.
    pub fn neg_derivative(&self, s: f64) -> f64 {
        match self {
            MemoryKernel::Memoryless => 0.0,
            MemoryKernel::Exponential { delta, .. } => delta * self.eval(s),
            MemoryKernel::Tabulated(t) => t.neg_derivative(s),
        }
    }

    /// `∫_s^∞ μ`.
    pub fn tail_mass(&self, s: f64) -> f64 {
        match self {
            MemoryKernel::Memoryless => 0.0,
            MemoryKernel::Exponential { delta, kappa } => kappa * (-delta * s).exp(),
            MemoryKernel::Tabulated(t) => t.tail_mass(s),
        }
    }

    /// `∫_0^∞ μ` as represented (exact for exponential kernels).
    pub fn mass(&self) -> f64 {
        self.tail_mass(0.0)
    }
}

impl TabulatedKernel {
    fn s_last(&self) -> f64 {
        (self.values.len() - 1) as f64 * self.ds
    }

    fn validate(&self) -> Result<()> {
        let v = &self.values;
        if v.len() < 2 {
            return Err(Error::InvalidKernel("table needs at least two samples".into()));
        }
        if let Some(i) = v.iter().position(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::InvalidKernel(format!("sample {i} is negative or not finite")));
        }
        // Discrete form of μ' + δμ ≤ 0 integrated over one cell: μ_{i+1} ≤ μ_i e^{−δ ds}.
        let factor = (-self.delta * self.ds).exp();
        for i in 0..v.len() - 1 {
            if v[i + 1] > v[i] {
                return Err(Error::InvalidKernel(format!("table increases at sample {}", i + 1)));
            }
            if v[i + 1] - v[i] * factor > TABLE_DECAY_TOL {
                return Err(Error::InvalidKernel(format!(
                    "decay slower than rate {} at sample {}",
                    self.delta,
                    i + 1
                )));
            }
        }
        let mass = self.tail_mass(0.0);
        if (mass - self.kappa).abs() > 0.01 * self.kappa {
            return Err(Error::InvalidKernel(format!(
                "table mass {mass} differs from kappa {} by more than 1%",
                self.kappa
            )));
        }
        Ok(())
    }

    fn eval(&self, s: f64) -> f64 {
        if s < 0.0 {
            return self.values[0];
        }
        let last = self.values.len() - 1;
        let x = s / self.ds;
        let i = x.floor() as usize;
        if i >= last {
            return self.values[last] * (-self.delta * (s - self.s_last())).exp();
        }
        let frac = x - i as f64;
        self.values[i] * (1.0 - frac) + self.values[i + 1] * frac
    }

    fn neg_derivative(&self, s: f64) -> f64 {
        let last = self.values.len() - 1;
        if s >= self.s_last() {
            return self.delta * self.eval(s);
        }
        let i = ((s / self.ds).round() as usize).min(last);
        let v = &self.values;
        let d = if i == 0 {
            (v[1] - v[0]) / self.ds
        } else if i == last {
            (v[last] - v[last - 1]) / self.ds
        } else {
            (v[i + 1] - v[i - 1]) / (2.0 * self.ds)
        };
        -d
    }

    fn tail_mass(&self, s: f64) -> f64 {
        let s_last = self.s_last();
        let exp_tail = |from: f64| self.values[self.values.len() - 1] * (-self.delta * (from - s_last)).exp() / self.delta;
        if s >= s_last {
            return exp_tail(s);
        }
        // partial first cell, then whole cells by trapezoid
        let s = s.max(0.0);
        let i0 = (s / self.ds).floor() as usize;
        let next = (i0 + 1) as f64 * self.ds;
        let mut acc = 0.5 * (self.eval(s) + self.values[i0 + 1]) * (next - s);
        for i in i0 + 1..self.values.len() - 1 {
            acc += 0.5 * (self.values[i] + self.values[i + 1]) * self.ds;
        }
        acc + exp_tail(s_last)
    }
}
