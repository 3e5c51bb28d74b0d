//! Representations of the relative displacement history `η^t(s) = u(t) − u(t−s)`.
//!
//! Two forms are supported:
//! - moments `w_n = ∫μ η_n ds`, `m_n = ∫μ η_n² ds`, closed under the dynamics
//!   only for exponential kernels;
//! - a sampled past of the modal displacement on a uniform `s`-grid, from which
//!   `η_n(t, s) = c_n(t) − c_n(t − s)` is reconstructed along characteristics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::MemoryKernel;
use crate::spectral::eigenvalue;

/// Hard cap on the number of buffered past values per mode.
const MAX_BUFFER: usize = 50_000_000;

/// Initial history `η₀(s)` per mode on a uniform `s`-grid starting at 0.
/// Past the last node the last value is held.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryTable {
    pub ds: f64,
    /// `values[n][j] = η₀_n(j·ds)` for modes `n = 0..N`.
    pub values: Vec<Vec<f64>>,
}

impl HistoryTable {
    pub fn validate(&self, modes: usize) -> Result<()> {
        if !(self.ds > 0.0) {
            return Err(Error::InvalidParameter("history table step must be positive".into()));
        }
        if self.values.len() > modes {
            return Err(Error::InvalidParameter(format!(
                "history table has {} modes, truncation is {modes}",
                self.values.len()
            )));
        }
        for (n, col) in self.values.iter().enumerate() {
            if col.is_empty() {
                return Err(Error::InvalidParameter(format!("history table mode {} is empty", n + 1)));
            }
            if col[0].abs() > 1e-12 {
                return Err(Error::InvalidParameter(format!(
                    "history must vanish at s = 0 (mode {} has {})",
                    n + 1,
                    col[0]
                )));
            }
            if col.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter("history table has non-finite entries".into()));
            }
        }
        Ok(())
    }

    /// `η₀_n(s)`, `n` zero-based; modes beyond the table are zero.
    pub fn eval(&self, n: usize, s: f64) -> f64 {
        let Some(col) = self.values.get(n) else { return 0.0 };
        let x = (s / self.ds).max(0.0);
        let i = x.floor() as usize;
        if i + 1 >= col.len() {
            return col[col.len() - 1];
        }
        let frac = x - i as f64;
        col[i] * (1.0 - frac) + col[i + 1] * frac
    }

    fn s_end(&self) -> f64 {
        let len = self.values.iter().map(|c| c.len()).max().unwrap_or(1);
        (len - 1) as f64 * self.ds
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentHistory {
    pub w: Vec<f64>,
    pub m: Vec<f64>,
}

impl MomentHistory {
    pub fn zeros(modes: usize) -> Self {
        MomentHistory { w: vec![0.0; modes], m: vec![0.0; modes] }
    }

    /// Moments of an initial history table, by trapezoid quadrature on the table grid
    /// plus the kernel tail times the held last value.
    pub fn from_table(table: &HistoryTable, kernel: &MemoryKernel, modes: usize) -> Self {
        let mut out = Self::zeros(modes);
        let s_end = table.s_end();
        let nodes = (s_end / table.ds).round() as usize + 1;
        for n in 0..modes.min(table.values.len()) {
            let (mut w, mut m) = (0.0, 0.0);
            for j in 0..nodes {
                let s = j as f64 * table.ds;
                let wt = if j == 0 || j + 1 == nodes { 0.5 } else { 1.0 } * table.ds;
                let eta = table.eval(n, s);
                let mu = kernel.eval(s);
                w += wt * mu * eta;
                m += wt * mu * eta * eta;
            }
            let last = table.eval(n, s_end);
            let tail = kernel.tail_mass(s_end);
            out.w[n] = w + tail * last;
            out.m[n] = m + tail * last * last;
        }
        out
    }

    /// `‖η‖²_{0,μ} = Σ λ_n m_n`.
    pub fn norm_sq(&self) -> f64 {
        self.m.iter().enumerate().map(|(i, m)| eigenvalue(i + 1) * m).sum()
    }
}

/// Sampled past of the modal displacement. The buffer resolution equals the
/// time step; the quadrature grid uses every `stride`-th buffered value.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledHistory {
    step: f64,
    stride: usize,
    nodes: usize,
    /// Trapezoid weights times `μ(s_j)`.
    weights: Vec<f64>,
    /// Trapezoid weights times `−μ'(s_j)`.
    dweights: Vec<f64>,
    tail: f64,
    dtail: f64,
    sum_weights: f64,
    len: usize,
    head: usize,
    /// `past[n * len + slot]`, slot `head` holds the current value.
    past: Vec<f64>,
    modes: usize,
}

impl SampledHistory {
    /// Builds the buffer for current displacement `c0`, filling the past from
    /// `c(−τ) = c0 − η₀(τ)`. `s_max` is the smallest grid point whose kernel tail
    /// mass is at most `tail_tol·κ`.
    pub fn new(
        kernel: &MemoryKernel,
        c0: &[f64],
        eta0: Option<&HistoryTable>,
        step: f64,
        ds: f64,
        tail_tol: f64,
    ) -> Result<Self> {
        if kernel.is_memoryless() {
            return Err(Error::Unsupported("sampled history needs a nonzero kernel".into()));
        }
        if !(step > 0.0 && ds > 0.0) {
            return Err(Error::InvalidParameter("history steps must be positive".into()));
        }
        let ratio = ds / step;
        let stride = ratio.round() as usize;
        if stride == 0 || (ratio - stride as f64).abs() > 1e-9 * ratio {
            return Err(Error::InvalidParameter(format!(
                "s-grid step {ds} must be a positive integer multiple of the time step {step}"
            )));
        }
        let kappa = kernel.kappa();
        let mut nodes = 2;
        while kernel.tail_mass((nodes - 1) as f64 * ds) > tail_tol * kappa {
            nodes += 1;
            if nodes * stride > MAX_BUFFER {
                return Err(Error::InvalidParameter(format!(
                    "history window exceeds {MAX_BUFFER} samples; raise s_max_tol or ds"
                )));
            }
        }
        let modes = c0.len();
        let s_max = (nodes - 1) as f64 * ds;
        let mut weights = Vec::with_capacity(nodes);
        let mut dweights = Vec::with_capacity(nodes);
        for j in 0..nodes {
            let s = j as f64 * ds;
            let wt = if j == 0 || j + 1 == nodes { 0.5 * ds } else { ds };
            weights.push(wt * kernel.eval(s));
            dweights.push(wt * kernel.neg_derivative(s));
        }
        let len = (nodes - 1) * stride + 1;
        let mut past = vec![0.0; modes * len];
        for n in 0..modes {
            for slot in 0..len {
                let tau = slot as f64 * step;
                let eta = eta0.map_or(0.0, |t| t.eval(n, tau));
                // slot 0 is "now"; older values are stored at decreasing ring positions
                past[n * len + (len - slot) % len] = c0[n] - eta;
            }
        }
        Ok(SampledHistory {
            step,
            stride,
            nodes,
            sum_weights: weights.iter().sum(),
            weights,
            dweights,
            tail: kernel.tail_mass(s_max),
            dtail: kernel.eval(s_max),
            len,
            head: 0,
            past,
            modes,
        })
    }

    pub fn s_max(&self) -> f64 {
        (self.nodes - 1) as f64 * self.stride as f64 * self.step
    }

    pub fn ds(&self) -> f64 {
        self.stride as f64 * self.step
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    /// Kernel mass beyond `s_max`.
    pub fn tail_mass(&self) -> f64 {
        self.tail
    }

    #[inline]
    fn slot(&self, lag: usize) -> usize {
        (self.head + self.len - lag) % self.len
    }

    /// `c_n(t − j·ds)`.
    #[inline]
    pub fn past_value(&self, n: usize, j: usize) -> f64 {
        self.past[n * self.len + self.slot(j * self.stride)]
    }

    /// `η_n(t, s_j)`.
    pub fn eta(&self, n: usize, j: usize) -> f64 {
        self.past_value(n, 0) - self.past_value(n, j)
    }

    /// Appends the displacement at the next time level.
    pub fn push(&mut self, c: &[f64]) {
        self.head = (self.head + 1) % self.len;
        for (n, &cn) in c.iter().enumerate() {
            self.past[n * self.len + self.head] = cn;
        }
    }

    /// Replaces the current (most recent) displacement without advancing.
    pub fn set_current(&mut self, c: &[f64]) {
        for (n, &cn) in c.iter().enumerate() {
            self.past[n * self.len + self.head] = cn;
        }
    }

    /// `∫₀^∞ μ(s) η_n(t, s) ds`: trapezoid on `[0, s_max]` plus the tail mass times `η_n(s_max)`.
    pub fn memory_moment(&self, n: usize) -> f64 {
        let base = n * self.len;
        let now = self.past[base + self.head];
        let mut conv = 0.0;
        let mut slot = self.head;
        let back = self.stride;
        for &q in &self.weights {
            conv += q * self.past[base + slot];
            slot = if slot >= back { slot - back } else { slot + self.len - back };
        }
        let eta_end = now - self.past_value(n, self.nodes - 1);
        now * self.sum_weights - conv + self.tail * eta_end
    }

    pub fn memory_moments(&self) -> Vec<f64> {
        (0..self.modes).map(|n| self.memory_moment(n)).collect()
    }

    fn weighted_sq(&self, n: usize, w: &[f64], tail: f64) -> f64 {
        let mut acc = 0.0;
        for (j, q) in w.iter().enumerate() {
            let e = self.eta(n, j);
            acc += q * e * e;
        }
        let e = self.eta(n, self.nodes - 1);
        acc + tail * e * e
    }

    /// `∫μ η_n²`.
    pub fn second_moment(&self, n: usize) -> f64 {
        self.weighted_sq(n, &self.weights, self.tail)
    }

    /// `‖η‖²_{0,μ} = Σ λ_n ∫ μ η_n²`.
    pub fn norm_sq(&self) -> f64 {
        (0..self.modes).map(|n| eigenvalue(n + 1) * self.second_moment(n)).sum()
    }

    /// `𝒥(η) = Σ λ_n ∫ (−μ') η_n²`.
    pub fn functional_j(&self) -> f64 {
        (0..self.modes).map(|n| eigenvalue(n + 1) * self.weighted_sq(n, &self.dweights, self.dtail)).sum()
    }

    /// Values `c_n(t − j·ds)` for `j = 0..nodes`, one row per mode.
    pub fn snapshot_rows(&self) -> Vec<Vec<f64>> {
        (0..self.modes)
            .map(|n| (0..self.len).map(|lag| self.past[n * self.len + self.slot(lag)]).collect())
            .collect()
    }

    /// Overwrites the buffer with rows produced by [`snapshot_rows`](Self::snapshot_rows).
    pub fn restore_rows(&mut self, rows: &[Vec<f64>]) -> Result<()> {
        if rows.len() != self.modes || rows.iter().any(|r| r.len() != self.len) {
            return Err(Error::InvalidParameter("history snapshot does not match buffer shape".into()));
        }
        self.head = 0;
        for (n, row) in rows.iter().enumerate() {
            for (lag, v) in row.iter().enumerate() {
                self.past[n * self.len + (self.len - lag) % self.len] = *v;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum HistoryState {
    Moments(MomentHistory),
    Sampled(SampledHistory),
}

impl HistoryState {
    pub fn norm_sq(&self) -> f64 {
        match self {
            HistoryState::Moments(m) => m.norm_sq(),
            HistoryState::Sampled(s) => s.norm_sq(),
        }
    }
}

/// `𝒥(η) = −∫₀^∞ μ'(s) ‖η(s)‖₂² ds`.
///
/// For the moment form the kernel must be exponential (or memoryless), where
/// `−μ' = δμ` gives `𝒥 = δ Σ λ_n m_n`. The sampled form uses quadrature of the
/// kernel derivative (finite differences for tabulated kernels).
pub fn functional_j(history: &HistoryState, kernel: &MemoryKernel) -> Result<f64> {
    match (history, kernel) {
        (HistoryState::Moments(_), MemoryKernel::Memoryless) => Ok(0.0),
        (HistoryState::Moments(m), MemoryKernel::Exponential { delta, .. }) => Ok(delta * m.norm_sq()),
        (HistoryState::Moments(_), MemoryKernel::Tabulated(_)) => Err(Error::Unsupported(
            "moment-form history is only defined for exponential kernels".into(),
        )),
        (HistoryState::Sampled(s), _) => Ok(s.functional_j()),
    }
}
