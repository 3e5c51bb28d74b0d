//! Time integration of the Galerkin-truncated history-space system
//!
//! ```text
//! c̈_n + λ_n c_n + λ_n ∫μ(s) η_n(t,s) ds + (β + Σ_m m²π² c_m²) n²π² c_n + k c_n = f_n
//! ∂_t η_n = −∂_s η_n + ċ_n
//! ```
//!
//! Two memory backends are available:
//! - [`Backend::OdeReduction`]: exact moment reduction for exponential kernels
//!   (see [`moments`]), advanced with classical RK4;
//! - [`Backend::HistoryQuadrature`]: buffered past displacement, trapezoid
//!   quadrature of the memory term and kick-drift-kick leapfrog with the
//!   memory force evaluated at whole steps. Works for any admissible kernel.
//!
//! The monitors of every [`TrajectorySample`] are squared norms.

pub mod monitors;
pub(crate) mod moments;

use serde::{Deserialize, Serialize};
use std::io::Write;

use crate::error::{Error, Result};
use crate::fmt::sci;
use crate::history::{HistoryTable, MomentHistory, SampledHistory};
use crate::kernel::MemoryKernel;
use crate::spectral::{eigenvalue, BeamParams, ModalState};
use moments::{ModalCoefficients, MomentSystem, Rk4};
pub use monitors::{augmented_energy, default_phi_eps, energy, lyapunov, phi, phi_constants, PhiValue};

/// States with any component above this magnitude are treated as blown up.
const BLOWUP_LIMIT: f64 = 1e100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    #[default]
    OdeReduction,
    HistoryQuadrature,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    #[serde(default)]
    pub backend: Backend,
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub t_final: f64,
    #[serde(default = "default_sample_every")]
    pub sample_every: usize,
    #[serde(default = "default_s_max_tol")]
    pub s_max_tol: f64,
    /// `s`-grid step of the quadrature backend; defaults to `dt`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ds: Option<f64>,
    /// `ε` of the `Φ` monitor; defaults to `½·min(1, k)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi_eps: Option<f64>,
}

fn default_dt() -> f64 {
    1e-3
}
fn default_sample_every() -> usize {
    10
}
fn default_s_max_tol() -> f64 {
    1e-8
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            backend: Backend::OdeReduction,
            dt: default_dt(),
            t_final: 10.0,
            sample_every: default_sample_every(),
            s_max_tol: default_s_max_tol(),
            ds: None,
            phi_eps: None,
        }
    }
}

/// Largest admissible step for `modes` modes: `2/√(λ_N(1+κ))`.
///
/// High modes oscillate at `√λ_N` and the memory adds up to `κλ_N` stiffness;
/// both explicit schemes are stable below this step.
pub fn max_stable_dt(modes: usize, kernel: &MemoryKernel) -> f64 {
    2.0 / (eigenvalue(modes) * (1.0 + kernel.kappa())).sqrt()
}

impl IntegratorConfig {
    pub fn validate(&self, modes: usize, kernel: &MemoryKernel) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::InvalidParameter(format!("t_final must be > 0, got {}", self.t_final)));
        }
        if self.sample_every == 0 {
            return Err(Error::InvalidParameter("sample_every must be positive".into()));
        }
        if !(self.s_max_tol > 0.0 && self.s_max_tol < 1.0) {
            return Err(Error::InvalidParameter("s_max_tol must lie in (0, 1)".into()));
        }
        let bound = max_stable_dt(modes, kernel);
        if self.dt > bound {
            return Err(Error::InvalidParameter(format!(
                "dt = {} exceeds the stability bound {bound:.6e} for N = {modes}",
                self.dt
            )));
        }
        match (self.backend, kernel) {
            (Backend::OdeReduction, MemoryKernel::Tabulated(_)) => Err(Error::Unsupported(
                "the ode_reduction backend needs an exponential kernel; use history_quadrature".into(),
            )),
            (Backend::HistoryQuadrature, MemoryKernel::Memoryless) => Err(Error::Unsupported(
                "the history_quadrature backend needs a nonzero kernel".into(),
            )),
            _ => Ok(()),
        }
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitialHistory {
    /// `u★(t) = u₀` for `t ≤ 0`, hence `η₀ = 0`.
    #[default]
    Zero,
    Table(HistoryTable),
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialData {
    pub state: ModalState,
    pub history: InitialHistory,
}

impl InitialData {
    pub fn at(state: ModalState) -> Self {
        InitialData { state, history: InitialHistory::Zero }
    }

    pub fn modes(&self) -> usize {
        self.state.modes()
    }

    /// `‖z‖²_{𝓗₀}` of the initial datum.
    pub fn energy(&self, kernel: &MemoryKernel) -> f64 {
        let eta = match &self.history {
            InitialHistory::Zero => 0.0,
            InitialHistory::Table(t) => MomentHistory::from_table(t, kernel, self.modes()).norm_sq(),
        };
        energy(&self.state.norms(), self.state.velocity_norm_sq(), eta)
    }

    /// `𝓛(z)`.
    pub fn lyapunov(&self, params: &BeamParams, kernel: &MemoryKernel) -> f64 {
        let eta = match &self.history {
            InitialHistory::Zero => 0.0,
            InitialHistory::Table(t) => MomentHistory::from_table(t, kernel, self.modes()).norm_sq(),
        };
        lyapunov(&self.state, eta, params)
    }
}

/// Monitor row. Norm columns are squared norms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Monitors {
    /// `𝓔 = ‖u‖₂² + ‖∂_t u‖² + ‖η‖²_{0,μ}`.
    pub energy: f64,
    pub augmented: f64,
    pub lyapunov: f64,
    pub phi: f64,
    pub norm_u: f64,
    pub norm_u1: f64,
    pub norm_u2: f64,
    pub norm_ut: f64,
    pub norm_eta: f64,
    pub j_eta: f64,
    /// `∫₀^t 𝒥(η)`, the accumulated memory dissipation.
    pub dissipated: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySample {
    pub t: f64,
    pub state: ModalState,
    /// `∫μ η_n ds` per mode.
    pub memory: Vec<f64>,
    pub monitors: Monitors,
}

/// Restart data for either backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Snapshot {
    Moments {
        t: f64,
        c: Vec<f64>,
        cdot: Vec<f64>,
        w: Vec<f64>,
        m: Vec<f64>,
    },
    Sampled {
        t: f64,
        c: Vec<f64>,
        cdot: Vec<f64>,
        step: f64,
        ds: f64,
        /// `past[n][j] = c_n(t − j·step)`.
        past: Vec<Vec<f64>>,
    },
}

impl Snapshot {
    pub fn t(&self) -> f64 {
        match self {
            Snapshot::Moments { t, .. } | Snapshot::Sampled { t, .. } => *t,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
    pub snapshot: Snapshot,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn energies(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.monitors.energy).collect()
    }

    pub fn last(&self) -> &TrajectorySample {
        self.samples.last().expect("trajectory has at least the initial sample")
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,E_cal,E_aug,L,Phi,norm_u,norm_u1,norm_u2,norm_ut,norm_eta_mu,J_eta")?;
        for s in &self.samples {
            let m = &s.monitors;
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                sci(s.t),
                sci(m.energy),
                sci(m.augmented),
                sci(m.lyapunov),
                sci(m.phi),
                sci(m.norm_u),
                sci(m.norm_u1),
                sci(m.norm_u2),
                sci(m.norm_ut),
                sci(m.norm_eta),
                sci(m.j_eta)
            )?;
        }
        Ok(())
    }
}

enum Engine {
    Moments { system: MomentSystem, y: Vec<f64>, rk: Rk4 },
    Quadrature(QuadratureEngine),
}

struct QuadratureEngine {
    coef: ModalCoefficients,
    beta: f64,
    c: Vec<f64>,
    v: Vec<f64>,
    w: Vec<f64>,
    a: Vec<f64>,
    history: SampledHistory,
    dissipated: f64,
    last_j: f64,
    last_j_step: usize,
}

impl QuadratureEngine {
    fn refresh_accel(&mut self) {
        let s = self.beta + self.coef.h1_sq(&self.c);
        for n in 0..self.c.len() {
            self.w[n] = self.history.memory_moment(n);
            self.a[n] = self.coef.accel(n, self.c[n], self.w[n], s);
        }
    }

    fn step(&mut self, dt: f64) {
        let half = 0.5 * dt;
        for n in 0..self.c.len() {
            self.v[n] += half * self.a[n];
            self.c[n] += dt * self.v[n];
        }
        self.history.push(&self.c);
        self.refresh_accel();
        for n in 0..self.c.len() {
            self.v[n] += half * self.a[n];
        }
    }
}

/// A running integration of the beam system.
pub struct Simulation {
    params: BeamParams,
    kernel: MemoryKernel,
    cfg: IntegratorConfig,
    phi_eps: f64,
    step_index: usize,
    t0: f64,
    engine: Engine,
}

impl Simulation {
    pub fn new(params: &BeamParams, kernel: &MemoryKernel, init: &InitialData, cfg: &IntegratorConfig) -> Result<Self> {
        let modes = init.modes();
        Self::check(params, kernel, cfg, modes)?;
        if let InitialHistory::Table(t) = &init.history {
            t.validate(modes)?;
        }
        let engine = match cfg.backend {
            Backend::OdeReduction => {
                let system = MomentSystem { coef: Self::coefficients(params, kernel, modes), beta: params.beta };
                let moments = match &init.history {
                    InitialHistory::Zero => MomentHistory::zeros(modes),
                    InitialHistory::Table(t) => MomentHistory::from_table(t, kernel, modes),
                };
                let mut y = Vec::with_capacity(system.len());
                y.extend_from_slice(&init.state.c);
                y.extend_from_slice(&init.state.cdot);
                y.extend_from_slice(&moments.w);
                y.extend_from_slice(&moments.m);
                y.push(0.0);
                let rk = Rk4::new(y.len());
                Engine::Moments { system, y, rk }
            }
            Backend::HistoryQuadrature => {
                let table = match &init.history {
                    InitialHistory::Zero => None,
                    InitialHistory::Table(t) => Some(t),
                };
                let history = SampledHistory::new(
                    kernel,
                    &init.state.c,
                    table,
                    cfg.dt,
                    cfg.ds.unwrap_or(cfg.dt),
                    cfg.s_max_tol,
                )?;
                Engine::Quadrature(Self::quadrature_engine(params, kernel, &init.state, history))
            }
        };
        Ok(Self::assemble(params, kernel, cfg, 0.0, engine))
    }

    /// Resumes from a snapshot written by [`Simulation::snapshot`].
    pub fn resume(params: &BeamParams, kernel: &MemoryKernel, snap: &Snapshot, cfg: &IntegratorConfig) -> Result<Self> {
        match snap {
            Snapshot::Moments { t, c, cdot, w, m } => {
                if cfg.backend != Backend::OdeReduction {
                    return Err(Error::InvalidParameter("moment snapshot needs the ode_reduction backend".into()));
                }
                let modes = c.len();
                if [cdot.len(), w.len(), m.len()].iter().any(|&l| l != modes) {
                    return Err(Error::InvalidParameter("snapshot vectors have inconsistent lengths".into()));
                }
                Self::check(params, kernel, cfg, modes)?;
                let system = MomentSystem { coef: Self::coefficients(params, kernel, modes), beta: params.beta };
                let mut y: Vec<f64> = [c.as_slice(), cdot, w, m].concat();
                y.push(0.0);
                let rk = Rk4::new(y.len());
                Ok(Self::assemble(params, kernel, cfg, *t, Engine::Moments { system, y, rk }))
            }
            Snapshot::Sampled { t, c, cdot, step, ds, past } => {
                if cfg.backend != Backend::HistoryQuadrature {
                    return Err(Error::InvalidParameter("sampled snapshot needs the history_quadrature backend".into()));
                }
                if (step - cfg.dt).abs() > 1e-15 * step || (ds - cfg.ds.unwrap_or(cfg.dt)).abs() > 1e-15 * ds {
                    return Err(Error::InvalidParameter("snapshot grid differs from the configured dt/ds".into()));
                }
                let modes = c.len();
                Self::check(params, kernel, cfg, modes)?;
                let state = ModalState::new(c.clone(), cdot.clone())?;
                let mut history = SampledHistory::new(kernel, c, None, *step, *ds, cfg.s_max_tol)?;
                history.restore_rows(past)?;
                let engine = Self::quadrature_engine(params, kernel, &state, history);
                Ok(Self::assemble(params, kernel, cfg, *t, Engine::Quadrature(engine)))
            }
        }
    }

    fn check(params: &BeamParams, kernel: &MemoryKernel, cfg: &IntegratorConfig, modes: usize) -> Result<()> {
        params.validate()?;
        params.check_truncation(modes)?;
        kernel.validate()?;
        cfg.validate(modes, kernel)?;
        if let Some(eps) = cfg.phi_eps {
            monitors::check_phi_eps(eps, params.k)?;
        }
        Ok(())
    }

    fn coefficients(params: &BeamParams, kernel: &MemoryKernel, modes: usize) -> ModalCoefficients {
        let f = (1..=modes).map(|n| params.f(n)).collect();
        ModalCoefficients::new(modes, params.k, f, kernel.delta(), kernel.kappa())
    }

    fn quadrature_engine(
        params: &BeamParams,
        kernel: &MemoryKernel,
        state: &ModalState,
        history: SampledHistory,
    ) -> QuadratureEngine {
        let modes = state.modes();
        let mut e = QuadratureEngine {
            coef: Self::coefficients(params, kernel, modes),
            beta: params.beta,
            c: state.c.clone(),
            v: state.cdot.clone(),
            w: vec![0.0; modes],
            a: vec![0.0; modes],
            last_j: history.functional_j(),
            history,
            dissipated: 0.0,
            last_j_step: 0,
        };
        e.refresh_accel();
        e
    }

    fn assemble(params: &BeamParams, kernel: &MemoryKernel, cfg: &IntegratorConfig, t0: f64, engine: Engine) -> Self {
        Simulation {
            params: params.clone(),
            kernel: kernel.clone(),
            phi_eps: cfg.phi_eps.unwrap_or_else(|| monitors::default_phi_eps(params.k)),
            cfg: cfg.clone(),
            step_index: 0,
            t0,
            engine,
        }
    }

    pub fn t(&self) -> f64 {
        self.t0 + self.step_index as f64 * self.cfg.dt
    }

    pub fn config(&self) -> &IntegratorConfig {
        &self.cfg
    }

    pub fn params(&self) -> &BeamParams {
        &self.params
    }

    pub fn kernel(&self) -> &MemoryKernel {
        &self.kernel
    }

    /// Advances one time step.
    pub fn step(&mut self) -> Result<()> {
        let dt = self.cfg.dt;
        match &mut self.engine {
            Engine::Moments { system, y, rk } => {
                rk.step(|y, out| system.rhs(y, out), y, dt);
            }
            Engine::Quadrature(e) => e.step(dt),
        }
        self.step_index += 1;
        self.check_finite()
    }

    fn check_finite(&self) -> Result<()> {
        let bad = match &self.engine {
            Engine::Moments { y, .. } => y.iter().any(|x| !x.is_finite() || x.abs() > BLOWUP_LIMIT),
            Engine::Quadrature(e) => e
                .c
                .iter()
                .chain(&e.v)
                .chain(&e.w)
                .any(|x| !x.is_finite() || x.abs() > BLOWUP_LIMIT),
        };
        if bad {
            return Err(Error::NumericalBlowup {
                t: self.t(),
                detail: "state is not finite; reduce dt or the truncation".into(),
            });
        }
        Ok(())
    }

    pub fn state(&self) -> ModalState {
        match &self.engine {
            Engine::Moments { y, system, .. } => {
                let n = system.coef.modes();
                ModalState { c: y[..n].to_vec(), cdot: y[n..2 * n].to_vec() }
            }
            Engine::Quadrature(e) => ModalState { c: e.c.clone(), cdot: e.v.clone() },
        }
    }

    /// `∫μ η_n ds` per mode.
    pub fn memory(&self) -> Vec<f64> {
        match &self.engine {
            Engine::Moments { y, system, .. } => {
                let n = system.coef.modes();
                y[2 * n..3 * n].to_vec()
            }
            Engine::Quadrature(e) => e.w.clone(),
        }
    }

    /// `(‖η‖²_{0,μ}, 𝒥(η))`.
    pub fn history_functionals(&self) -> (f64, f64) {
        match &self.engine {
            Engine::Moments { y, system, .. } => {
                let n = system.coef.modes();
                let norm: f64 = y[3 * n..4 * n].iter().zip(&system.coef.lambda).map(|(m, l)| l * m).sum();
                (norm, system.coef.delta * norm)
            }
            Engine::Quadrature(e) => (e.history.norm_sq(), e.history.functional_j()),
        }
    }

    /// Accumulated `∫𝒥`. The moment backend integrates it with the state; the
    /// quadrature backend applies the trapezoid rule between monitor rows.
    fn dissipated(&mut self, j_now: f64) -> f64 {
        let dt = self.cfg.dt;
        let step = self.step_index;
        match &mut self.engine {
            Engine::Moments { y, .. } => y[y.len() - 1],
            Engine::Quadrature(e) => {
                if step > e.last_j_step {
                    e.dissipated += 0.5 * (e.last_j + j_now) * (step - e.last_j_step) as f64 * dt;
                    e.last_j = j_now;
                    e.last_j_step = step;
                }
                e.dissipated
            }
        }
    }

    pub fn sample(&mut self) -> TrajectorySample {
        let state = self.state();
        let (eta, j) = self.history_functionals();
        let norms = state.norms();
        let ut = state.velocity_norm_sq();
        let monitors = Monitors {
            energy: energy(&norms, ut, eta),
            augmented: augmented_energy(&state, eta, &self.params),
            lyapunov: lyapunov(&state, eta, &self.params),
            phi: monitors::phi_value(&state, eta, &self.params, self.phi_eps),
            norm_u: norms.l2,
            norm_u1: norms.h1,
            norm_u2: norms.h2,
            norm_ut: ut,
            norm_eta: eta,
            j_eta: j,
            dissipated: self.dissipated(j),
        };
        TrajectorySample { t: self.t(), memory: self.memory(), state, monitors }
    }

    pub fn snapshot(&self) -> Snapshot {
        let t = self.t();
        match &self.engine {
            Engine::Moments { y, system, .. } => {
                let n = system.coef.modes();
                Snapshot::Moments {
                    t,
                    c: y[..n].to_vec(),
                    cdot: y[n..2 * n].to_vec(),
                    w: y[2 * n..3 * n].to_vec(),
                    m: y[3 * n..4 * n].to_vec(),
                }
            }
            Engine::Quadrature(e) => Snapshot::Sampled {
                t,
                c: e.c.clone(),
                cdot: e.v.clone(),
                step: self.cfg.dt,
                ds: e.history.ds(),
                past: e.history.snapshot_rows(),
            },
        }
    }

    /// Runs to `t_final` (relative to the start), sampling every
    /// `sample_every` steps and at the final step. `observe` may stop the run
    /// early by returning `false`.
    pub fn run_with<F>(&mut self, mut observe: F) -> Result<Vec<TrajectorySample>>
    where
        F: FnMut(&TrajectorySample) -> bool,
    {
        let steps = self.cfg.steps();
        let every = self.cfg.sample_every;
        let mut samples = Vec::with_capacity(steps / every + 2);
        let first = self.sample();
        let go_on = observe(&first);
        samples.push(first);
        if !go_on {
            return Ok(samples);
        }
        for i in 1..=steps {
            self.step()?;
            if i % every == 0 || i == steps {
                let s = self.sample();
                let go_on = observe(&s);
                samples.push(s);
                if !go_on {
                    break;
                }
            }
        }
        Ok(samples)
    }

    pub fn run(&mut self) -> Result<Vec<TrajectorySample>> {
        self.run_with(|_| true)
    }
}

/// Integrates from `init` to `cfg.t_final` and returns the monitor rows plus
/// the final snapshot.
pub fn simulate(
    params: &BeamParams,
    kernel: &MemoryKernel,
    init: &InitialData,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    let mut sim = Simulation::new(params, kernel, init, cfg)?;
    let samples = sim.run()?;
    Ok(Trajectory { samples, snapshot: sim.snapshot() })
}

/// Relative discrete-L² distance between the displacement columns of two
/// trajectories sampled at the same times.
pub fn relative_l2_distance(a: &[TrajectorySample], b: &[TrajectorySample]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::InvalidParameter(format!("sample counts differ: {} vs {}", a.len(), b.len())));
    }
    let (mut num, mut den) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        if (x.t - y.t).abs() > 1e-9 * (1.0 + x.t.abs()) {
            return Err(Error::InvalidParameter(format!("sample times differ: {} vs {}", x.t, y.t)));
        }
        for (p, q) in x.state.c.iter().zip(&y.state.c) {
            num += (p - q) * (p - q);
            den += p * p;
        }
    }
    if den == 0.0 {
        return Err(Error::Degenerate("reference trajectory is identically zero".into()));
    }
    Ok((num / den).sqrt())
}
