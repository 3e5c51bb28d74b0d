//! Numerical exploration of the global attractor.
//!
//! [`split_simulate`] co-integrates the solution `S(t)z` with the two linear
//! systems of the decomposition `S(t)z = L(t)z + K(t)z`:
//!
//! ```text
//! v̈ + Av + ∫μAξ + (β + ‖u‖₁²)A^{1/2}v + αv + kv = 0,   (v, v̇, ξ)(0) = z
//! ẅ + Aw + ∫μAζ + (β + ‖u‖₁²)A^{1/2}w − αv + kw = f,   (w, ẇ, ζ)(0) = 0
//! ```
//!
//! The scalar `β + ‖u‖₁²` is taken from the stage values of the `u`-system, so
//! each RK4 stage of `v + w` reproduces the `u` stage and the sum identity holds
//! to roundoff.
//!
//! [`connection_graph`] perturbs every equilibrium along low modes and follows
//! the gradient-like flow until it settles near another equilibrium.

use serde::Serialize;
use std::f64::consts::PI;
use std::io::Write;

use crate::dynamics::moments::{ModalCoefficients, Rk4};
use crate::dynamics::{lyapunov, IntegratorConfig, InitialData, InitialHistory, Simulation, TrajectorySample};
use crate::error::{Error, Result};
use crate::fmt::sci;
use crate::history::MomentHistory;
use crate::kernel::MemoryKernel;
use crate::par::{map_slice, Execution};
use crate::spectral::{BeamParams, ModalState};
use crate::statics::{enumerate_equilibria, Classification, Sign, DEFAULT_RESONANCE_TOL};

const PI2: f64 = PI * PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SplitConstants {
    pub alpha: f64,
    pub gamma: f64,
    /// `sup_{x ≥ π²} (x² + βx + γ)/x²`.
    pub m: f64,
}

/// `γ = max(1, β²/2 + 1)` makes `½x² + βx + γ ≥ 1` for all `x`; `α = γ − k`,
/// raised to 1 (with `γ = 1 + k`) when the foundation is stiffer than `γ`.
pub fn split_constants(beta: f64, k: f64) -> SplitConstants {
    let mut gamma = (0.5 * beta * beta + 1.0).max(1.0);
    let mut alpha = gamma - k;
    if alpha < 1.0 {
        alpha = 1.0;
        gamma = 1.0 + k;
    }
    // (x² + βx + γ)/x² = 1 + βt + γt² with t = 1/x ∈ (0, 1/π²] is convex in t,
    // so the sup sits at an end of the interval.
    let m = (1.0 + beta / PI2 + gamma / (PI2 * PI2)).max(1.0);
    SplitConstants { alpha, gamma, m }
}

/// Checks `½λ_n ≤ λ_n + β√λ_n + γ ≤ m λ_n` for `n = 1..=modes`.
pub fn check_split_constants(beta: f64, c: &SplitConstants, modes: usize) -> bool {
    (1..=modes).all(|n| {
        let s = (n * n) as f64 * PI2;
        let l = s * s;
        let q = l + beta * s + c.gamma;
        q >= 0.5 * l && q <= c.m * l * (1.0 + 1e-14)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SplitSample {
    pub t: f64,
    /// `‖S(t)z‖_{𝓗₀}`.
    pub norm_u: f64,
    /// `‖L(t)z‖_{𝓗₀}`.
    pub norm_v_h0: f64,
    /// `‖K(t)z‖_{𝓗₂}`.
    pub norm_w_h2: f64,
    /// `𝓗₀` size of `v + w − u`; the memory part is measured through the
    /// first moments, `Σ λ_n (Δw_n)²/κ`.
    pub sum_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitTrajectory {
    pub constants: SplitConstants,
    pub samples: Vec<SplitSample>,
}

impl SplitTrajectory {
    pub fn max_sum_error(&self) -> f64 {
        self.samples.iter().map(|s| s.sum_error).fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,norm_u,norm_v_H0,norm_w_H2,sum_error")?;
        for s in &self.samples {
            writeln!(
                out,
                "{},{},{},{},{}",
                sci(s.t),
                sci(s.norm_u),
                sci(s.norm_v_h0),
                sci(s.norm_w_h2),
                sci(s.sum_error)
            )?;
        }
        Ok(())
    }
}

/// Three copies of `[c | ċ | w | m]` for the `u`, `v` and `w` systems.
struct SplitSystem {
    coef: ModalCoefficients,
    beta: f64,
    alpha: f64,
}

impl SplitSystem {
    fn block(&self) -> usize {
        4 * self.coef.modes()
    }

    fn rhs(&self, y: &[f64], out: &mut [f64]) {
        let n = self.coef.modes();
        let b = self.block();
        let s = self.beta + self.coef.h1_sq(&y[..n]);
        let (d, kappa) = (self.coef.delta, self.coef.kappa);
        for sys in 0..3 {
            let base = sys * b;
            for i in 0..n {
                let c = y[base + i];
                let v = y[base + n + i];
                let w = y[base + 2 * n + i];
                let m = y[base + 3 * n + i];
                let elastic = -self.coef.lambda[i] * (c + w) - s * self.coef.sqrt_lambda[i] * c - self.coef.k * c;
                let acc = match sys {
                    0 => elastic + self.coef.f[i],
                    1 => elastic - self.alpha * c,
                    _ => elastic + self.coef.f[i] + self.alpha * y[b + i],
                };
                out[base + i] = v;
                out[base + n + i] = acc;
                out[base + 2 * n + i] = -d * w + kappa * v;
                out[base + 3 * n + i] = -d * m + 2.0 * v * w;
            }
        }
    }

    fn sample(&self, t: f64, y: &[f64]) -> SplitSample {
        let n = self.coef.modes();
        let b = self.block();
        let lam = &self.coef.lambda;
        let h0 = |base: usize| -> f64 {
            (0..n)
                .map(|i| {
                    lam[i] * y[base + i].powi(2) + y[base + n + i].powi(2) + lam[i] * y[base + 3 * n + i]
                })
                .sum::<f64>()
                .max(0.0)
                .sqrt()
        };
        let h2 = |base: usize| -> f64 {
            (0..n)
                .map(|i| {
                    let l2 = lam[i] * lam[i];
                    l2 * y[base + i].powi(2) + lam[i] * y[base + n + i].powi(2) + l2 * y[base + 3 * n + i]
                })
                .sum::<f64>()
                .max(0.0)
                .sqrt()
        };
        let mut err = 0.0;
        for i in 0..n {
            let dc = y[b + i] + y[2 * b + i] - y[i];
            let dv = y[b + n + i] + y[2 * b + n + i] - y[n + i];
            err += lam[i] * dc * dc + dv * dv;
            if self.coef.kappa > 0.0 {
                let dw = y[b + 2 * n + i] + y[2 * b + 2 * n + i] - y[2 * n + i];
                err += lam[i] * dw * dw / self.coef.kappa;
            }
        }
        SplitSample { t, norm_u: h0(0), norm_v_h0: h0(b), norm_w_h2: h2(2 * b), sum_error: err.sqrt() }
    }
}

pub fn split_simulate(
    z: &InitialData,
    params: &BeamParams,
    kernel: &MemoryKernel,
    cfg: &IntegratorConfig,
) -> Result<SplitTrajectory> {
    if matches!(kernel, MemoryKernel::Tabulated(_)) {
        return Err(Error::Unsupported("the split decomposition is integrated in moment form; use an exponential kernel".into()));
    }
    let modes = z.modes();
    params.validate()?;
    params.check_truncation(modes)?;
    let constants = split_constants(params.beta, params.k);
    // the v-system carries the extra stiffness α on top of k
    let mut stiff_cfg = cfg.clone();
    stiff_cfg.backend = crate::dynamics::Backend::OdeReduction;
    stiff_cfg.validate(modes, kernel)?;
    let f: Vec<f64> = (1..=modes).map(|n| params.f(n)).collect();
    let system = SplitSystem {
        coef: ModalCoefficients::new(modes, params.k, f, kernel.delta(), kernel.kappa()),
        beta: params.beta,
        alpha: constants.alpha,
    };
    let moments = match &z.history {
        InitialHistory::Zero => MomentHistory::zeros(modes),
        InitialHistory::Table(t) => {
            t.validate(modes)?;
            MomentHistory::from_table(t, kernel, modes)
        }
    };
    let block: Vec<f64> = [z.state.c.as_slice(), &z.state.cdot, &moments.w, &moments.m].concat();
    let mut y = Vec::with_capacity(3 * block.len());
    y.extend_from_slice(&block);
    y.extend_from_slice(&block);
    y.extend(std::iter::repeat_n(0.0, block.len()));

    let mut rk = Rk4::new(y.len());
    let steps = cfg.steps();
    let mut samples = vec![system.sample(0.0, &y)];
    for i in 1..=steps {
        rk.step(|y, o| system.rhs(y, o), &mut y, cfg.dt);
        let t = i as f64 * cfg.dt;
        if y.iter().any(|x| !x.is_finite() || x.abs() > 1e100) {
            return Err(Error::NumericalBlowup { t, detail: "split system is not finite".into() });
        }
        if i % cfg.sample_every == 0 || i == steps {
            samples.push(system.sample(t, &y));
        }
    }
    Ok(SplitTrajectory { constants, samples })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Node {
    pub id: usize,
    pub n: usize,
    pub sign: Sign,
    pub amplitude: f64,
    pub lyapunov: f64,
    #[serde(skip)]
    pub modal: ModalState,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub mode: usize,
    pub sign: Sign,
    pub eps: f64,
    pub t_transit: f64,
    pub final_dist: f64,
}

/// A probe that ended away from every equilibrium.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Unresolved {
    pub src: usize,
    pub mode: usize,
    pub sign: Sign,
    pub eps: f64,
    pub t_final: f64,
    pub nearest: usize,
    pub final_dist: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConnectionGraph {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    pub unresolved: Vec<Unresolved>,
    /// Probes that settled back on their source.
    pub returns: Vec<Edge>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraphOptions {
    pub perturb_eps: f64,
    pub t_max: f64,
    pub tol: f64,
    /// No early exit before this time, so that tiny perturbations are not
    /// classified before they have moved.
    pub min_time: f64,
}

impl Default for GraphOptions {
    fn default() -> Self {
        GraphOptions { perturb_eps: 1e-2, t_max: 500.0, tol: 1e-2, min_time: 1.0 }
    }
}

/// `𝓗₀` distance from a sample to the rest state `(u_eq, 0, 0)`.
pub fn distance_to(sample: &TrajectorySample, eq: &ModalState) -> f64 {
    let d: f64 = sample
        .state
        .c
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let e = eq.c.get(i).copied().unwrap_or(0.0);
            crate::spectral::eigenvalue(i + 1) * (c - e) * (c - e)
        })
        .sum();
    (d + sample.monitors.norm_ut + sample.monitors.norm_eta).sqrt()
}

fn nearest(sample: &TrajectorySample, nodes: &[Node]) -> (usize, f64) {
    nodes
        .iter()
        .map(|n| (n.id, distance_to(sample, &n.modal)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("graph has at least the zero node")
}

/// Builds the connection graph with `modes` Galerkin modes. `cfg.t_final` is
/// replaced by `opts.t_max`.
pub fn connection_graph(
    params: &BeamParams,
    kernel: &MemoryKernel,
    cfg: &IntegratorConfig,
    modes: usize,
    opts: &GraphOptions,
    exec: Execution,
) -> Result<ConnectionGraph> {
    let set = enumerate_equilibria(params, DEFAULT_RESONANCE_TOL)?;
    if set.classification == Classification::Infinite {
        return Err(Error::Unsupported(
            "the stationary set is infinite (resonant foundation stiffness below the non-simple level); \
             connection graphs need finitely many equilibria"
                .into(),
        ));
    }
    let probes_per_node = set.n_star + 1;
    if modes < probes_per_node {
        return Err(Error::InvalidParameter(format!(
            "truncation N = {modes} is below the probed modes 1..={probes_per_node}"
        )));
    }
    if !(opts.tol > 0.0 && opts.perturb_eps != 0.0 && opts.t_max > 0.0) {
        return Err(Error::InvalidParameter("tol, eps and t_max must be positive".into()));
    }
    let nodes: Vec<Node> = set
        .equilibria
        .iter()
        .enumerate()
        .map(|(id, e)| {
            let modal = e.modal.resized(modes);
            Node {
                id,
                n: e.mode_index,
                sign: e.sign,
                amplitude: e.physical_amplitude,
                lyapunov: lyapunov(&modal, 0.0, params),
                modal,
            }
        })
        .collect();

    let mut run_cfg = cfg.clone();
    run_cfg.t_final = opts.t_max;
    run_cfg.validate(modes, kernel)?;

    let jobs: Vec<(usize, usize, Sign)> = nodes
        .iter()
        .flat_map(|n| (1..=probes_per_node).flat_map(move |m| [(n.id, m, Sign::Plus), (n.id, m, Sign::Minus)]))
        .collect();

    let outcomes = map_slice(exec, &jobs, |&(src, mode, sign)| -> Result<(Edge, bool)> {
        let mut start = nodes[src].modal.clone();
        let s = if sign == Sign::Minus { -1.0 } else { 1.0 };
        start.c[mode - 1] += s * opts.perturb_eps;
        let init = InitialData::at(start);
        let mut sim = Simulation::new(params, kernel, &init, &run_cfg)?;
        let samples = sim.run_with(|smp| {
            if smp.t < opts.min_time {
                return true;
            }
            nearest(smp, &nodes).1 >= opts.tol / 10.0
        })?;
        let last = samples.last().expect("nonempty run");
        let (dst, dist) = nearest(last, &nodes);
        let settled = dist <= opts.tol && last.monitors.norm_ut.sqrt() + last.monitors.norm_eta.sqrt() <= opts.tol;
        Ok((
            Edge { src, dst, mode, sign, eps: opts.perturb_eps, t_transit: last.t, final_dist: dist },
            settled,
        ))
    });

    let mut graph = ConnectionGraph { nodes, edges: Vec::new(), unresolved: Vec::new(), returns: Vec::new() };
    for out in outcomes {
        let (edge, settled) = out?;
        if !settled {
            graph.unresolved.push(Unresolved {
                src: edge.src,
                mode: edge.mode,
                sign: edge.sign,
                eps: edge.eps,
                t_final: edge.t_transit,
                nearest: edge.dst,
                final_dist: edge.final_dist,
            });
        } else if edge.dst == edge.src {
            graph.returns.push(edge);
        } else {
            graph.edges.push(edge);
        }
    }
    Ok(graph)
}
