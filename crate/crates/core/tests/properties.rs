use std::f64::consts::PI;

use viscobeam::attractor::{connection_graph, GraphOptions};
use viscobeam::dynamics::{simulate, InitialData, IntegratorConfig};
use viscobeam::spectral::LAMBDA1;
use viscobeam::stability::stability_map;
use viscobeam::statics::bifurcation_sweep;
use viscobeam::{BeamParams, Execution, MemoryKernel, ModalState};

const PI2: f64 = PI * PI;

fn kernel() -> MemoryKernel {
    MemoryKernel::exponential(1.0, 0.5).unwrap()
}

#[test]
fn sequential_and_parallel_sweeps_agree() {
    let a = bifurcation_sweep(9.0 * LAMBDA1, -150.0, 0.0, 300, Execution::Sequential).unwrap();
    let b = bifurcation_sweep(9.0 * LAMBDA1, -150.0, 0.0, 300, Execution::Parallel).unwrap();
    assert_eq!(a, b);
    let a = stability_map((0.0, 40.0 * LAMBDA1), (-200.0, 10.0), 40, Execution::Sequential).unwrap();
    let b = stability_map((0.0, 40.0 * LAMBDA1), (-200.0, 10.0), 40, Execution::Parallel).unwrap();
    assert_eq!(a, b);
}

#[test]
fn graph_without_buckling_has_no_edges() {
    let p = BeamParams::unloaded(0.0, LAMBDA1).unwrap();
    let cfg = IntegratorConfig { dt: 1e-3, t_final: 1.0, ..Default::default() };
    let opts = GraphOptions { t_max: 200.0, ..Default::default() };
    let g = connection_graph(&p, &kernel(), &cfg, 4, &opts, Execution::Parallel).unwrap();
    assert_eq!(g.nodes.len(), 1);
    assert!(g.edges.is_empty());
}

#[test]
fn graph_edges_descend_to_local_minima() {
    let p = BeamParams::unloaded(-4.0 * PI2, LAMBDA1).unwrap();
    let cfg = IntegratorConfig { dt: 1e-3, t_final: 1.0, ..Default::default() };
    let opts = GraphOptions::default();
    let seq = connection_graph(&p, &kernel(), &cfg, 4, &opts, Execution::Sequential).unwrap();
    let par = connection_graph(&p, &kernel(), &cfg, 4, &opts, Execution::Parallel).unwrap();
    assert_eq!(seq, par);
    let min_l = seq.nodes.iter().map(|n| n.lyapunov).fold(f64::INFINITY, f64::min);
    for e in &seq.edges {
        assert!(e.final_dist <= opts.tol);
        assert!(seq.nodes[e.src].lyapunov > seq.nodes[e.dst].lyapunov);
        assert!(seq.nodes[e.dst].lyapunov <= min_l + 1e-9 * min_l.abs());
    }
    assert!(seq.unresolved.is_empty());
}

#[test]
fn omega_limit_is_stationary() {
    let p = BeamParams::unloaded(-4.0 * PI2, LAMBDA1).unwrap();
    let mut s = ModalState::zeros(4);
    s.c[0] = 0.05;
    s.cdot[1] = 0.3;
    let cfg = IntegratorConfig { dt: 1e-3, t_final: 300.0, sample_every: 100, ..Default::default() };
    let tr = simulate(&p, &kernel(), &InitialData::at(s), &cfg).unwrap();
    let tail = &tr.samples[tr.samples.len() * 9 / 10..];
    let (lo, hi) = tail
        .iter()
        .map(|s| s.monitors.lyapunov)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), l| (a.min(l), b.max(l)));
    assert!(hi - lo < 1e-6, "L still varies by {}", hi - lo);
    assert!(tr.last().monitors.norm_eta < 1e-8);
    assert!(tr.last().monitors.norm_ut < 1e-8);
    // settles on ±u₁, amplitude 2
    let a = viscobeam::spectral::physical_from_modal(tr.last().state.c[0]);
    assert!((a.abs() - 2.0).abs() < 1e-4, "amplitude {a}");
}
