#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use viscobeam::attractor::{connection_graph, split_simulate, GraphOptions};
use viscobeam::dynamics::simulate;
use viscobeam::fmt::sci;
use viscobeam::stability::{estimate_trajectory_decay, stability_map, write_map_csv, DEFAULT_WINDOW};
use viscobeam::statics::{beta_c, bifurcation_sweep, enumerate_equilibria, StationarySet, DEFAULT_RESONANCE_TOL};
use viscobeam::{BeamParams, Execution};

mod config;

use config::RunConfig;

#[derive(Parser)]
#[command(name = "viscobeam", version, about = "Statics, dynamics and stability of an extensible viscoelastic beam")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form stationary set for given load and foundation stiffness.
    Statics {
        #[arg(long, allow_hyphen_values = true)]
        k: f64,
        #[arg(long, allow_hyphen_values = true)]
        beta: f64,
        #[arg(long)]
        json: bool,
    },
    /// Branch table over a range of loads; families go to `<out>_families.csv`.
    Bifurcation {
        #[arg(long, allow_hyphen_values = true)]
        k: f64,
        #[arg(long, allow_hyphen_values = true)]
        beta_min: f64,
        #[arg(long, allow_hyphen_values = true)]
        beta_max: f64,
        #[arg(long)]
        steps: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Integrate a run config; writes trajectory.csv, state.json and effective_config.json.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    #[command(subcommand)]
    Stability(StabilityCommand),
    #[command(subcommand)]
    Attractor(AttractorCommand),
    #[command(subcommand)]
    Verify(VerifyCommand),
}

#[derive(Subcommand)]
enum StabilityCommand {
    /// Region classification on a (k, β) grid.
    Map(MapArgs),
    /// Fitted exponential decay rate of 𝓔 along a configured run.
    Rate {
        #[arg(long)]
        config: PathBuf,
        /// Fraction window `A:B` of the run used for the fit.
        #[arg(long, value_parser = parse_window)]
        window: Option<(f64, f64)>,
    },
}

#[derive(Args)]
struct MapArgs {
    #[arg(long, allow_hyphen_values = true)]
    k_min: f64,
    #[arg(long, allow_hyphen_values = true)]
    k_max: f64,
    #[arg(long, allow_hyphen_values = true)]
    beta_min: f64,
    #[arg(long, allow_hyphen_values = true)]
    beta_max: f64,
    #[arg(long)]
    steps: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum AttractorCommand {
    /// Heteroclinic connection graph between equilibria.
    Graph {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 1e-2, allow_hyphen_values = true)]
        eps: f64,
        #[arg(long, default_value_t = 500.0)]
        tmax: f64,
        #[arg(long, default_value_t = 1e-2)]
        tol: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum VerifyCommand {
    /// Co-integrated split into decaying and compact parts.
    Decomposition {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_window(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected A:B, got {s:?}"))?;
    let a: f64 = a.trim().parse().map_err(|e| format!("bad window start: {e}"))?;
    let b: f64 = b.trim().parse().map_err(|e| format!("bad window end: {e}"))?;
    Ok((a, b))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    Ok(BufWriter::new(File::create(path).with_context(|| format!("cannot write {}", path.display()))?))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn families_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let ext = out.extension().map(|e| format!(".{}", e.to_string_lossy())).unwrap_or_default();
    out.with_file_name(format!("{stem}_families{ext}"))
}

#[derive(Serialize)]
struct StaticsReport<'a> {
    k: f64,
    beta: f64,
    beta_c: f64,
    #[serde(flatten)]
    set: &'a StationarySet,
}

fn statics(k: f64, beta: f64, json: bool) -> Result<()> {
    let params = BeamParams::unloaded(beta, k)?;
    let set = enumerate_equilibria(&params, DEFAULT_RESONANCE_TOL)?;
    if json {
        let report = StaticsReport { k, beta, beta_c: beta_c(k), set: &set };
        println!("{}", serde_json::to_string_pretty(&report)?);
        return Ok(());
    }
    let class = serde_json::to_value(set.classification)?;
    println!(
        "k = {}, beta = {}: {} stationary set, beta_c = {}, n_star = {}",
        sci(k),
        sci(beta),
        class.as_str().unwrap_or_default(),
        sci(beta_c(k)),
        set.n_star
    );
    for e in &set.equilibria {
        println!("  n = {} sign {} amplitude {}", e.mode_index, e.sign.symbol(), sci(e.physical_amplitude));
    }
    for f in &set.families {
        println!("  family on modes ({}, {}) at level {}", f.modes.0, f.modes.1, sci(f.level));
    }
    Ok(())
}

fn bifurcation(k: f64, beta_min: f64, beta_max: f64, steps: usize, out: &Path) -> Result<()> {
    let table = bifurcation_sweep(k, beta_min, beta_max, steps, Execution::Parallel)?;
    let mut w = create(out)?;
    table.write_branches(&mut w)?;
    w.flush()?;
    let fam = families_path(out);
    let mut w = create(&fam)?;
    table.write_families(&mut w)?;
    w.flush()?;
    let births: Vec<String> = table
        .birth_order()
        .iter()
        .map(|&n| format!("n={n} at beta={}", sci(table.birth(n).unwrap_or(f64::NAN))))
        .collect();
    println!(
        "wrote {} branch rows to {} and {} family markers to {}; births: {}",
        table.rows.len(),
        out.display(),
        table.families.len(),
        fam.display(),
        if births.is_empty() { "none".into() } else { births.join(", ") }
    );
    Ok(())
}

fn run_simulate(config: &Path, out: &Path) -> Result<()> {
    let prep = RunConfig::load(config)?.prepare()?;
    std::fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    write_json(&out.join("effective_config.json"), &prep.config)?;
    let traj = simulate(&prep.params, &prep.kernel, &prep.init, &prep.config.integrator)?;
    let mut w = create(&out.join("trajectory.csv"))?;
    traj.write_csv(&mut w)?;
    w.flush()?;
    write_json(&out.join("state.json"), &traj.snapshot)?;
    let (first, last) = (&traj.samples[0].monitors, &traj.last().monitors);
    println!(
        "simulated to t = {} with N = {}: E(0) = {}, E(T) = {}, L(T) = {}",
        sci(traj.last().t),
        prep.config.modes,
        sci(first.energy),
        sci(last.energy),
        sci(last.lyapunov)
    );
    Ok(())
}

fn stability_rate(config: &Path, window: Option<(f64, f64)>) -> Result<()> {
    let prep = RunConfig::load(config)?.prepare()?;
    let traj = simulate(&prep.params, &prep.kernel, &prep.init, &prep.config.integrator)?;
    let fit = estimate_trajectory_decay(&traj, window.unwrap_or(DEFAULT_WINDOW))?;
    println!("{}", serde_json::to_string(&fit)?);
    Ok(())
}

fn stability_map_cmd(a: &MapArgs) -> Result<()> {
    let cells = stability_map((a.k_min, a.k_max), (a.beta_min, a.beta_max), a.steps, Execution::Parallel)?;
    let mut w = create(&a.out)?;
    write_map_csv(&cells, &mut w)?;
    w.flush()?;
    println!("wrote {} cells to {}", cells.len(), a.out.display());
    Ok(())
}

fn graph(config: &Path, eps: f64, tmax: f64, tol: f64, out: &Path) -> Result<()> {
    let prep = RunConfig::load(config)?.prepare()?;
    let opts = GraphOptions { perturb_eps: eps, t_max: tmax, tol, ..Default::default() };
    let g = connection_graph(
        &prep.params,
        &prep.kernel,
        &prep.config.integrator,
        prep.config.modes,
        &opts,
        Execution::Parallel,
    )?;
    write_json(out, &g)?;
    println!(
        "{} nodes, {} edges, {} returns, {} unresolved; wrote {}",
        g.nodes.len(),
        g.edges.len(),
        g.returns.len(),
        g.unresolved.len(),
        out.display()
    );
    Ok(())
}

fn decomposition(config: &Path, out: &Path) -> Result<()> {
    let prep = RunConfig::load(config)?.prepare()?;
    let split = split_simulate(&prep.init, &prep.params, &prep.kernel, &prep.config.integrator)?;
    let mut w = create(out)?;
    split.write_csv(&mut w)?;
    w.flush()?;
    println!(
        "alpha = {}, gamma = {}, m = {}; max sum error {}; wrote {}",
        sci(split.constants.alpha),
        sci(split.constants.gamma),
        sci(split.constants.m),
        sci(split.max_sum_error()),
        out.display()
    );
    Ok(())
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("BEAM_THREADS") else { return Ok(()) };
    let n: usize = v.trim().parse().ok().filter(|&n| n > 0).with_context(|| format!("BEAM_THREADS must be a positive integer, got {v:?}"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    configure_threads()?;
    match cli.command {
        Command::Statics { k, beta, json } => statics(k, beta, json),
        Command::Bifurcation { k, beta_min, beta_max, steps, out } => bifurcation(k, beta_min, beta_max, steps, &out),
        Command::Simulate { config, out } => run_simulate(&config, &out),
        Command::Stability(StabilityCommand::Map(a)) => stability_map_cmd(&a),
        Command::Stability(StabilityCommand::Rate { config, window }) => stability_rate(&config, window),
        Command::Attractor(AttractorCommand::Graph { config, eps, tmax, tol, out }) => graph(&config, eps, tmax, tol, &out),
        Command::Verify(VerifyCommand::Decomposition { config, out }) => decomposition(&config, &out),
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    let numerical = e
        .chain()
        .any(|c| c.downcast_ref::<viscobeam::Error>().is_some_and(|e| e.is_numerical()));
    if numerical {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
