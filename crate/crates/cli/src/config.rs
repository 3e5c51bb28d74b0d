//! JSON run configuration shared by the dynamic subcommands.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use viscobeam::dynamics::{InitialData, InitialHistory, IntegratorConfig};
use viscobeam::history::HistoryTable;
use viscobeam::spectral::eigenvalue;
use viscobeam::{BeamParams, MemoryKernel, ModalState};

/// Stable with the default `dt = 1e-3` for `κ < 0.97`.
pub const DEFAULT_CLI_MODES: usize = 12;

fn default_modes() -> usize {
    DEFAULT_CLI_MODES
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_modes")]
    pub modes: usize,
    pub params: BeamParams,
    pub kernel: KernelSpec,
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub initial: InitialSpec,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    Memoryless,
    Exponential { delta: f64, kappa: f64 },
    /// CSV with header `s,mu` on a uniform grid starting at 0.
    Tabulated { delta: f64, kappa: f64, path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    #[serde(default)]
    pub c: Vec<f64>,
    #[serde(default)]
    pub cdot: Vec<f64>,
    #[serde(default)]
    pub history: HistorySpec,
    /// Seeded random perturbation added to `(c, cdot)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random: Option<RandomSpec>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum HistorySpec {
    #[default]
    Zero,
    /// CSV with header `s,eta_1,...,eta_N` on a uniform grid starting at 0.
    Table { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomSpec {
    /// `‖z‖_{𝓗₀}` of the perturbation.
    pub radius: f64,
}

/// Everything a dynamic subcommand needs, validated.
pub struct Prepared {
    pub config: RunConfig,
    pub params: BeamParams,
    pub kernel: MemoryKernel,
    pub init: InitialData,
}

impl RunConfig {
    /// Reads and validates a config. Table paths are resolved against the
    /// config's directory and stored absolute.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &mut PathBuf| -> Result<()> {
            let joined = if p.is_absolute() { p.clone() } else { base.join(&*p) };
            *p = std::fs::canonicalize(&joined).with_context(|| format!("cannot find table {}", joined.display()))?;
            Ok(())
        };
        if let KernelSpec::Tabulated { path, .. } = &mut cfg.kernel {
            resolve(path)?;
        }
        if let HistorySpec::Table { path } = &mut cfg.initial.history {
            resolve(path)?;
        }
        Ok(cfg)
    }

    pub fn prepare(self) -> Result<Prepared> {
        if self.modes == 0 {
            bail!("modes must be positive");
        }
        let params = self.params.clone();
        params.validate()?;
        params.check_truncation(self.modes)?;
        let kernel = match &self.kernel {
            KernelSpec::Memoryless => MemoryKernel::Memoryless,
            KernelSpec::Exponential { delta, kappa } => MemoryKernel::exponential(*delta, *kappa)?,
            KernelSpec::Tabulated { delta, kappa, path } => {
                let rows = read_table(path)?;
                if rows.first().is_none_or(|r| r.len() != 2) {
                    bail!("kernel table {} must have columns s,mu", path.display());
                }
                let samples: Vec<(f64, f64)> = rows.iter().map(|r| (r[0], r[1])).collect();
                MemoryKernel::tabulated(*delta, *kappa, &samples)?
            }
        };
        self.integrator.validate(self.modes, &kernel)?;
        let init = self.initial_data()?;
        Ok(Prepared { config: self, params, kernel, init })
    }

    fn initial_data(&self) -> Result<InitialData> {
        let n = self.modes;
        let spec = &self.initial;
        if spec.c.len() > n || spec.cdot.len() > n {
            bail!("initial data has more entries than modes = {n}");
        }
        let mut c = spec.c.clone();
        let mut cdot = spec.cdot.clone();
        c.resize(n, 0.0);
        cdot.resize(n, 0.0);
        if let Some(r) = &spec.random {
            if !(r.radius >= 0.0 && r.radius.is_finite()) {
                bail!("random radius must be finite and >= 0");
            }
            let z = random_state(self.seed, n, r.radius);
            c.iter_mut().zip(&z.c).for_each(|(a, b)| *a += b);
            cdot.iter_mut().zip(&z.cdot).for_each(|(a, b)| *a += b);
        }
        let state = ModalState::new(c, cdot)?;
        let history = match &spec.history {
            HistorySpec::Zero => InitialHistory::Zero,
            HistorySpec::Table { path } => {
                let rows = read_table(path)?;
                let width = rows.first().map_or(0, |r| r.len());
                if width < 2 || rows.len() < 2 {
                    bail!("history table {} needs columns s,eta_1,... and at least two rows", path.display());
                }
                let ds = rows[1][0] - rows[0][0];
                check_uniform(&rows, ds, path)?;
                let values = (1..width).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
                let table = HistoryTable { ds, values };
                table.validate(n)?;
                InitialHistory::Table(table)
            }
        };
        Ok(InitialData { state, history })
    }
}

/// Uniform draws weighted by `n⁻²` per mode, scaled to `‖z‖_{𝓗₀} = radius`.
pub fn random_state(seed: u64, modes: usize, radius: f64) -> ModalState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = ModalState::zeros(modes);
    for n in 1..=modes {
        let w = 1.0 / (n as f64).powi(2);
        s.c[n - 1] = rng.gen_range(-1.0..1.0) * w / eigenvalue(n).sqrt();
        s.cdot[n - 1] = rng.gen_range(-1.0..1.0) * w;
    }
    let norm = (s.norms().h2 + s.velocity_norm_sq()).sqrt();
    if norm > 0.0 {
        let scale = radius / norm;
        s.c.iter_mut().chain(s.cdot.iter_mut()).for_each(|x| *x *= scale);
    }
    s
}

fn read_table(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("cannot read table {}", path.display()))?;
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.with_context(|| format!("{}: bad row {}", path.display(), i + 2))?;
        let row = rec
            .iter()
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .with_context(|| format!("{}: non-numeric entry in row {}", path.display(), i + 2))?;
        rows.push(row);
    }
    if rows.is_empty() {
        bail!("table {} is empty", path.display());
    }
    Ok(rows)
}

fn check_uniform(rows: &[Vec<f64>], ds: f64, path: &Path) -> Result<()> {
    if !(ds > 0.0) || rows[0][0].abs() > 1e-12 {
        bail!("table {} must start at s = 0 with increasing s", path.display());
    }
    for (i, r) in rows.iter().enumerate() {
        if (r[0] - i as f64 * ds).abs() > 1e-9 * (1.0 + r[0].abs()) {
            bail!("table {} is not on a uniform grid (row {})", path.display(), i + 2);
        }
    }
    Ok(())
}
