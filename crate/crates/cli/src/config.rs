use std::path::{Path, PathBuf};

use quasiground::nonlinearity::{ModelSpec, Nonlinearity, Potential};
use quasiground::solver::{GridSpec, SolveConfig};
use quasiground::transform::TransformSpec;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TransformConfig {
    Identity,
    SuperfluidFilm,
    LaserChanneling,
    Tabulated { t: Vec<f64>, g: Vec<f64> },
}

fn default_omega() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub dimension: usize,
    pub transform: TransformConfig,
    pub potential: Potential,
    pub nonlinearity: Nonlinearity,
    /// Radius of the ball Ω.
    #[serde(default = "default_omega")]
    pub omega_radius: f64,
}

impl ModelConfig {
    pub fn build(&self) -> quasiground::Result<ModelSpec> {
        let transform = match &self.transform {
            TransformConfig::Identity => TransformSpec::identity(),
            TransformConfig::SuperfluidFilm => TransformSpec::superfluid_film(),
            TransformConfig::LaserChanneling => TransformSpec::laser_channeling()?,
            TransformConfig::Tabulated { t, g } => TransformSpec::tabulated(t.clone(), g.clone())?,
        };
        ModelSpec::with_omega(self.dimension, transform, self.potential, self.nonlinearity, self.omega_radius)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Decreasing ε list; a dimension-dependent default when absent.
    #[serde(default)]
    pub eps: Option<Vec<f64>>,
    /// Grid for the instanton sweep; `B_{1.05 ϱ}` with 65536 intervals when absent.
    #[serde(default)]
    pub grid: Option<GridSpec>,
}

impl SweepConfig {
    pub fn eps_or_default(&self, dimension: usize) -> Vec<f64> {
        self.eps.clone().unwrap_or_else(|| match dimension {
            4 => vec![3e-4, 1e-4, 3e-5, 1e-5, 3e-6, 1e-6],
            _ => vec![3e-3, 1e-3, 3e-4, 1e-4, 3e-5, 1e-5],
        })
    }

    pub fn grid_or_default(&self, omega_radius: f64) -> GridSpec {
        self.grid.unwrap_or(GridSpec::Radial { radius: 1.05 * omega_radius, n: 65_536 })
    }
}

fn default_seed() -> u64 {
    quasiground::verify::DEFAULT_SEED
}

/// A run configuration: `{model, grid, solver, sweep, seed}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub model: ModelConfig,
    #[serde(default)]
    pub grid: GridSpec,
    /// Solver options; the grid comes from the top-level section.
    #[serde(default)]
    pub solver: serde_json::Map<String, serde_json::Value>,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

#[derive(Debug)]
pub struct Loaded {
    pub config: Config,
    pub raw: serde_json::Value,
    pub model: ModelSpec,
    pub solve: SolveConfig,
    pub dir: PathBuf,
}

pub fn load(path: &Path) -> anyhow::Result<Loaded> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| anyhow::anyhow!("cannot read config {}: {e}", path.display()))?;
    let raw: serde_json::Value = serde_json::from_str(&text)?;
    let config: Config = serde_json::from_value(raw.clone())?;
    if config.solver.contains_key("grid") {
        anyhow::bail!("solver.grid is not allowed; set the top-level grid section");
    }
    let mut solve: SolveConfig = serde_json::from_value(serde_json::Value::Object(config.solver.clone()))?;
    solve.grid = config.grid;
    solve.validate()?;
    let model = config.model.build()?;
    let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(Loaded { config, raw, model, solve, dir })
}

/// Nodal values from a CSV whose last column holds the field (header optional).
pub fn read_field_csv(path: &Path) -> anyhow::Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| anyhow::anyhow!("cannot read initial guess {}: {e}", path.display()))?;
    let mut values = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let last = line.rsplit(',').next().unwrap_or(line).trim();
        match last.parse::<f64>() {
            Ok(v) => values.push(v),
            Err(_) if k == 0 => {}
            Err(_) => anyhow::bail!("{}:{}: cannot parse '{last}'", path.display(), k + 1),
        }
    }
    Ok(values)
}
