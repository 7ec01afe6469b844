//! JSON run configuration.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    InnovationLaw, InnovationModel, MemoryFunction, ProcessSpec, SpaceGrid, DEFAULT_TAIL_TOL,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridConfig {
    Uniform {
        uniform: UniformGrid,
    },
    /// Missing weights default to `1/q` each.
    Points {
        points: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weights: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformGrid {
    pub start: f64,
    pub end: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MemoryConfig {
    Constant {
        value: f64,
    },
    Step {
        breakpoints: Vec<f64>,
        levels: Vec<f64>,
    },
    Table {
        values: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Variances {
    Scalar(f64),
    PerPoint(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InnovationConfig {
    White {
        #[serde(default = "unit_variance")]
        sigma2: Variances,
    },
    Wiener,
    /// Either an inline matrix or a CSV file resolved against the config's directory.
    Custom {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sigma: Option<Vec<Vec<f64>>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sigma_file: Option<PathBuf>,
    },
}

fn unit_variance() -> Variances {
    Variances::Scalar(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LawConfig {
    #[default]
    Gaussian,
    SymmetricLomax {
        alpha: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    /// Number of consecutive `X_k` to write.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeConfig {
    #[serde(default = "default_lags")]
    pub lags: Vec<u64>,
}

impl Default for AnalyzeConfig {
    fn default() -> Self {
        Self {
            lags: default_lags(),
        }
    }
}

fn default_lags() -> Vec<u64> {
    vec![0, 1, 10, 100, 1000, 10000]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    pub n: usize,
    pub replications: usize,
    #[serde(default = "default_n_list")]
    pub n_list: Vec<usize>,
    #[serde(default = "default_z_star")]
    pub z_star: f64,
    #[serde(default = "default_window_factor")]
    pub window_factor: u64,
    #[serde(default = "default_batches")]
    pub batches: usize,
    #[serde(default = "default_multiplier")]
    pub skew_multiplier: f64,
    #[serde(default = "default_multiplier")]
    pub kurtosis_multiplier: f64,
    #[serde(default = "default_ks_band")]
    pub ks_band: f64,
}

fn default_n_list() -> Vec<usize> {
    (10..=16).map(|p| 1usize << p).collect()
}
fn default_z_star() -> f64 {
    crate::mcverify::DEFAULT_Z_STAR
}
fn default_window_factor() -> u64 {
    crate::mcverify::DEFAULT_WINDOW_FACTOR
}
fn default_batches() -> usize {
    crate::mcverify::DEFAULT_BATCHES
}
fn default_multiplier() -> f64 {
    4.0
}
fn default_ks_band() -> f64 {
    2.3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecConfig {
    pub grid: GridConfig,
    pub memory: MemoryConfig,
    pub innovations: InnovationConfig,
    #[serde(default)]
    pub law: LawConfig,
    #[serde(default = "default_tail_tol")]
    pub tail_tol: f64,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub seed_stream: u64,
    #[serde(default)]
    pub simulate: SimulateConfig,
    #[serde(default)]
    pub analyze: AnalyzeConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifyConfig>,
    /// Directory relative paths are resolved against; not part of the file.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_tail_tol() -> f64 {
    DEFAULT_TAIL_TOL
}
fn default_horizon() -> usize {
    100
}

impl SpecConfig {
    pub fn from_json(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.base_dir = base_dir.into();
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_json(&text, base)
    }

    pub fn build_grid(&self) -> Result<SpaceGrid> {
        match &self.grid {
            GridConfig::Uniform { uniform } => {
                SpaceGrid::uniform(uniform.start, uniform.end, uniform.count)
            }
            GridConfig::Points {
                points,
                weights: Some(w),
            } => SpaceGrid::new(points.clone(), w.clone()),
            GridConfig::Points {
                points,
                weights: None,
            } => SpaceGrid::with_probability_weights(points.clone()),
        }
    }

    pub fn build_memory(&self, grid: &SpaceGrid) -> Result<MemoryFunction> {
        match &self.memory {
            MemoryConfig::Constant { value } => MemoryFunction::constant(grid, *value),
            MemoryConfig::Step {
                breakpoints,
                levels,
            } => MemoryFunction::step(grid, breakpoints.clone(), levels.clone()),
            MemoryConfig::Table { values } => MemoryFunction::table(grid, values.clone()),
        }
    }

    pub fn build_innovations(&self, grid: &SpaceGrid) -> Result<InnovationModel> {
        let model = match &self.innovations {
            InnovationConfig::White {
                sigma2: Variances::Scalar(v),
            } => InnovationModel::white(grid, vec![*v; grid.len()]),
            InnovationConfig::White {
                sigma2: Variances::PerPoint(v),
            } => InnovationModel::white(grid, v.clone()),
            InnovationConfig::Wiener => InnovationModel::wiener(grid),
            InnovationConfig::Custom {
                sigma: Some(rows),
                sigma_file: None,
            } => InnovationModel::custom(grid, matrix_from_rows(rows)?),
            InnovationConfig::Custom {
                sigma: None,
                sigma_file: Some(file),
            } => {
                let path = self.base_dir.join(file);
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
                InnovationModel::custom(grid, parse_matrix_csv(&text)?)
            }
            InnovationConfig::Custom { .. } => Err(Error::Config(
                "custom innovations need exactly one of `sigma` or `sigma_file`".into(),
            )),
        }?;
        let law = match self.law {
            LawConfig::Gaussian => InnovationLaw::Gaussian,
            LawConfig::SymmetricLomax { alpha } => InnovationLaw::SymmetricLomax { alpha },
        };
        Ok(model.with_law(law)?.with_seed_stream(self.seed_stream))
    }

    pub fn build_spec(&self) -> Result<ProcessSpec> {
        let grid = self.build_grid()?;
        let memory = self.build_memory(&grid)?;
        let innovations = self.build_innovations(&grid)?;
        ProcessSpec::new(grid, memory, innovations, self.tail_tol, self.horizon)
    }
}

fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let q = rows.len();
    if let Some(i) = rows.iter().position(|r| r.len() != q) {
        return Err(Error::Config(format!(
            "sigma row {i} has {} entries, expected {q}",
            rows[i].len()
        )));
    }
    Ok(DMatrix::from_fn(q, q, |i, j| rows[i][j]))
}

/// Square matrix from comma-separated rows; blank lines and `#` comments are skipped.
pub fn parse_matrix_csv(text: &str) -> Result<DMatrix<f64>> {
    let rows = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .enumerate()
        .map(|(i, line)| {
            line.split(',')
                .map(|f| {
                    f.trim().parse::<f64>().map_err(|e| {
                        Error::Config(format!("sigma row {i}: cannot parse {f:?}: {e}"))
                    })
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    matrix_from_rows(&rows)
}
