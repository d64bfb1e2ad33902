//! Run configuration, read from a versioned TOML document.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vflgan_core::audit::{AttackConfig, AuditMethod};
use vflgan_core::data::{load_csv, red_wine_schema, Schema, TabularDataset, VerticalSplit};
use vflgan_core::dp::{calibrate, report, AccountantReport, DpConfig};
use vflgan_core::fedgan::{GanConfig, Variant};

use crate::error::{CliError, Result};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub config_version: u32,
    #[serde(default)]
    pub seed: u64,
    pub variant: Variant,
    /// Run directory; relative paths resolve against the config file.
    pub output_dir: Option<PathBuf>,
    pub data: DataConfig,
    pub split: SplitConfig,
    #[serde(default)]
    pub gan: GanConfig,
    pub dp: Option<DpRequest>,
    pub audit: Option<AuditSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub path: PathBuf,
    /// Built-in schema name; mutually exclusive with `schema`.
    pub preset: Option<String>,
    pub schema: Option<Schema>,
    /// Keep only the first `rows` records.
    pub rows: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    /// Attribute indices per party.
    pub parties: Option<Vec<Vec<usize>>>,
    /// Consecutive attribute runs of these sizes.
    pub sizes: Option<Vec<usize>>,
}

/// Privacy budget; the noise multiplier is calibrated from it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DpRequest {
    pub epsilon: f64,
    pub delta: f64,
    #[serde(default = "default_clip")]
    pub clip: f64,
}

fn default_clip() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    Outlier,
    Nn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditSection {
    #[serde(default = "default_methods")]
    pub methods: Vec<AuditMethod>,
    pub target: Option<usize>,
    pub select: Option<Selection>,
    /// Also run the attack with shuffled world labels.
    #[serde(default = "default_true")]
    pub null: bool,
    #[serde(default)]
    pub attack: AttackConfig,
}

fn default_methods() -> Vec<AuditMethod> {
    vec![AuditMethod::Assd]
}

fn default_true() -> bool {
    true
}

/// Privacy parameters after calibration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedDp {
    pub config: DpConfig,
    pub accountant: AccountantReport,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| CliError::Io(path.to_path_buf(), e))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.data.path = base.join(&cfg.data.path);
        cfg.output_dir = cfg.output_dir.map(|d| base.join(d));
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        if cfg.config_version != CONFIG_VERSION {
            return Err(CliError::Config(format!(
                "unsupported config_version {} (expected {CONFIG_VERSION})",
                cfg.config_version
            )));
        }
        Ok(cfg)
    }

    pub fn schema(&self) -> Result<Schema> {
        let schema = match (&self.data.preset, &self.data.schema) {
            (Some(p), None) if p == "red_wine" => red_wine_schema(),
            (Some(p), None) => {
                return Err(CliError::Config(format!("unknown schema preset {p:?}")))
            }
            (None, Some(s)) => s.clone(),
            _ => {
                return Err(CliError::Config(
                    "set exactly one of data.preset and data.schema".into(),
                ))
            }
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn split(&self) -> Result<VerticalSplit> {
        match (&self.split.parties, &self.split.sizes) {
            (Some(p), None) => Ok(VerticalSplit::new(p.clone())),
            (None, Some(s)) => Ok(VerticalSplit::contiguous(s)),
            _ => Err(CliError::Config(
                "set exactly one of split.parties and split.sizes".into(),
            )),
        }
    }

    pub fn load_data(&self) -> Result<TabularDataset> {
        let ds = load_csv(&self.data.path, &self.schema()?)?;
        Ok(match self.data.rows {
            Some(n) if n > ds.len() => {
                return Err(CliError::Config(format!(
                    "data.rows = {n} but the file holds {} records",
                    ds.len()
                )))
            }
            Some(n) => ds.head(n),
            None => ds,
        })
    }

    /// Calibrates σ for `n` training rows, accounting one release per
    /// critic step.
    pub fn resolve_dp(&self, n: usize) -> Result<Option<ResolvedDp>> {
        let Some(req) = self.dp else { return Ok(None) };
        if self.variant == Variant::Vertigan {
            return Err(CliError::Config(
                "the first-layer mechanism does not apply to VERTIGAN".into(),
            ));
        }
        let sampling_rate = self.gan.batch_size as f64 / n as f64;
        let steps = (self.gan.epochs * self.gan.disc_steps) as u64;
        let sigma = calibrate(req.epsilon, req.delta, sampling_rate, steps)?;
        let config = DpConfig {
            clip: req.clip,
            sigma,
            target_epsilon: req.epsilon,
            delta: req.delta,
            sampling_rate,
            steps,
        };
        config.validate()?;
        let accountant = report(sigma, sampling_rate, steps, req.delta)?;
        Ok(Some(ResolvedDp { config, accountant }))
    }

    /// Checks every precondition that can be checked without training.
    pub fn validate(&self, data: &TabularDataset) -> Result<()> {
        self.split()?.validate(data.schema().len())?;
        self.gan.validate(data.len())?;
        if let Some(a) = &self.audit {
            a.attack.validate()?;
            if a.methods.is_empty() {
                return Err(CliError::Config("audit.methods is empty".into()));
            }
            if a.target.is_some() && a.select.is_some() {
                return Err(CliError::Config(
                    "set at most one of audit.target and audit.select".into(),
                ));
            }
        }
        Ok(())
    }
}
