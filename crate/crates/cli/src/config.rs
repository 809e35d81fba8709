//! Run configuration: one TOML file with top-level `seed` and one table per
//! subcommand. Every key has a default and unknown keys are rejected.
//!
//! ```toml
//! seed = 7
//!
//! [estimate]
//! estimator = "mc"
//! lambda_grid = [0.1, 0.01, 0.001]
//! bootstrap_reps = 200
//! ```

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    /// Written by the effective-config echo; ignored on input so an echo can
    /// be passed back as `--config`.
    pub command: Option<String>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub index: IndexConfig,
    pub estimate: EstimateConfig,
    pub validate: ValidateConfig,
    pub simulate: SimulateConfig,
    #[serde(rename = "sweep-loss")]
    pub sweep_loss: SweepConfig,
    pub assign: AssignConfig,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorName {
    Dd,
    Mc,
    Scen,
}

impl EstimatorName {
    pub fn as_str(self) -> &'static str {
        match self {
            EstimatorName::Dd => "dd",
            EstimatorName::Mc => "mc",
            EstimatorName::Scen => "scen",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum PanelFormat {
    /// `unit_id,year,value`
    #[default]
    Long,
    /// `unit_id,y2006,...`
    Wide,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum EstimateMode {
    #[default]
    Panel,
    /// Group-mean DD on the pre/post averages of the treated and control units.
    TwoUnit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ScenModeName {
    #[default]
    Transposed,
    Standard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Study {
    Pretrend,
    Berkson,
    Size,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ArchitectureName {
    #[default]
    Linear,
    Mlp,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IndexConfig {
    /// `household_id,cluster_id,year,<assets...>`
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    pub exclude: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub panel: Option<PathBuf>,
    pub format: PanelFormat,
    /// `unit_id,first_treat_year`; units not listed are dropped.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub treatment: Option<PathBuf>,
    /// Alternative outcome files (same layout) forming the split ensemble.
    pub splits: Vec<PathBuf>,
    pub demo: bool,
    pub estimator: EstimatorName,
    pub mode: EstimateMode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    /// Empty means the estimator's default grid.
    pub lambda_grid: Vec<f64>,
    pub alpha: f64,
    pub scen_mode: ScenModeName,
    pub folds: usize,
    pub holdout_fraction: f64,
    pub cv_reps: usize,
    pub bootstrap_reps: usize,
    pub resample: bool,
    pub retry_cap: usize,
}

impl Default for EstimateConfig {
    fn default() -> Self {
        EstimateConfig {
            panel: None,
            format: PanelFormat::Long,
            treatment: None,
            splits: Vec::new(),
            demo: false,
            estimator: EstimatorName::Mc,
            mode: EstimateMode::Panel,
            lambda: None,
            lambda_grid: Vec::new(),
            alpha: 0.5,
            scen_mode: ScenModeName::Transposed,
            folds: 5,
            holdout_fraction: 0.1,
            cv_reps: 3,
            bootstrap_reps: 100,
            resample: true,
            retry_cap: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub panel: Option<PathBuf>,
    pub format: PanelFormat,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub treatment: Option<PathBuf>,
    pub demo: bool,
    pub estimators: Vec<EstimatorName>,
    pub folds: usize,
    pub placebo_runs: usize,
    pub sample_fraction: f64,
    /// Year treated units are relabelled at; defaults to the last pre-treatment year.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub placebo_year: Option<i32>,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        ValidateConfig {
            panel: None,
            format: PanelFormat::Long,
            treatment: None,
            demo: false,
            estimators: vec![EstimatorName::Dd, EstimatorName::Mc, EstimatorName::Scen],
            folds: 10,
            placebo_runs: 100,
            sample_fraction: 0.8,
            placebo_year: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub studies: Vec<Study>,
    pub periods: Vec<usize>,
    pub rates: Vec<f64>,
    pub reps: usize,
    pub estimators: Vec<EstimatorName>,
    /// Holdout repetitions for the MC penalty inside each replicate.
    pub mc_cv_reps: usize,
    pub berkson_alpha: f64,
    pub berkson_phi: Vec<f64>,
    pub size_reps: usize,
    pub n_units: usize,
    pub treat_share: f64,
    pub effect: f64,
    pub noise_sd: f64,
    pub drift_share: f64,
    pub selection_strength: f64,
    pub unit_sd: f64,
    pub shock_sd: f64,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            studies: vec![Study::Pretrend, Study::Berkson, Study::Size],
            periods: vec![20],
            rates: vec![0.0, 0.1, 0.175, 0.25],
            reps: 200,
            estimators: vec![EstimatorName::Dd, EstimatorName::Mc],
            mc_cv_reps: 1,
            berkson_alpha: 0.0,
            berkson_phi: vec![1.0, 0.8, 0.6],
            size_reps: 1000,
            n_units: 100,
            treat_share: 0.2,
            effect: 1.0,
            noise_sd: 0.3,
            drift_share: 0.5,
            selection_strength: 4.0,
            unit_sd: 1.0,
            shock_sd: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// Feature CSV with a `label` column; the synthetic task is used when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validation: Option<PathBuf>,
    pub train_n: usize,
    pub validation_n: usize,
    /// Seed of the synthetic training set; validation uses `data_seed + 1`.
    pub data_seed: u64,
    pub architecture: ArchitectureName,
    pub hidden: usize,
    pub lambda_r: f64,
    pub lambda_b: Vec<f64>,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub decay: f64,
    pub epochs: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            train: None,
            validation: None,
            train_n: 4000,
            validation_n: 2000,
            data_seed: 11,
            architecture: ArchitectureName::Linear,
            hidden: 16,
            lambda_r: 1e-4,
            lambda_b: wealth_causal::bias_loss::LAMBDA_B_SWEEP.to_vec(),
            batch_size: 90,
            learning_rate: 0.02,
            decay: 0.96,
            epochs: 40,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AssignConfig {
    /// `unit_id,lon,lat[,density]`
    #[serde(skip_serializing_if = "Option::is_none")]
    pub units: Option<PathBuf>,
    /// GeoJSON lines with a `vintage` property.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<PathBuf>,
    pub treat_buffer_km: f64,
    pub control_exclusion_km: f64,
    pub treat_first_vintage: i32,
    pub treat_last_vintage: i32,
    pub study_end: i32,
    pub density_filter: bool,
    /// Share of the densest treated units dropped when filtering.
    pub density_top_share: f64,
}

impl Default for AssignConfig {
    fn default() -> Self {
        AssignConfig {
            units: None,
            grid: None,
            treat_buffer_km: 2.0,
            control_exclusion_km: 2.0,
            treat_first_vintage: 2011,
            treat_last_vintage: 2012,
            study_end: 2016,
            density_filter: false,
            density_top_share: 0.01,
        }
    }
}

/// The resolved configuration of one run, as echoed to `effective_config.toml`.
/// Output location and thread count are left out: they do not change results.
pub fn echo<T: Serialize>(command: &str, seed: u64, section: &T) -> Result<String, CliError> {
    let mut table = toml::Table::new();
    table.insert("command".into(), toml::Value::String(command.into()));
    // TOML integers are signed 64-bit.
    let seed = i64::try_from(seed).map_err(|_| CliError::Config(format!("seed {seed} exceeds {}", i64::MAX)))?;
    table.insert("seed".into(), toml::Value::Integer(seed));
    let value = toml::Value::try_from(section).map_err(|e| CliError::Config(e.to_string()))?;
    table.insert(command.into(), value);
    toml::to_string(&table).map_err(|e| CliError::Config(e.to_string()))
}
