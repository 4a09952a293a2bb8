//! Experiment configuration: JSON file plus command-line overrides, flags
//! winning.

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};

use mbc::experiment::{DEFAULT_PERS, DEFAULT_THRESHOLDS_M};
use mbc::gp::{KernelSpec, SearchBounds};
use mbc::scheduler::ScheduleConfig;

use crate::AppError;

/// Scheduling knobs shared by every cell; the per-cell threshold comes from
/// `thresholds_m`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleSettings {
    pub window: usize,
    pub rate_hz: f64,
    pub noise_var: f64,
    pub kernel_template: KernelSpec,
    pub keepalive_s: Option<f64>,
    pub freeze_hyperparams: bool,
    pub search_bounds: SearchBounds,
}

impl Default for ScheduleSettings {
    fn default() -> Self {
        let d = ScheduleConfig::new(1.0);
        ScheduleSettings {
            window: d.window,
            rate_hz: d.rate_hz,
            noise_var: d.noise_var,
            kernel_template: d.kernel_template,
            keepalive_s: d.keepalive_s,
            freeze_hyperparams: d.freeze_hyperparams,
            search_bounds: d.search_bounds,
        }
    }
}

impl ScheduleSettings {
    pub fn to_schedule(&self, threshold_m: f64) -> ScheduleConfig {
        ScheduleConfig {
            threshold_m,
            window: self.window,
            rate_hz: self.rate_hz,
            noise_var: self.noise_var,
            kernel_template: self.kernel_template.clone(),
            keepalive_s: self.keepalive_s,
            freeze_hyperparams: self.freeze_hyperparams,
            search_bounds: self.search_bounds,
        }
    }
}

/// Fully resolved experiment configuration, echoed into every report.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Path to a trace CSV (ENU `t,x,y` or geodetic `t,lat,lon,alt`,
    /// detected from the header). Mutually exclusive with `scenario`.
    pub trace: Option<PathBuf>,
    /// Bundled scenario name; the default trace when no file is given.
    pub scenario: Option<String>,
    /// Scenario duration override in seconds.
    pub duration_s: Option<f64>,
    pub thresholds_m: Vec<f64>,
    pub pers: Vec<f64>,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub schedule: ScheduleSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            trace: None,
            scenario: None,
            duration_s: None,
            thresholds_m: DEFAULT_THRESHOLDS_M.to_vec(),
            pers: DEFAULT_PERS.to_vec(),
            seed: 42,
            out_dir: PathBuf::from("out"),
            schedule: ScheduleSettings::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<ExperimentConfig, AppError> {
        let bytes = std::fs::read(path)
            .with_context(|| format!("reading config {}", path.display()))
            .map_err(AppError::Config)?;
        serde_json::from_slice(&bytes)
            .with_context(|| format!("parsing config {}", path.display()))
            .map_err(AppError::Config)
    }

    pub fn validate(&self) -> Result<(), AppError> {
        if self.trace.is_some() && self.scenario.is_some() {
            return Err(AppError::Config(anyhow::anyhow!(
                "trace and scenario are mutually exclusive"
            )));
        }
        if self.thresholds_m.is_empty() {
            return Err(AppError::Config(anyhow::anyhow!("thresholds_m must not be empty")));
        }
        for t in &self.thresholds_m {
            if !(t.is_finite() && *t > 0.0) {
                return Err(AppError::Config(anyhow::anyhow!("threshold {t} must be positive")));
            }
        }
        if self.pers.is_empty() {
            return Err(AppError::Config(anyhow::anyhow!("pers must not be empty")));
        }
        for p in &self.pers {
            if !(0.0..=1.0).contains(p) {
                return Err(AppError::Config(anyhow::anyhow!("per {p} must lie in [0, 1]")));
            }
        }
        self.schedule
            .to_schedule(self.thresholds_m[0])
            .validate()
            .map_err(|e| AppError::Config(e.into()))?;
        Ok(())
    }
}
