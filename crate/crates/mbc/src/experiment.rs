//! One experiment cell: both transmitter arms, the lossy channel, and
//! receiver-side metrics for a single (threshold, PER) pair.
//!
//! Rates are measured over the experiment clock, which starts at the first
//! complete training window (the warm-up transmits nothing). Three arms are
//! reported per cell: MBC, the baseline at the same threshold (rate
//! comparison), and the baseline re-run at the rate-matched threshold
//! (accuracy comparison under the fair-rate protocol).

use serde::{Deserialize, Serialize};

use crate::channel::{apply_channel, splitmix64, ChannelConfig, DeliveredLog};
use crate::error::{Error, Result};
use crate::geo::EnuTrajectory;
use crate::scheduler::{
    match_baseline_rate, run_baseline_transmitter, run_mbc_transmitter, ScheduleConfig, TxLog,
};
use crate::tracker::{arm_metrics, run_receiver, summarize, ArmMetrics, PteSeries, TrackingReport};

/// Threshold set from the J2945/1 min-max range.
pub const DEFAULT_THRESHOLDS_M: [f64; 4] = [0.2, 0.3, 0.4, 0.5];
/// Default channel operating points: lossless and heavy loss.
pub const DEFAULT_PERS: [f64; 2] = [0.0, 0.4];

/// Experiment arm tags, also used in output tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    Mbc,
    Baseline,
    BaselineMatched,
}

impl Arm {
    pub fn tag(self) -> &'static str {
        match self {
            Arm::Mbc => "mbc",
            Arm::Baseline => "baseline",
            Arm::BaselineMatched => "baseline_matched",
        }
    }
}

/// Derive a channel seed for one cell and arm from the master seed. Mixing
/// indices through a stable hash keeps existing cells unchanged when new
/// thresholds or PERs are appended.
pub fn cell_seed(master: u64, threshold_idx: usize, per_idx: usize, arm: Arm) -> u64 {
    let arm_tag = match arm {
        Arm::Mbc => 1u64,
        Arm::Baseline => 2,
        Arm::BaselineMatched => 3,
    };
    let mut h = splitmix64(master);
    h = splitmix64(h ^ threshold_idx as u64);
    h = splitmix64(h ^ per_idx as u64);
    splitmix64(h ^ arm_tag)
}

/// Serializable summary of one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub threshold_m: f64,
    pub per: f64,
    pub duration_s: f64,
    /// Rate-matched baseline threshold chosen by bisection.
    pub matched_baseline_threshold_m: f64,
    pub channel_seeds: CellSeeds,
    pub mbc: ArmMetrics,
    pub baseline: ArmMetrics,
    pub baseline_matched: ArmMetrics,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellSeeds {
    pub mbc: u64,
    pub baseline: u64,
    pub baseline_matched: u64,
}

/// Everything a cell produced, for callers that also write series artifacts.
#[derive(Debug, Clone)]
pub struct CellOutput {
    pub report: CellReport,
    pub mbc_log: TxLog,
    pub baseline_log: TxLog,
    pub matched_log: TxLog,
    pub mbc_delivery: DeliveredLog,
    pub baseline_delivery: DeliveredLog,
    pub matched_delivery: DeliveredLog,
    pub mbc_series: PteSeries,
    pub baseline_series: PteSeries,
    pub matched_series: PteSeries,
}

impl CellOutput {
    pub fn arms(&self) -> [(Arm, &TxLog, &DeliveredLog, &PteSeries); 3] {
        [
            (Arm::Mbc, &self.mbc_log, &self.mbc_delivery, &self.mbc_series),
            (Arm::Baseline, &self.baseline_log, &self.baseline_delivery, &self.baseline_series),
            (Arm::BaselineMatched, &self.matched_log, &self.matched_delivery, &self.matched_series),
        ]
    }

    /// The fair-comparison report for this cell (MBC vs rate-matched
    /// baseline).
    pub fn tracking_report(&self) -> Result<TrackingReport> {
        summarize(
            &self.mbc_series,
            &self.mbc_log,
            self.mbc_delivery.messages.len(),
            &self.matched_series,
            &self.matched_log,
            self.matched_delivery.messages.len(),
            self.report.duration_s,
            self.report.matched_baseline_threshold_m,
        )
    }
}

/// Experiment clock duration: trace end minus the first complete window.
pub fn experiment_duration(traj: &EnuTrajectory, window: usize) -> Result<f64> {
    if traj.samples.len() <= window {
        return Err(Error::TooFewSamples { got: traj.samples.len(), need: window + 1 });
    }
    Ok(traj.samples.last().unwrap().t - traj.samples[window - 1].t)
}

/// Run both arms plus the rate-matched baseline for one (threshold, per)
/// cell.
pub fn run_cell(
    traj: &EnuTrajectory,
    cfg_template: &ScheduleConfig,
    threshold_m: f64,
    per: f64,
    threshold_idx: usize,
    per_idx: usize,
    master_seed: u64,
) -> Result<CellOutput> {
    let cfg = ScheduleConfig { threshold_m, ..cfg_template.clone() };
    cfg.validate()?;
    let duration = experiment_duration(traj, cfg.window)?;

    let mbc_log = run_mbc_transmitter(traj, &cfg)?;
    let baseline_log = run_baseline_transmitter(traj, &cfg)?;
    let target = mbc_log.full_update_count();
    let (matched_threshold, matched_log) = match_baseline_rate(traj, &cfg, target)?;

    let seeds = CellSeeds {
        mbc: cell_seed(master_seed, threshold_idx, per_idx, Arm::Mbc),
        baseline: cell_seed(master_seed, threshold_idx, per_idx, Arm::Baseline),
        baseline_matched: cell_seed(master_seed, threshold_idx, per_idx, Arm::BaselineMatched),
    };
    let mbc_delivery = apply_channel(&mbc_log, &ChannelConfig { per, seed: seeds.mbc })?;
    let baseline_delivery = apply_channel(&baseline_log, &ChannelConfig { per, seed: seeds.baseline })?;
    let matched_delivery = apply_channel(&matched_log, &ChannelConfig { per, seed: seeds.baseline_matched })?;

    let mbc_series = run_receiver(&mbc_delivery, traj);
    let baseline_series = run_receiver(&baseline_delivery, traj);
    let matched_series = run_receiver(&matched_delivery, traj);

    let report = CellReport {
        threshold_m,
        per,
        duration_s: duration,
        matched_baseline_threshold_m: matched_threshold,
        channel_seeds: seeds,
        mbc: arm_metrics(&mbc_series, &mbc_log, mbc_delivery.messages.len(), duration)?,
        baseline: arm_metrics(&baseline_series, &baseline_log, baseline_delivery.messages.len(), duration)?,
        baseline_matched: arm_metrics(&matched_series, &matched_log, matched_delivery.messages.len(), duration)?,
    };

    Ok(CellOutput {
        report,
        mbc_log,
        baseline_log,
        matched_log,
        mbc_delivery,
        baseline_delivery,
        matched_delivery,
        mbc_series,
        baseline_series,
        matched_series,
    })
}
