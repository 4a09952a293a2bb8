//! Receiver-side reconstruction and tracking-error statistics.
//!
//! At every GPS instant from the first usable delivery onward, the receiver
//! applies any message transmitted at that instant, predicts the remote
//! vehicle's position from its current state, and records the 2D tracking
//! error against ground truth.

use serde::{Deserialize, Serialize};

use crate::channel::DeliveredLog;
use crate::error::{Error, Result};
use crate::geo::{EnuTrajectory, TIME_TOL_S};
use crate::models::{pte, HybridModel, SubModel, Vec2};
use crate::scheduler::{effective_rates, MessageKind, Rates, TxLog};

/// Receiver bookkeeping: the latest delivered full model (with any later
/// sub-model override) or the latest raw report, whichever path the arm
/// uses.
#[derive(Debug, Clone, Default)]
pub struct ReceiverState {
    /// Latest delivered hybrid and its transmit instant.
    pub last_full: Option<(f64, HybridModel)>,
    /// Active override from the latest delivered switch; cleared on each new
    /// full update.
    pub active_override: Option<SubModel>,
    /// Latest delivered raw report: transmit instant, position, velocity.
    pub last_raw: Option<(f64, Vec2, Vec2)>,
}

impl ReceiverState {
    /// Apply a delivered message. A switch that arrives before any full
    /// update references a model the receiver never got and is ignored.
    pub fn apply(&mut self, msg: &MessageKind, tx_t: f64) {
        match msg {
            MessageKind::FullUpdate { hybrid } => {
                self.last_full = Some((tx_t, (**hybrid).clone()));
                self.active_override = None;
            }
            MessageKind::SubModelSwitch { active } => {
                if self.last_full.is_some() {
                    self.active_override = Some(*active);
                }
            }
            MessageKind::RawBsm { pos, vel } => {
                self.last_raw = Some((tx_t, *pos, *vel));
            }
        }
    }

    /// Predict the remote position at `t`, or None while blind. The most
    /// recently delivered payload wins when both paths are populated.
    pub fn predict(&self, t: f64) -> Option<Vec2> {
        match (&self.last_full, &self.last_raw) {
            (Some((ft, hybrid)), raw) if raw.is_none() || raw.is_some_and(|(rt, ..)| *ft >= rt) => {
                let sub = self.active_override.unwrap_or(hybrid.active);
                Some(hybrid.predict(sub, t))
            }
            (_, Some((rt, pos, vel))) => {
                let dt = t - rt;
                Some(Vec2::new(pos.x + vel.x * dt, pos.y + vel.y * dt))
            }
            _ => None,
        }
    }
}

/// One recorded tracking-error sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PteSample {
    pub t: f64,
    pub pte: f64,
    pub had_model: bool,
}

/// Tracking error at every GPS instant from the first usable delivery.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PteSeries {
    pub samples: Vec<PteSample>,
}

impl PteSeries {
    pub fn values(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.pte).collect()
    }
}

/// Replay a delivered log against ground truth. Instants before the first
/// delivery that establishes a model are excluded rather than scored as
/// infinite error.
pub fn run_receiver(delivered: &DeliveredLog, truth: &EnuTrajectory) -> PteSeries {
    // A leading switch cannot establish state; find the first message that
    // does.
    let first_usable = delivered
        .messages
        .iter()
        .find(|m| !matches!(m.kind, MessageKind::SubModelSwitch { .. }));
    let Some(first) = first_usable else {
        return PteSeries::default();
    };
    let first_t = first.tx_t;

    let mut state = ReceiverState::default();
    let mut series = PteSeries::default();
    let mut idx = 0;
    for sample in &truth.samples {
        while idx < delivered.messages.len() && delivered.messages[idx].tx_t <= sample.t + TIME_TOL_S {
            state.apply(&delivered.messages[idx].kind, delivered.messages[idx].tx_t);
            idx += 1;
        }
        if sample.t < first_t - TIME_TOL_S {
            continue;
        }
        let predicted = state.predict(sample.t).expect("state established at first usable delivery");
        series.samples.push(PteSample {
            t: sample.t,
            pte: pte(predicted, Vec2::new(sample.x, sample.y)),
            had_model: true,
        });
    }
    series
}

/// Nearest-rank percentile: the `ceil(p * n)`-th smallest value (1-based).
pub fn percentile(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::invalid("series", "empty"));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::invalid("p", "must lie in (0, 1]"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let rank = (p * sorted.len() as f64).ceil() as usize;
    Ok(sorted[rank.max(1) - 1])
}

/// One step of an empirical CDF.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EcdfPoint {
    pub pte: f64,
    pub fraction: f64,
}

/// Right-continuous empirical CDF: one point per distinct value, carrying
/// the fraction of samples at or below it.
pub fn ecdf(values: &[f64]) -> Vec<EcdfPoint> {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len() as f64;
    let mut out: Vec<EcdfPoint> = Vec::new();
    for (i, v) in sorted.iter().enumerate() {
        let fraction = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.pte == *v => last.fraction = fraction,
            _ => out.push(EcdfPoint { pte: *v, fraction }),
        }
    }
    out
}

/// Per-arm summary: transmit rates from the transmitter log, accuracy from
/// the receiver series. Percentiles are absent when the receiver never got
/// a usable message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmMetrics {
    pub rates: Rates,
    pub message_count: usize,
    pub delivered_count: usize,
    pub pte_sample_count: usize,
    pub p50_m: Option<f64>,
    pub p90_m: Option<f64>,
    pub p99_m: Option<f64>,
    pub ecdf: Vec<EcdfPoint>,
}

/// Summarize one arm over the experiment duration.
pub fn arm_metrics(
    series: &PteSeries,
    tx_log: &TxLog,
    delivered_count: usize,
    duration: f64,
) -> Result<ArmMetrics> {
    let values = series.values();
    let pct = |p: f64| -> Option<f64> {
        if values.is_empty() {
            None
        } else {
            percentile(&values, p).ok()
        }
    };
    Ok(ArmMetrics {
        rates: effective_rates(tx_log, duration)?,
        message_count: tx_log.messages.len(),
        delivered_count,
        pte_sample_count: series.samples.len(),
        p50_m: pct(0.5),
        p90_m: pct(0.9),
        p99_m: pct(0.99),
        ecdf: ecdf(&values),
    })
}

/// Side-by-side comparison of the MBC arm and the rate-matched baseline arm
/// (the fair-comparison protocol: the baseline is re-run at the threshold
/// whose message count matches the MBC full-update budget).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackingReport {
    pub duration_s: f64,
    pub matched_baseline_threshold_m: f64,
    pub mbc: ArmMetrics,
    pub baseline: ArmMetrics,
}

/// Build a [`TrackingReport`] from both arms' series and transmitter logs.
#[allow(clippy::too_many_arguments)]
pub fn summarize(
    mbc: &PteSeries,
    mbc_log: &TxLog,
    mbc_delivered: usize,
    base: &PteSeries,
    base_log: &TxLog,
    base_delivered: usize,
    duration: f64,
    matched_baseline_threshold_m: f64,
) -> Result<TrackingReport> {
    Ok(TrackingReport {
        duration_s: duration,
        matched_baseline_threshold_m,
        mbc: arm_metrics(mbc, mbc_log, mbc_delivered, duration)?,
        baseline: arm_metrics(base, base_log, base_delivered, duration)?,
    })
}
