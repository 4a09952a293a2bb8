//! CSV artifact builders. Every table is keyed by (threshold, per, arm) so
//! a whole sweep fits in one file per artifact.

use anyhow::Result;
use serde::Serialize;

use mbc::experiment::CellOutput;
use mbc::scheduler::{Action, MessageKind};

#[derive(Serialize)]
struct RateRow<'a> {
    threshold: f64,
    per: f64,
    arm: &'a str,
    full_hz: f64,
    switch_hz: f64,
    total_hz: f64,
}

pub fn rates_csv(cells: &[CellOutput]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for cell in cells {
        let metrics = [
            ("mbc", &cell.report.mbc),
            ("baseline", &cell.report.baseline),
            ("baseline_matched", &cell.report.baseline_matched),
        ];
        for (arm, m) in metrics {
            w.serialize(RateRow {
                threshold: cell.report.threshold_m,
                per: cell.report.per,
                arm,
                full_hz: m.rates.full_update_hz,
                switch_hz: m.rates.switch_hz,
                total_hz: m.rates.total_hz,
            })?;
        }
    }
    Ok(w.into_inner()?)
}

#[derive(Serialize)]
struct PercentileRow<'a> {
    threshold: f64,
    per: f64,
    arm: &'a str,
    p50: Option<f64>,
    p90: Option<f64>,
    p99: Option<f64>,
}

pub fn percentiles_csv(cells: &[CellOutput]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for cell in cells {
        let metrics = [
            ("mbc", &cell.report.mbc),
            ("baseline", &cell.report.baseline),
            ("baseline_matched", &cell.report.baseline_matched),
        ];
        for (arm, m) in metrics {
            w.serialize(PercentileRow {
                threshold: cell.report.threshold_m,
                per: cell.report.per,
                arm,
                p50: m.p50_m,
                p90: m.p90_m,
                p99: m.p99_m,
            })?;
        }
    }
    Ok(w.into_inner()?)
}

#[derive(Serialize)]
struct PteRow<'a> {
    t: f64,
    pte: f64,
    arm: &'a str,
    per: f64,
    threshold: f64,
}

pub fn pte_csv(cells: &[CellOutput]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for cell in cells {
        for (arm, _, _, series) in cell.arms() {
            for s in &series.samples {
                w.serialize(PteRow {
                    t: s.t,
                    pte: s.pte,
                    arm: arm.tag(),
                    per: cell.report.per,
                    threshold: cell.report.threshold_m,
                })?;
            }
        }
    }
    Ok(w.into_inner()?)
}

#[derive(Serialize)]
struct MessageRow<'a> {
    threshold: f64,
    per: f64,
    arm: &'a str,
    seq: u64,
    t: f64,
    kind: &'a str,
    payload: String,
    delivered: bool,
}

pub fn messages_csv(cells: &[CellOutput]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for cell in cells {
        for (arm, log, delivery, _) in cell.arms() {
            for (msg, delivered) in log.messages.iter().zip(&delivery.mask) {
                let payload = match &msg.kind {
                    MessageKind::FullUpdate { hybrid } => serde_json::to_string(hybrid)?,
                    MessageKind::SubModelSwitch { active } => serde_json::to_string(active)?,
                    MessageKind::RawBsm { pos, vel } => {
                        serde_json::to_string(&serde_json::json!({ "pos": pos, "vel": vel }))?
                    }
                };
                w.serialize(MessageRow {
                    threshold: cell.report.threshold_m,
                    per: cell.report.per,
                    arm: arm.tag(),
                    seq: msg.seq,
                    t: msg.tx_t,
                    kind: msg.kind.label(),
                    payload,
                    delivered: *delivered,
                })?;
            }
        }
    }
    Ok(w.into_inner()?)
}

#[derive(Serialize)]
struct DecisionRow<'a> {
    threshold: f64,
    per: f64,
    arm: &'a str,
    t: f64,
    pte_cv: f64,
    pte_gp: Option<f64>,
    pte_min: f64,
    action: &'a str,
}

fn action_label(action: Action) -> &'static str {
    match action {
        Action::FullUpdate => "full_update",
        Action::Switch => "switch",
        Action::Hold => "hold",
        Action::RawBsm => "raw_bsm",
        Action::Keepalive => "keepalive",
    }
}

pub fn decisions_csv(cells: &[CellOutput]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for cell in cells {
        for (arm, log, _, _) in cell.arms() {
            for d in &log.decisions {
                w.serialize(DecisionRow {
                    threshold: cell.report.threshold_m,
                    per: cell.report.per,
                    arm: arm.tag(),
                    t: d.t,
                    pte_cv: d.pte_cv,
                    pte_gp: d.pte_gp,
                    pte_min: d.pte_min,
                    action: action_label(d.action),
                })?;
            }
        }
    }
    Ok(w.into_inner()?)
}
