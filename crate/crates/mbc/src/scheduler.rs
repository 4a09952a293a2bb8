//! Transmitter-side error-driven message scheduling.
//!
//! The MBC transmitter holds the last transmitted hybrid, evaluates both of
//! its sub-models against the actual position at every GPS instant, emits a
//! cheap sub-model switch when the arg-min changes while still under the
//! threshold, and retrains + emits a full model update when no sub-model
//! stays under it. The baseline transmitter applies the same error-driven
//! rule to constant-speed coasting of its last raw position/velocity report.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{EnuTrajectory, TIME_TOL_S};
use crate::gp::{KernelSpec, SearchBounds};
use crate::models::{fit_hybrid, pte, select_sub_model, HybridModel, SubModel, Vec2};

/// Configuration for both transmitter arms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleConfig {
    /// Position tracking error threshold in meters.
    pub threshold_m: f64,
    /// Training window length in samples.
    pub window: usize,
    /// GPS sample rate the trajectory must be uniform at.
    pub rate_hz: f64,
    /// Observation noise for the GP fit, meters squared.
    pub noise_var: f64,
    /// Kernel structure used for each axis.
    pub kernel_template: KernelSpec,
    /// Optional maximum quiet time before a full update is forced.
    pub keepalive_s: Option<f64>,
    /// Skip per-update hyperparameter re-optimization and fit the template
    /// as given.
    pub freeze_hyperparams: bool,
    /// Box constraints for the hyperparameter search.
    pub search_bounds: SearchBounds,
}

impl ScheduleConfig {
    pub fn new(threshold_m: f64) -> ScheduleConfig {
        ScheduleConfig {
            threshold_m,
            window: 10,
            rate_hz: 10.0,
            noise_var: 0.01,
            kernel_template: KernelSpec::default_template(),
            keepalive_s: None,
            freeze_hyperparams: false,
            search_bounds: SearchBounds::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.threshold_m.is_nan() || self.threshold_m <= 0.0 {
            return Err(Error::invalid("threshold_m", "must be positive"));
        }
        if self.window < 2 {
            return Err(Error::invalid("window", "must be at least 2"));
        }
        if !(self.rate_hz.is_finite() && self.rate_hz > 0.0) {
            return Err(Error::invalid("rate_hz", "must be positive and finite"));
        }
        if !(self.noise_var.is_finite() && self.noise_var >= 0.0) {
            return Err(Error::invalid("noise_var", "must be finite and non-negative"));
        }
        if let Some(ka) = self.keepalive_s {
            if ka.is_nan() || ka <= 0.0 {
                return Err(Error::invalid("keepalive_s", "must be positive when set"));
            }
        }
        self.kernel_template.validate()?;
        self.search_bounds.validate()
    }

    fn with_threshold(&self, threshold_m: f64) -> ScheduleConfig {
        ScheduleConfig { threshold_m, ..self.clone() }
    }
}

/// Over-the-air message payload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MessageKind {
    /// Full hybrid model update: both sub-model payloads plus the active tag.
    FullUpdate { hybrid: Box<HybridModel> },
    /// Lightweight switch naming which held sub-model to use.
    SubModelSwitch { active: SubModel },
    /// Raw position/velocity report (baseline arm).
    RawBsm { pos: Vec2, vel: Vec2 },
}

impl MessageKind {
    pub fn label(&self) -> &'static str {
        match self {
            MessageKind::FullUpdate { .. } => "full_update",
            MessageKind::SubModelSwitch { .. } => "sub_model_switch",
            MessageKind::RawBsm { .. } => "raw_bsm",
        }
    }
}

/// One transmitted message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMessage {
    /// Gapless per-transmitter sequence number.
    pub seq: u64,
    /// Transmit instant, always on the GPS grid.
    pub tx_t: f64,
    pub kind: MessageKind,
}

/// What the transmitter decided at one GPS instant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    FullUpdate,
    Switch,
    Hold,
    RawBsm,
    Keepalive,
}

/// Per-instant decision record. `pte_gp` is absent for the baseline arm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub t: f64,
    pub pte_cv: f64,
    pub pte_gp: Option<f64>,
    pub pte_min: f64,
    pub action: Action,
}

/// A transmitter run: every message sent and every decision taken.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TxLog {
    pub messages: Vec<ModelMessage>,
    pub decisions: Vec<Decision>,
}

impl TxLog {
    /// Full model updates plus raw reports; the per-arm "model update" count.
    pub fn full_update_count(&self) -> usize {
        self.messages
            .iter()
            .filter(|m| matches!(m.kind, MessageKind::FullUpdate { .. } | MessageKind::RawBsm { .. }))
            .count()
    }

    pub fn switch_count(&self) -> usize {
        self.messages
            .iter()
            .filter(|m| matches!(m.kind, MessageKind::SubModelSwitch { .. }))
            .count()
    }
}

/// Message rates over an experiment duration, in hertz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    /// FullUpdate + RawBsm messages per second.
    pub full_update_hz: f64,
    /// SubModelSwitch messages per second.
    pub switch_hz: f64,
    /// Sum of the two.
    pub total_hz: f64,
}

/// Counts of each message class divided by `duration` seconds.
pub fn effective_rates(log: &TxLog, duration: f64) -> Result<Rates> {
    if duration.is_nan() || duration <= 0.0 {
        return Err(Error::invalid("duration", "must be positive"));
    }
    let full_update_hz = log.full_update_count() as f64 / duration;
    let switch_hz = log.switch_count() as f64 / duration;
    Ok(Rates { full_update_hz, switch_hz, total_hz: full_update_hz + switch_hz })
}

fn ensure_uniform(traj: &EnuTrajectory, rate_hz: f64) -> Result<()> {
    if !traj.is_uniform(rate_hz) {
        return Err(Error::invalid("trajectory", format!("not uniform at {rate_hz} Hz")));
    }
    Ok(())
}

/// Run the hybrid MBC transmitter over a uniform trajectory.
///
/// The first message is a full update at the first instant with a complete
/// window; afterwards each instant evaluates the held hybrid and emits a
/// switch or a retrained full update as the error policy dictates.
#[allow(clippy::needless_range_loop)]
pub fn run_mbc_transmitter(traj: &EnuTrajectory, cfg: &ScheduleConfig) -> Result<TxLog> {
    cfg.validate()?;
    ensure_uniform(traj, cfg.rate_hz)?;
    let s = &traj.samples;
    if s.len() <= cfg.window {
        return Err(Error::TooFewSamples { got: s.len(), need: cfg.window + 1 });
    }

    let mut log = TxLog::default();
    let mut seq = 0u64;

    let fit_window = |end: usize| -> Result<HybridModel> {
        fit_hybrid(
            &s[end + 1 - cfg.window..=end],
            &cfg.kernel_template,
            cfg.noise_var,
            !cfg.freeze_hyperparams,
            &cfg.search_bounds,
        )
    };

    // Warm-up ends at the first complete window.
    let first = cfg.window - 1;
    let mut held = fit_window(first)?;
    let mut last_tx_t = s[first].t;
    let init_sel = select_sub_model(&held, s[first].t, Vec2::new(s[first].x, s[first].y));
    log.messages.push(ModelMessage {
        seq,
        tx_t: s[first].t,
        kind: MessageKind::FullUpdate { hybrid: Box::new(held.clone()) },
    });
    seq += 1;
    log.decisions.push(Decision {
        t: s[first].t,
        pte_cv: init_sel.pte_cv,
        pte_gp: Some(init_sel.pte_gp),
        pte_min: init_sel.pte_min(),
        action: Action::FullUpdate,
    });

    for k in cfg.window..s.len() {
        let t = s[k].t;
        let actual = Vec2::new(s[k].x, s[k].y);
        let sel = select_sub_model(&held, t, actual);
        let decision = Decision {
            t,
            pte_cv: sel.pte_cv,
            pte_gp: Some(sel.pte_gp),
            pte_min: sel.pte_min(),
            action: Action::Hold,
        };

        if sel.pte_min() >= cfg.threshold_m {
            held = fit_window(k)?;
            // The freshly evaluated arg-min: the fresh CV's anchor residual
            // is identically zero at the emission instant, so the instant's
            // selection (of the model that just violated) is what carries
            // information about which sub-model class is tracking better.
            held.active = sel.active;
            log.messages.push(ModelMessage { seq, tx_t: t, kind: MessageKind::FullUpdate { hybrid: Box::new(held.clone()) } });
            seq += 1;
            last_tx_t = t;
            log.decisions.push(Decision { action: Action::FullUpdate, ..decision });
        } else if sel.active != held.active {
            held.active = sel.active;
            log.messages.push(ModelMessage { seq, tx_t: t, kind: MessageKind::SubModelSwitch { active: sel.active } });
            seq += 1;
            last_tx_t = t;
            log.decisions.push(Decision { action: Action::Switch, ..decision });
        } else if cfg.keepalive_s.is_some_and(|ka| t - last_tx_t >= ka - TIME_TOL_S) {
            held = fit_window(k)?;
            held.active = sel.active;
            log.messages.push(ModelMessage { seq, tx_t: t, kind: MessageKind::FullUpdate { hybrid: Box::new(held.clone()) } });
            seq += 1;
            last_tx_t = t;
            log.decisions.push(Decision { action: Action::Keepalive, ..decision });
        } else {
            log.decisions.push(decision);
        }
    }

    Ok(log)
}

/// Run the raw-BSM baseline transmitter: transmit at the first instant with
/// a velocity estimate, then whenever constant-speed coasting of the last
/// report deviates from the actual position by the threshold or more.
#[allow(clippy::needless_range_loop)]
pub fn run_baseline_transmitter(traj: &EnuTrajectory, cfg: &ScheduleConfig) -> Result<TxLog> {
    cfg.validate()?;
    ensure_uniform(traj, cfg.rate_hz)?;
    let s = &traj.samples;
    if s.len() < 2 {
        return Err(Error::TooFewSamples { got: s.len(), need: 2 });
    }

    let raw_at = |k: usize| -> (Vec2, Vec2) {
        let dt = s[k].t - s[k - 1].t;
        let pos = Vec2::new(s[k].x, s[k].y);
        let vel = Vec2::new((s[k].x - s[k - 1].x) / dt, (s[k].y - s[k - 1].y) / dt);
        (pos, vel)
    };

    let mut log = TxLog::default();
    let mut seq = 0u64;

    let (pos, vel) = raw_at(1);
    let mut held = (s[1].t, pos, vel);
    log.messages.push(ModelMessage { seq, tx_t: s[1].t, kind: MessageKind::RawBsm { pos, vel } });
    seq += 1;
    log.decisions.push(Decision { t: s[1].t, pte_cv: 0.0, pte_gp: None, pte_min: 0.0, action: Action::RawBsm });

    for k in 2..s.len() {
        let t = s[k].t;
        let actual = Vec2::new(s[k].x, s[k].y);
        let (tx_t, pos, vel) = held;
        let coasted = Vec2::new(pos.x + vel.x * (t - tx_t), pos.y + vel.y * (t - tx_t));
        let err = pte(coasted, actual);

        if err >= cfg.threshold_m {
            let (pos, vel) = raw_at(k);
            held = (t, pos, vel);
            log.messages.push(ModelMessage { seq, tx_t: t, kind: MessageKind::RawBsm { pos, vel } });
            seq += 1;
            log.decisions.push(Decision { t, pte_cv: err, pte_gp: None, pte_min: err, action: Action::RawBsm });
        } else if cfg.keepalive_s.is_some_and(|ka| t - held.0 >= ka - TIME_TOL_S) {
            let (pos, vel) = raw_at(k);
            held = (t, pos, vel);
            log.messages.push(ModelMessage { seq, tx_t: t, kind: MessageKind::RawBsm { pos, vel } });
            seq += 1;
            log.decisions.push(Decision { t, pte_cv: err, pte_gp: None, pte_min: err, action: Action::Keepalive });
        } else {
            log.decisions.push(Decision { t, pte_cv: err, pte_gp: None, pte_min: err, action: Action::Hold });
        }
    }

    Ok(log)
}

/// Find the baseline threshold whose message count best matches
/// `target_count` (the fair-comparison protocol: the baseline transmits on
/// the MBC arm's full-update budget). Bisection over the threshold; ties on
/// count distance prefer the more generous (larger) count, then the smaller
/// threshold. Returns the chosen threshold and its log.
pub fn match_baseline_rate(
    traj: &EnuTrajectory,
    cfg: &ScheduleConfig,
    target_count: usize,
) -> Result<(f64, TxLog)> {
    let run = |theta: f64| -> Result<(f64, TxLog)> {
        let log = run_baseline_transmitter(traj, &cfg.with_threshold(theta))?;
        Ok((theta, log))
    };

    let better = |a: &(f64, TxLog), b: &(f64, TxLog)| -> bool {
        let ca = a.1.full_update_count() as i64;
        let cb = b.1.full_update_count() as i64;
        let da = (ca - target_count as i64).abs();
        let db = (cb - target_count as i64).abs();
        if da != db {
            return da < db;
        }
        if ca != cb {
            return ca > cb;
        }
        a.0 < b.0
    };

    let mut lo = 1e-3;
    let mut hi = 64.0;
    let lo_run = run(lo)?;
    let hi_run = run(hi)?;
    let mut best = if better(&lo_run, &hi_run) { lo_run } else { hi_run };

    for _ in 0..48 {
        let mid = 0.5 * (lo + hi);
        let cand = run(mid)?;
        let count = cand.1.full_update_count();
        if better(&cand, &best) {
            best = cand;
        }
        if count > target_count {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(best)
}
