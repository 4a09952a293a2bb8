//! Predictive motion sub-models and the two-state hybrid selector.
//!
//! A hybrid carries a constant-velocity model and a per-axis GP trained on
//! the same window, plus a flag naming which one the receiver should use.
//! Both sub-models ride in every full update so a later sub-model switch
//! needs no retransmission of payloads.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::EnuSample;
use crate::gp::{self, KernelSpec, SearchBounds, TrainedGp};

/// 2D vector in the local East-North frame, meters or meters/second.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub fn new(x: f64, y: f64) -> Vec2 {
        Vec2 { x, y }
    }

    pub fn distance(self, other: Vec2) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }
}

/// Constant-velocity coasting model anchored at the last window sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvModel {
    pub anchor_t: f64,
    pub anchor_pos: Vec2,
    pub velocity: Vec2,
}

impl CvModel {
    /// Position coasted to `t_star`.
    pub fn predict(&self, t_star: f64) -> Vec2 {
        let dt = t_star - self.anchor_t;
        Vec2::new(self.anchor_pos.x + self.velocity.x * dt, self.anchor_pos.y + self.velocity.y * dt)
    }
}

/// Per-axis GP model; East and North are separate time series trained on
/// identical timestamps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpModel {
    pub gp_x: TrainedGp,
    pub gp_y: TrainedGp,
    pub window_end_t: f64,
}

impl GpModel {
    pub fn predict(&self, t_star: f64) -> Vec2 {
        Vec2::new(self.gp_x.predict_mean(t_star), self.gp_y.predict_mean(t_star))
    }
}

/// Which sub-model of a hybrid is active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubModel {
    Cv,
    Gp,
}

/// Two-state hybrid: both sub-models plus the active flag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridModel {
    pub cv: CvModel,
    pub gp: GpModel,
    pub active: SubModel,
}

impl HybridModel {
    pub fn predict(&self, sub: SubModel, t_star: f64) -> Vec2 {
        match sub {
            SubModel::Cv => self.cv.predict(t_star),
            SubModel::Gp => self.gp.predict(t_star),
        }
    }

    pub fn predict_active(&self, t_star: f64) -> Vec2 {
        self.predict(self.active, t_star)
    }
}

/// Fit a constant-velocity model: anchor at the last window sample, velocity
/// from the finite difference of the last two samples.
pub fn fit_cv(window: &[EnuSample]) -> Result<CvModel> {
    if window.len() < 2 {
        return Err(Error::TooFewSamples { got: window.len(), need: 2 });
    }
    let last = window[window.len() - 1];
    let prev = window[window.len() - 2];
    let dt = last.t - prev.t;
    if dt.is_nan() || dt <= 0.0 {
        return Err(Error::invalid("window", "timestamps not strictly increasing"));
    }
    Ok(CvModel {
        anchor_t: last.t,
        anchor_pos: Vec2::new(last.x, last.y),
        velocity: Vec2::new((last.x - prev.x) / dt, (last.y - prev.y) / dt),
    })
}

/// Fit per-axis GPs over the window with the given kernels.
pub fn fit_gp(
    window: &[EnuSample],
    kernel_x: &KernelSpec,
    kernel_y: &KernelSpec,
    noise_var: f64,
) -> Result<GpModel> {
    if window.is_empty() {
        return Err(Error::TooFewSamples { got: 0, need: 1 });
    }
    let ts: Vec<f64> = window.iter().map(|s| s.t).collect();
    let xs: Vec<f64> = window.iter().map(|s| s.x).collect();
    let ys: Vec<f64> = window.iter().map(|s| s.y).collect();
    Ok(GpModel {
        gp_x: gp::fit(&ts, &xs, kernel_x, noise_var)?,
        gp_y: gp::fit(&ts, &ys, kernel_y, noise_var)?,
        window_end_t: ts[ts.len() - 1],
    })
}

/// Fit a fresh hybrid on a window. When `optimize` is set the kernel
/// hyperparameters are re-selected per axis; otherwise the template is used
/// as given. The active flag is the arg-min sub-model at the window end,
/// which is CV by the tie rule since its anchor residual is exactly zero.
pub fn fit_hybrid(
    window: &[EnuSample],
    template: &KernelSpec,
    noise_var: f64,
    optimize: bool,
    bounds: &SearchBounds,
) -> Result<HybridModel> {
    let cv = fit_cv(window)?;
    let ts: Vec<f64> = window.iter().map(|s| s.t).collect();
    let xs: Vec<f64> = window.iter().map(|s| s.x).collect();
    let ys: Vec<f64> = window.iter().map(|s| s.y).collect();
    let (kx, ky) = if optimize {
        (
            gp::optimize_hyperparams(&ts, &xs, template, bounds, noise_var)?,
            gp::optimize_hyperparams(&ts, &ys, template, bounds, noise_var)?,
        )
    } else {
        (template.clone(), template.clone())
    };
    let gp = fit_gp(window, &kx, &ky, noise_var)?;

    let last = window[window.len() - 1];
    let mut hybrid = HybridModel { cv, gp, active: SubModel::Cv };
    let sel = select_sub_model(&hybrid, last.t, Vec2::new(last.x, last.y));
    hybrid.active = sel.active;
    Ok(hybrid)
}

/// 2D position tracking error between a predicted and an actual position.
pub fn pte(predicted: Vec2, actual: Vec2) -> f64 {
    predicted.distance(actual)
}

/// Outcome of evaluating both sub-models against an actual position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub active: SubModel,
    pub pte_cv: f64,
    pub pte_gp: f64,
}

impl Selection {
    pub fn pte_min(&self) -> f64 {
        self.pte_cv.min(self.pte_gp)
    }
}

/// Evaluate both sub-models at `(t, actual)` and pick the arg-min, breaking
/// ties toward CV.
pub fn select_sub_model(hybrid: &HybridModel, t: f64, actual: Vec2) -> Selection {
    let pte_cv = pte(hybrid.predict(SubModel::Cv, t), actual);
    let pte_gp = pte(hybrid.predict(SubModel::Gp, t), actual);
    let active = if pte_cv <= pte_gp { SubModel::Cv } else { SubModel::Gp };
    Selection { active, pte_cv, pte_gp }
}
