//! Deterministic synthetic trajectory generator.
//!
//! Stands in for field-collected trips: closed-form kinematics sampled on
//! the GPS grid, with scenarios chosen to exercise the maneuvers that defeat
//! constant-velocity coasting (lane changes, hard brakes).

use rand::SeedableRng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{EnuSample, EnuTrajectory, GeodeticFix};

/// One scenario segment. Longitudinal motion runs along +x; lane changes
/// shift y.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScenarioKind {
    /// Constant speed along +x.
    Cruise { speed_mps: f64 },
    /// Cruise at `speed_mps` while shifting `lateral_m` over `duration_s`
    /// on a smoothstep profile (zero lateral velocity at both ends).
    LaneChange { speed_mps: f64, lateral_m: f64, duration_s: f64 },
    /// Decelerate from `v0_mps` at `decel_mps2` until stopped, then stay.
    HardBrake { v0_mps: f64, decel_mps2: f64 },
    /// Contiguous segments, each evaluated for its own duration.
    Mixed { segments: Vec<Segment> },
}

/// A [`ScenarioKind::Mixed`] building block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub kind: ScenarioKind,
    pub duration_s: f64,
}

/// Scenario plus sampling parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    /// Sample rate, default 10 Hz.
    #[serde(default = "default_rate")]
    pub rate_hz: f64,
    /// Additive Gaussian position noise (standard deviation per axis), off
    /// by default.
    #[serde(default)]
    pub noise_std_m: f64,
}

fn default_rate() -> f64 {
    10.0
}

impl ScenarioSpec {
    pub fn new(kind: ScenarioKind) -> ScenarioSpec {
        ScenarioSpec { kind, rate_hz: 10.0, noise_std_m: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rate_hz.is_finite() && self.rate_hz > 0.0) {
            return Err(Error::invalid("rate_hz", "must be positive"));
        }
        if !(self.noise_std_m.is_finite() && self.noise_std_m >= 0.0) {
            return Err(Error::invalid("noise_std_m", "must be non-negative"));
        }
        validate_kind(&self.kind, true)
    }
}

fn validate_kind(kind: &ScenarioKind, allow_mixed: bool) -> Result<()> {
    match kind {
        ScenarioKind::Cruise { speed_mps } => {
            if !(speed_mps.is_finite() && *speed_mps >= 0.0) {
                return Err(Error::invalid("scenario", "cruise speed must be non-negative"));
            }
        }
        ScenarioKind::LaneChange { speed_mps, lateral_m, duration_s } => {
            if !(speed_mps.is_finite() && *speed_mps >= 0.0) {
                return Err(Error::invalid("scenario", "lane-change speed must be non-negative"));
            }
            if !lateral_m.is_finite() || *lateral_m == 0.0 {
                return Err(Error::invalid("scenario", "lateral shift must be non-zero"));
            }
            if !(duration_s.is_finite() && *duration_s > 0.0) {
                return Err(Error::invalid("scenario", "lane-change duration must be positive"));
            }
        }
        ScenarioKind::HardBrake { v0_mps, decel_mps2 } => {
            if !(v0_mps.is_finite() && *v0_mps > 0.0) {
                return Err(Error::invalid("scenario", "brake initial speed must be positive"));
            }
            if !(decel_mps2.is_finite() && *decel_mps2 > 0.0) {
                return Err(Error::invalid("scenario", "deceleration must be positive"));
            }
        }
        ScenarioKind::Mixed { segments } => {
            if !allow_mixed {
                return Err(Error::invalid("scenario", "nested mixed segments"));
            }
            if segments.is_empty() {
                return Err(Error::invalid("scenario", "mixed scenario needs segments"));
            }
            for seg in segments {
                if !(seg.duration_s.is_finite() && seg.duration_s > 0.0) {
                    return Err(Error::invalid("scenario", "segment duration must be positive"));
                }
                validate_kind(&seg.kind, false)?;
            }
        }
    }
    Ok(())
}

/// Position offset of one segment kind at local time `tau >= 0`, relative to
/// the segment start.
fn eval_kind(kind: &ScenarioKind, tau: f64) -> (f64, f64) {
    match kind {
        ScenarioKind::Cruise { speed_mps } => (speed_mps * tau, 0.0),
        ScenarioKind::LaneChange { speed_mps, lateral_m, duration_s } => {
            let u = (tau / duration_s).clamp(0.0, 1.0);
            let s = u * u * (3.0 - 2.0 * u);
            (speed_mps * tau, lateral_m * s)
        }
        ScenarioKind::HardBrake { v0_mps, decel_mps2 } => {
            let t_stop = v0_mps / decel_mps2;
            let tm = tau.min(t_stop);
            (v0_mps * tm - 0.5 * decel_mps2 * tm * tm, 0.0)
        }
        ScenarioKind::Mixed { .. } => unreachable!("mixed segments are flattened before evaluation"),
    }
}

/// Sample a scenario on the grid `t = k / rate_hz` over `[0, duration_s]`.
/// For `Mixed`, time past the final segment extends that segment's own
/// kinematics (a finished brake stays stopped, a cruise keeps cruising).
/// With `noise_std_m = 0` the output is independent of `seed`.
pub fn generate(spec: &ScenarioSpec, duration_s: f64, seed: u64) -> Result<EnuTrajectory> {
    spec.validate()?;
    if !(duration_s.is_finite() && duration_s > 0.0) {
        return Err(Error::invalid("duration_s", "must be positive"));
    }

    // Flatten to a list of (start_t, start_x, start_y, kind); the last
    // segment is open-ended.
    struct Piece {
        start_t: f64,
        start_x: f64,
        start_y: f64,
        kind: ScenarioKind,
        end_t: f64,
    }
    let mut pieces: Vec<Piece> = Vec::new();
    match &spec.kind {
        ScenarioKind::Mixed { segments } => {
            let (mut t, mut x, mut y) = (0.0, 0.0, 0.0);
            for seg in segments {
                pieces.push(Piece { start_t: t, start_x: x, start_y: y, kind: seg.kind.clone(), end_t: t + seg.duration_s });
                let (dx, dy) = eval_kind(&seg.kind, seg.duration_s);
                x += dx;
                y += dy;
                t += seg.duration_s;
            }
            pieces.last_mut().unwrap().end_t = f64::INFINITY;
        }
        kind => pieces.push(Piece { start_t: 0.0, start_x: 0.0, start_y: 0.0, kind: kind.clone(), end_t: f64::INFINITY }),
    }

    let steps = (duration_s * spec.rate_hz + 1e-9).floor() as usize;
    let mut noise = if spec.noise_std_m > 0.0 {
        let rng = rand::rngs::StdRng::seed_from_u64(seed);
        let dist = Normal::new(0.0, spec.noise_std_m)
            .map_err(|e| Error::invalid("noise_std_m", e.to_string()))?;
        Some((rng, dist))
    } else {
        None
    };

    let mut samples = Vec::with_capacity(steps + 1);
    let mut piece_idx = 0;
    for k in 0..=steps {
        let t = k as f64 / spec.rate_hz;
        while piece_idx + 1 < pieces.len() && t >= pieces[piece_idx].end_t {
            piece_idx += 1;
        }
        let piece = &pieces[piece_idx];
        let (dx, dy) = eval_kind(&piece.kind, t - piece.start_t);
        let (mut x, mut y) = (piece.start_x + dx, piece.start_y + dy);
        if let Some((rng, dist)) = noise.as_mut() {
            x += dist.sample(rng);
            y += dist.sample(rng);
        }
        samples.push(EnuSample { t, x, y });
    }

    EnuTrajectory::new(
        GeodeticFix { t: 0.0, lat: 0.0, lon: 0.0, alt: 0.0 },
        samples,
        spec.rate_hz,
    )
}

/// The canonical demo trip: cruise, lane change, cruise, hard brake. The
/// trace ends the instant the vehicle comes to rest, and carries 10 cm GPS
/// position noise per axis, matching the default observation-noise setting
/// of the scheduler.
pub fn mixed_demo() -> (ScenarioSpec, f64) {
    let segments = vec![
        Segment { kind: ScenarioKind::Cruise { speed_mps: 12.0 }, duration_s: 10.0 },
        Segment {
            kind: ScenarioKind::LaneChange { speed_mps: 12.0, lateral_m: 3.5, duration_s: 3.0 },
            duration_s: 3.0,
        },
        Segment { kind: ScenarioKind::Cruise { speed_mps: 12.0 }, duration_s: 5.0 },
        Segment { kind: ScenarioKind::HardBrake { v0_mps: 12.0, decel_mps2: 4.0 }, duration_s: 3.0 },
    ];
    let mut spec = ScenarioSpec::new(ScenarioKind::Mixed { segments });
    spec.noise_std_m = 0.1;
    (spec, 21.0)
}

/// All bundled scenarios by name, as accepted on the command line.
pub fn by_name(name: &str) -> Option<(ScenarioSpec, f64)> {
    match name {
        "cruise" => Some((ScenarioSpec::new(ScenarioKind::Cruise { speed_mps: 12.0 }), 20.0)),
        "lane-change" => Some((
            ScenarioSpec::new(ScenarioKind::Mixed {
                segments: vec![
                    Segment { kind: ScenarioKind::Cruise { speed_mps: 12.0 }, duration_s: 3.0 },
                    Segment {
                        kind: ScenarioKind::LaneChange { speed_mps: 12.0, lateral_m: 3.5, duration_s: 3.0 },
                        duration_s: 3.0,
                    },
                    Segment { kind: ScenarioKind::Cruise { speed_mps: 12.0 }, duration_s: 4.0 },
                ],
            }),
            10.0,
        )),
        "hard-brake" => Some((
            ScenarioSpec::new(ScenarioKind::Mixed {
                segments: vec![
                    Segment { kind: ScenarioKind::Cruise { speed_mps: 15.0 }, duration_s: 4.0 },
                    Segment { kind: ScenarioKind::HardBrake { v0_mps: 15.0, decel_mps2: 5.0 }, duration_s: 5.0 },
                ],
            }),
            9.0,
        )),
        "mixed-demo" => Some(mixed_demo()),
        _ => None,
    }
}
