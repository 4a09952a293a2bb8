//! Trace-driven simulator for hybrid model-based V2X communication.
//!
//! A transmitting vehicle fits a two-state hybrid motion model — constant
//! velocity plus a per-axis Gaussian process with a compound linear + RBF
//! kernel — over a sliding window of its own GPS track, and transmits only
//! when the model's self-evaluated tracking error crosses a threshold.
//! A receiving vehicle reconstructs the transmitter's position from the
//! most recent delivered model. The crate covers the full loop:
//!
//! - [`geo`]: trace parsing, WGS-84 geodetic to local ENU conversion,
//!   uniform resampling
//! - [`gp`]: exact GP regression (kernels, Cholesky posterior, marginal
//!   likelihood, hyperparameter search)
//! - [`models`]: CV and GP sub-models and the hybrid selector
//! - [`scheduler`]: error-driven transmitters for the model-based and
//!   raw-message arms
//! - [`channel`]: seeded Bernoulli packet erasure
//! - [`tracker`]: receiver replay, tracking-error series, percentiles, ECDF
//! - [`synth`]: deterministic synthetic trajectories
//! - [`experiment`]: one (threshold, PER) sweep cell end to end

pub mod channel;
pub mod error;
pub mod experiment;
pub mod geo;
pub mod gp;
pub mod models;
pub mod scheduler;
pub mod synth;
pub mod tracker;

pub use error::{Error, Result};
