//! Exact Gaussian-process regression over scalar time series.
//!
//! A trajectory axis is modeled as `f(t) ~ gp(m(t), k(t, t'))` with a
//! compound kernel; the posterior at a query point is obtained by
//! conditioning on the training window through a Cholesky factorization of
//! the noise-augmented Gram matrix.
//!
//! Time convention: [`fit`] rebases the training window so its first
//! timestamp sits at 0 before any kernel evaluation, and rebases query
//! points the same way at prediction. A `Linear` kernel with `offset_t = 0`
//! is therefore anchored at the window start. [`kernel_eval`] itself applies
//! no rebasing.

mod optimize;

pub use optimize::{optimize_hyperparams, SearchBounds};

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maximum nesting depth of `Sum` kernels.
pub const MAX_KERNEL_DEPTH: usize = 4;

/// Jitter escalation for Cholesky stabilization: start value and cap.
const JITTER_START: f64 = 1e-10;
const JITTER_MAX: f64 = 1e-4;

/// Covariance function over scalar time inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum KernelSpec {
    /// `k(t, t') = variance * (t - offset_t) * (t' - offset_t)`
    Linear { variance: f64, offset_t: f64 },
    /// `k(t, t') = variance * exp(-(t - t')^2 / (2 * lengthscale^2))`
    Rbf { variance: f64, lengthscale: f64 },
    /// Sum of two kernels.
    Sum { left: Box<KernelSpec>, right: Box<KernelSpec> },
}

impl KernelSpec {
    pub fn sum(left: KernelSpec, right: KernelSpec) -> KernelSpec {
        KernelSpec::Sum { left: Box::new(left), right: Box::new(right) }
    }

    /// The compound linear + RBF kernel used for position time series.
    pub fn default_template() -> KernelSpec {
        KernelSpec::sum(
            KernelSpec::Linear { variance: 1.0, offset_t: 0.0 },
            KernelSpec::Rbf { variance: 1.0, lengthscale: 1.0 },
        )
    }

    fn depth(&self) -> usize {
        match self {
            KernelSpec::Sum { left, right } => 1 + left.depth().max(right.depth()),
            _ => 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth() > MAX_KERNEL_DEPTH {
            return Err(Error::invalid("kernel", "Sum nesting deeper than 4"));
        }
        self.validate_params()
    }

    fn validate_params(&self) -> Result<()> {
        match self {
            KernelSpec::Linear { variance, offset_t } => {
                if !(variance.is_finite() && *variance > 0.0) {
                    return Err(Error::invalid("kernel", "linear variance must be positive"));
                }
                if !offset_t.is_finite() {
                    return Err(Error::invalid("kernel", "linear offset must be finite"));
                }
            }
            KernelSpec::Rbf { variance, lengthscale } => {
                if !(variance.is_finite() && *variance > 0.0) {
                    return Err(Error::invalid("kernel", "rbf variance must be positive"));
                }
                if !(lengthscale.is_finite() && *lengthscale > 0.0) {
                    return Err(Error::invalid("kernel", "rbf lengthscale must be positive"));
                }
            }
            KernelSpec::Sum { left, right } => {
                left.validate_params()?;
                right.validate_params()?;
            }
        }
        Ok(())
    }
}

/// Evaluate the covariance `k(t, t2)`.
pub fn kernel_eval(spec: &KernelSpec, t: f64, t2: f64) -> f64 {
    match spec {
        KernelSpec::Linear { variance, offset_t } => variance * (t - offset_t) * (t2 - offset_t),
        KernelSpec::Rbf { variance, lengthscale } => {
            let d = (t - t2) / lengthscale;
            variance * (-0.5 * d * d).exp()
        }
        KernelSpec::Sum { left, right } => kernel_eval(left, t, t2) + kernel_eval(right, t, t2),
    }
}

/// Build the Gram matrix `K[i][j] = k(ts[i], ts[j])` with `noise_var` added
/// on the diagonal. Stabilization jitter is not included here; it is applied
/// during factorization when needed.
pub fn gram(spec: &KernelSpec, ts: &[f64], noise_var: f64) -> Result<DMatrix<f64>> {
    if ts.is_empty() {
        return Err(Error::TooFewSamples { got: 0, need: 1 });
    }
    let m = ts.len();
    let mut k = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..=i {
            let v = kernel_eval(spec, ts[i], ts[j]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    for i in 0..m {
        k[(i, i)] += noise_var;
    }
    Ok(k)
}

/// Factor `k`, escalating diagonal jitter from 1e-10 by decades up to 1e-4
/// until the Cholesky succeeds. Returns the factorization and the jitter
/// actually applied (0 when none was needed).
fn cholesky_with_jitter(k: &DMatrix<f64>) -> Result<(Cholesky<f64, Dyn>, f64)> {
    if let Some(chol) = k.clone().cholesky() {
        return Ok((chol, 0.0));
    }
    let mut jitter = JITTER_START;
    while jitter <= JITTER_MAX {
        let mut kj = k.clone();
        for i in 0..kj.nrows() {
            kj[(i, i)] += jitter;
        }
        if let Some(chol) = kj.cholesky() {
            log::warn!("gram matrix required jitter {jitter:e} to factor");
            return Ok((chol, jitter));
        }
        jitter *= 10.0;
    }
    Err(Error::CholeskyFailure { max_jitter: JITTER_MAX })
}

/// A fitted per-axis GP: the training window plus solved weights.
///
/// Serializes to the window and hyperparameters only; the factorization is
/// rebuilt on deserialization, which reproduces `alpha` bit for bit because
/// the solve is deterministic.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(into = "GpPayload", try_from = "GpPayload")]
pub struct TrainedGp {
    kernel: KernelSpec,
    noise_var: f64,
    t0: f64,
    train_t: Vec<f64>,
    train_y: Vec<f64>,
    mean_fn: f64,
    alpha: DVector<f64>,
    chol: Cholesky<f64, Dyn>,
    jitter: f64,
}

impl PartialEq for TrainedGp {
    fn eq(&self, other: &Self) -> bool {
        self.kernel == other.kernel
            && self.noise_var == other.noise_var
            && self.train_t == other.train_t
            && self.train_y == other.train_y
    }
}

/// Minimal canonical encoding of a trained GP.
#[derive(Serialize, Deserialize)]
struct GpPayload {
    kernel: KernelSpec,
    noise_var: f64,
    train_t: Vec<f64>,
    train_y: Vec<f64>,
}

impl From<TrainedGp> for GpPayload {
    fn from(gp: TrainedGp) -> Self {
        GpPayload {
            kernel: gp.kernel,
            noise_var: gp.noise_var,
            train_t: gp.train_t,
            train_y: gp.train_y,
        }
    }
}

impl TryFrom<GpPayload> for TrainedGp {
    type Error = Error;
    fn try_from(p: GpPayload) -> Result<TrainedGp> {
        fit(&p.train_t, &p.train_y, &p.kernel, p.noise_var)
    }
}

/// Fit a GP to a scalar time series by solving `(K + noise_var I) alpha = y - mean`
/// through a Cholesky factorization. The prior mean is the mean of the
/// window targets. Timestamps must be strictly increasing.
pub fn fit(ts: &[f64], ys: &[f64], spec: &KernelSpec, noise_var: f64) -> Result<TrainedGp> {
    spec.validate()?;
    if ts.is_empty() {
        return Err(Error::TooFewSamples { got: 0, need: 1 });
    }
    if ts.len() != ys.len() {
        return Err(Error::invalid("window", "timestamp/target length mismatch"));
    }
    if ts.iter().any(|t| !t.is_finite()) || ys.iter().any(|y| !y.is_finite()) {
        return Err(Error::invalid("window", "non-finite sample"));
    }
    for pair in ts.windows(2) {
        if pair[1] <= pair[0] {
            return Err(Error::invalid("window", "timestamps not strictly increasing"));
        }
    }
    if !(noise_var.is_finite() && noise_var >= 0.0) {
        return Err(Error::invalid("noise_var", "must be finite and non-negative"));
    }

    let t0 = ts[0];
    let shifted: Vec<f64> = ts.iter().map(|t| t - t0).collect();
    let mean_fn = ys.iter().sum::<f64>() / ys.len() as f64;
    let k = gram(spec, &shifted, noise_var)?;
    let (chol, jitter) = cholesky_with_jitter(&k)?;
    let centered = DVector::from_iterator(ys.len(), ys.iter().map(|y| y - mean_fn));
    let alpha = chol.solve(&centered);

    Ok(TrainedGp {
        kernel: spec.clone(),
        noise_var,
        t0,
        train_t: ts.to_vec(),
        train_y: ys.to_vec(),
        mean_fn,
        alpha,
        chol,
        jitter,
    })
}

impl TrainedGp {
    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    pub fn train_t(&self) -> &[f64] {
        &self.train_t
    }

    pub fn train_y(&self) -> &[f64] {
        &self.train_y
    }

    /// Constant prior mean (mean of the window targets).
    pub fn mean_fn(&self) -> f64 {
        self.mean_fn
    }

    /// Solved weight vector `(K + noise_var I)^-1 (y - mean_fn)`.
    pub fn alpha(&self) -> &[f64] {
        self.alpha.as_slice()
    }

    /// Stabilization jitter applied during factorization, 0 when unneeded.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Lower-triangular factor of `K + noise_var I` (plus jitter if applied).
    pub fn chol_lower(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    fn k_star(&self, t_star: f64) -> DVector<f64> {
        let s = t_star - self.t0;
        DVector::from_iterator(
            self.train_t.len(),
            self.train_t.iter().map(|t| kernel_eval(&self.kernel, s, t - self.t0)),
        )
    }

    /// Posterior mean at `t_star`: `mean_fn + k_*^T alpha`.
    pub fn predict_mean(&self, t_star: f64) -> f64 {
        self.mean_fn + self.k_star(t_star).dot(&self.alpha)
    }

    /// Posterior variance at `t_star`:
    /// `k(t*, t*) - k_*^T (K + noise_var I)^-1 k_*`, clamped to 0 from below.
    pub fn predict_var(&self, t_star: f64) -> f64 {
        let k_star = self.k_star(t_star);
        let s = t_star - self.t0;
        let prior = kernel_eval(&self.kernel, s, s);
        let w = self.chol.solve(&k_star);
        let var = prior - k_star.dot(&w);
        if var < 0.0 {
            if var < -1e-9 {
                log::warn!("predictive variance clamp exceeded tolerance: {var:e}");
            } else {
                log::debug!("clamped negative predictive variance {var:e}");
            }
            return 0.0;
        }
        var
    }

    /// Log marginal likelihood of the training window:
    /// `-1/2 r^T alpha - sum(log L_ii) - m/2 log(2 pi)` with `r = y - mean_fn`.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let m = self.train_t.len() as f64;
        let r = DVector::from_iterator(
            self.train_y.len(),
            self.train_y.iter().map(|y| y - self.mean_fn),
        );
        let data_fit = -0.5 * r.dot(&self.alpha);
        let l = self.chol.l_dirty();
        let log_det_half: f64 = (0..self.train_t.len()).map(|i| l[(i, i)].ln()).sum();
        data_fit - log_det_half - 0.5 * m * (2.0 * std::f64::consts::PI).ln()
    }
}
