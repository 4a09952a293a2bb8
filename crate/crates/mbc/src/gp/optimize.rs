//! Hyperparameter selection by log-marginal-likelihood maximization.
//!
//! Derivative-free and deterministic: a fixed set of three starting points,
//! each refined by a Nelder-Mead simplex over the log-parameters, projected
//! onto the search box. Linear-kernel offsets are pinned to the window
//! midpoint and are not searched.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::{fit, KernelSpec};

/// Box constraints for the search, shared by every kernel in the template.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchBounds {
    /// Range for every variance parameter (amplitude squared).
    pub variance: (f64, f64),
    /// Range for every RBF lengthscale, in seconds.
    pub lengthscale: (f64, f64),
}

impl Default for SearchBounds {
    fn default() -> Self {
        SearchBounds { variance: (1e-4, 1e4), lengthscale: (0.05, 10.0) }
    }
}

impl SearchBounds {
    pub fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [("variance", self.variance), ("lengthscale", self.lengthscale)] {
            if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && lo <= hi) {
                return Err(Error::EmptyBounds(format!("{name} range [{lo}, {hi}]")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, PartialEq)]
enum ParamKind {
    Variance,
    Lengthscale,
}

fn collect_params(spec: &KernelSpec, out: &mut Vec<(ParamKind, f64)>) {
    match spec {
        KernelSpec::Linear { variance, .. } => out.push((ParamKind::Variance, *variance)),
        KernelSpec::Rbf { variance, lengthscale } => {
            out.push((ParamKind::Variance, *variance));
            out.push((ParamKind::Lengthscale, *lengthscale));
        }
        KernelSpec::Sum { left, right } => {
            collect_params(left, out);
            collect_params(right, out);
        }
    }
}

fn rebuild(spec: &KernelSpec, params: &[f64], next: &mut usize, offset_t: f64) -> KernelSpec {
    match spec {
        KernelSpec::Linear { .. } => {
            let variance = params[*next];
            *next += 1;
            KernelSpec::Linear { variance, offset_t }
        }
        KernelSpec::Rbf { .. } => {
            let variance = params[*next];
            let lengthscale = params[*next + 1];
            *next += 2;
            KernelSpec::Rbf { variance, lengthscale }
        }
        KernelSpec::Sum { left, right } => {
            let l = rebuild(left, params, next, offset_t);
            let r = rebuild(right, params, next, offset_t);
            KernelSpec::sum(l, r)
        }
    }
}

/// Pick the kernel within `bounds` maximizing the log marginal likelihood of
/// the window, keeping the template's structure. Deterministic given its
/// inputs. Returned linear offsets are pinned to the window midpoint.
pub fn optimize_hyperparams(
    ts: &[f64],
    ys: &[f64],
    template: &KernelSpec,
    bounds: &SearchBounds,
    noise_var: f64,
) -> Result<KernelSpec> {
    optimize_with_trace(ts, ys, template, bounds, noise_var, None)
}

/// As [`optimize_hyperparams`], optionally recording the best objective
/// value (negative LML) after each simplex iteration, one inner vector per
/// starting point.
pub(crate) fn optimize_with_trace(
    ts: &[f64],
    ys: &[f64],
    template: &KernelSpec,
    bounds: &SearchBounds,
    noise_var: f64,
    mut trace: Option<&mut Vec<Vec<f64>>>,
) -> Result<KernelSpec> {
    template.validate()?;
    bounds.validate()?;
    if ts.len() < 2 {
        return Err(Error::TooFewSamples { got: ts.len(), need: 2 });
    }

    let mut kinds = Vec::new();
    collect_params(template, &mut kinds);
    let n = kinds.len();

    // Linear offsets are pinned to the window midpoint (in the rebased time
    // frame the fit uses). Centered-in-time linear kernels keep straight-line
    // trends inside the kernel's span, so the fitted slope survives
    // extrapolation far past the window instead of decaying with the RBF.
    let offset_t = (ts[ts.len() - 1] - ts[0]) / 2.0;

    let range = |kind: ParamKind| match kind {
        ParamKind::Variance => bounds.variance,
        ParamKind::Lengthscale => bounds.lengthscale,
    };
    let lo: Vec<f64> = kinds.iter().map(|(k, _)| range(*k).0.ln()).collect();
    let hi: Vec<f64> = kinds.iter().map(|(k, _)| range(*k).1.ln()).collect();
    let start: Vec<f64> = kinds
        .iter()
        .enumerate()
        .map(|(i, (_, v))| v.ln().clamp(lo[i], hi[i]))
        .collect();

    let free: Vec<usize> = (0..n).filter(|&i| hi[i] - lo[i] > 1e-12).collect();

    let build = |ln_params: &[f64]| -> KernelSpec {
        let params: Vec<f64> = ln_params.iter().map(|p| p.exp()).collect();
        let mut next = 0;
        rebuild(template, &params, &mut next, offset_t)
    };

    if free.is_empty() {
        // Singleton grid: every parameter is pinned by its bounds.
        return Ok(build(&start));
    }

    let mut objective = |ln_params: &[f64]| -> f64 {
        let spec = build(ln_params);
        match fit(ts, ys, &spec, noise_var) {
            Ok(gp) => {
                let lml = gp.log_marginal_likelihood();
                if lml.is_finite() {
                    -lml
                } else {
                    f64::INFINITY
                }
            }
            Err(_) => f64::INFINITY,
        }
    };

    // Three fixed starts: the template, and the template scaled by 0.1 and
    // 10 in parameter space (one natural-log unit-ish shifts).
    let shift = std::f64::consts::LN_10;
    let starts = [0.0, -shift, shift];

    let mut best_ln = start.clone();
    let mut best_f = f64::INFINITY;
    for s in starts {
        let mut x0 = start.clone();
        for &i in &free {
            x0[i] = (start[i] + s).clamp(lo[i], hi[i]);
        }
        let run_trace = trace.as_deref_mut().map(|t| {
            t.push(Vec::new());
            t.last_mut().unwrap()
        });
        let (x, f) = nelder_mead(&mut objective, &x0, &lo, &hi, &free, 120, run_trace);
        if f < best_f {
            best_f = f;
            best_ln = x;
        }
    }

    Ok(build(&best_ln))
}

/// Nelder-Mead over the `free` coordinates of `x0`, every candidate point
/// projected onto `[lo, hi]`. Returns the best full vector and its value.
fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    f: &mut F,
    x0: &[f64],
    lo: &[f64],
    hi: &[f64],
    free: &[usize],
    max_iter: usize,
    mut trace: Option<&mut Vec<f64>>,
) -> (Vec<f64>, f64) {
    let n = free.len();
    let project = |x: &mut Vec<f64>| {
        for &i in free {
            x[i] = x[i].clamp(lo[i], hi[i]);
        }
    };

    // Initial simplex: x0 plus a step along each free axis, stepping inward
    // when the boundary blocks the outward step.
    let step = 0.4;
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), f(x0)));
    for &i in free {
        let mut x = x0.to_vec();
        x[i] = if x0[i] + step <= hi[i] { x0[i] + step } else { x0[i] - step };
        project(&mut x);
        let fx = f(&x);
        simplex.push((x, fx));
    }

    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    for _ in 0..max_iter {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
        if let Some(t) = trace.as_deref_mut() {
            t.push(simplex[0].1);
        }
        let spread = simplex[n].1 - simplex[0].1;
        if spread.abs() < 1e-11 {
            break;
        }

        // Centroid of all but the worst vertex.
        let mut centroid = vec![0.0; x0.len()];
        for (x, _) in &simplex[..n] {
            for (c, v) in centroid.iter_mut().zip(x) {
                *c += v / n as f64;
            }
        }
        for i in 0..x0.len() {
            if !free.contains(&i) {
                centroid[i] = x0[i];
            }
        }

        let worst = simplex[n].clone();
        let mut reflected = centroid.clone();
        for &i in free {
            reflected[i] = centroid[i] + alpha * (centroid[i] - worst.0[i]);
        }
        project(&mut reflected);
        let f_r = f(&reflected);

        if f_r < simplex[0].1 {
            let mut expanded = centroid.clone();
            for &i in free {
                expanded[i] = centroid[i] + gamma * (reflected[i] - centroid[i]);
            }
            project(&mut expanded);
            let f_e = f(&expanded);
            simplex[n] = if f_e < f_r { (expanded, f_e) } else { (reflected, f_r) };
        } else if f_r < simplex[n - 1].1 {
            simplex[n] = (reflected, f_r);
        } else {
            let mut contracted = centroid.clone();
            for &i in free {
                contracted[i] = centroid[i] + rho * (worst.0[i] - centroid[i]);
            }
            project(&mut contracted);
            let f_c = f(&contracted);
            if f_c < worst.1 {
                simplex[n] = (contracted, f_c);
            } else {
                // Shrink toward the best vertex.
                let best = simplex[0].0.clone();
                for vertex in simplex.iter_mut().skip(1) {
                    for &i in free {
                        vertex.0[i] = best[i] + sigma * (vertex.0[i] - best[i]);
                    }
                    project(&mut vertex.0);
                    vertex.1 = f(&vertex.0);
                }
            }
        }
    }

    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
    if let Some(t) = trace {
        t.push(simplex[0].1);
    }
    simplex[0].clone()
}
