//! Acceptance suite: every criterion of the evaluation plan as one test,
//! printing a PASS line with its measured statistic. Run with
//! `cargo test -p mbc-cli --test acceptance -- --nocapture`.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};

use mbc::channel::{apply_channel, ChannelConfig};
use mbc::experiment::{cell_seed, Arm, DEFAULT_THRESHOLDS_M};
use mbc::geo::{EnuSample, EnuTrajectory, GeodeticFix};
use mbc::gp::{fit, kernel_eval, KernelSpec};
use mbc::scheduler::{
    match_baseline_rate, run_baseline_transmitter, run_mbc_transmitter, MessageKind,
    ScheduleConfig,
};
use mbc::synth::{self, generate};
use mbc::tracker::{percentile, run_receiver};

/// The master seed every acceptance experiment derives from.
const MASTER_SEED: u64 = 42;

fn enu_traj<F: Fn(f64) -> (f64, f64)>(f: F, n: usize, rate: f64) -> EnuTrajectory {
    let samples = (0..n)
        .map(|k| {
            let t = k as f64 / rate;
            let (x, y) = f(t);
            EnuSample { t, x, y }
        })
        .collect();
    EnuTrajectory::new(GeodeticFix { t: 0.0, lat: 0.0, lon: 0.0, alt: 0.0 }, samples, rate).unwrap()
}

fn scenario(name: &str) -> EnuTrajectory {
    let (spec, duration) = synth::by_name(name).unwrap();
    generate(&spec, duration, MASTER_SEED).unwrap()
}

// --- criterion 1: GP oracle equivalence ------------------------------------

/// Dense-inverse / eigendecomposition oracle, independent of the library's
/// Cholesky path. Shares only the documented model: times rebased to the
/// window start, targets centered on their mean.
struct DenseOracle {
    spec: KernelSpec,
    s: Vec<f64>,
    mean: f64,
    k_inv: DMatrix<f64>,
    centered: DVector<f64>,
    log_det: f64,
}

impl DenseOracle {
    fn build(ts: &[f64], ys: &[f64], spec: &KernelSpec, noise_var: f64) -> DenseOracle {
        let t0 = ts[0];
        let s: Vec<f64> = ts.iter().map(|t| t - t0).collect();
        let m = ts.len();
        let mean = ys.iter().sum::<f64>() / m as f64;
        let mut k = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in 0..m {
                k[(i, j)] = kernel_eval(spec, s[i], s[j]);
            }
        }
        for i in 0..m {
            k[(i, i)] += noise_var;
        }
        let k_inv = k.clone().try_inverse().expect("oracle inverse");
        let log_det = k.symmetric_eigen().eigenvalues.iter().map(|l| l.ln()).sum();
        let centered = DVector::from_iterator(m, ys.iter().map(|y| y - mean));
        DenseOracle { spec: spec.clone(), s, mean, k_inv, centered, log_det }
    }

    fn k_star(&self, t_rebased: f64) -> DVector<f64> {
        DVector::from_iterator(self.s.len(), self.s.iter().map(|t| kernel_eval(&self.spec, t_rebased, *t)))
    }

    fn mean_at(&self, t_rebased: f64) -> f64 {
        self.mean + self.k_star(t_rebased).dot(&(&self.k_inv * &self.centered))
    }

    fn var_at(&self, t_rebased: f64) -> f64 {
        let ks = self.k_star(t_rebased);
        kernel_eval(&self.spec, t_rebased, t_rebased) - ks.dot(&(&self.k_inv * &ks))
    }

    fn lml(&self) -> f64 {
        let m = self.s.len() as f64;
        let quad = self.centered.dot(&(&self.k_inv * &self.centered));
        -0.5 * quad - 0.5 * self.log_det - 0.5 * m * (2.0 * std::f64::consts::PI).ln()
    }
}

#[test]
fn criterion_gp_oracle_equivalence() {
    let start = Instant::now();
    let mut rng = rand::rngs::StdRng::seed_from_u64(MASTER_SEED);
    let mut max_diff = 0.0f64;
    // Targets are drawn at the kernel's own amplitude and the Gram stays
    // decently conditioned; outside that regime the explicit-inverse oracle
    // itself loses the digits an absolute 1e-8 comparison needs, and the
    // check would measure oracle roundoff instead of implementation error.
    for _ in 0..200 {
        let m = rng.random_range(1..=10);
        let mut ts = Vec::with_capacity(m);
        let mut t = rng.random_range(-1.0..1.0);
        for _ in 0..m {
            ts.push(t);
            t += rng.random_range(0.08..0.15);
        }
        let variance: f64 = rng.random_range(0.25..4.0);
        let amp = variance.sqrt();
        let ys: Vec<f64> = (0..m).map(|_| rng.random_range(-1.5 * amp..1.5 * amp)).collect();
        let spec = match rng.random_range(0..3) {
            0 => KernelSpec::Rbf { variance, lengthscale: rng.random_range(0.15..2.5) },
            1 => KernelSpec::Linear { variance, offset_t: rng.random_range(-0.5..0.5) },
            _ => KernelSpec::sum(
                KernelSpec::Linear { variance, offset_t: 0.45 },
                KernelSpec::Rbf {
                    variance: rng.random_range(0.25..4.0),
                    lengthscale: rng.random_range(0.15..2.5),
                },
            ),
        };
        let noise = rng.random_range(0.02..0.25);
        let gp = fit(&ts, &ys, &spec, noise).unwrap();
        assert_eq!(gp.jitter(), 0.0, "stabilization jitter would desync the oracle");
        let oracle = DenseOracle::build(&ts, &ys, &spec, noise);

        let lml_diff = (gp.log_marginal_likelihood() - oracle.lml()).abs();
        max_diff = max_diff.max(lml_diff);
        for _ in 0..4 {
            let q = rng.random_range(ts[0] - 0.5..ts[m - 1] + 1.0);
            let mean_diff = (gp.predict_mean(q) - oracle.mean_at(q - ts[0])).abs();
            let var_diff = (gp.predict_var(q) - oracle.var_at(q - ts[0]).max(0.0)).abs();
            max_diff = max_diff.max(mean_diff).max(var_diff);
        }
    }
    let elapsed = start.elapsed();
    assert!(max_diff <= 1e-8, "max abs diff {max_diff:e} exceeds 1e-8");
    assert!(elapsed.as_secs_f64() < 5.0, "took {elapsed:?}");
    println!("acceptance gp_oracle_equivalence: PASS (max diff {max_diff:.2e}, {elapsed:.2?})");
}

// --- criterion 2: scheduler zero dynamics -----------------------------------

#[test]
fn criterion_scheduler_zero_dynamics() {
    let traj = scenario("cruise");
    for threshold in DEFAULT_THRESHOLDS_M {
        let cfg = ScheduleConfig::new(threshold);
        let mbc = run_mbc_transmitter(&traj, &cfg).unwrap();
        let base = run_baseline_transmitter(&traj, &cfg).unwrap();
        assert_eq!(mbc.messages.len(), 1, "MBC sent {} at threshold {threshold}", mbc.messages.len());
        assert_eq!(base.messages.len(), 1, "baseline sent {} at threshold {threshold}", base.messages.len());
    }
    println!("acceptance scheduler_zero_dynamics: PASS (1 message per arm at all 4 thresholds)");
}

// --- criterion 3: baseline closed form ---------------------------------------

#[test]
fn criterion_baseline_closed_form() {
    // x = a t^2 / 2 with a = 1 m/s^2 on the 10 Hz grid.
    let accel = 1.0;
    let threshold = 0.5;
    let traj = enu_traj(|t| (0.5 * accel * t * t, 0.0), 200, 10.0);
    let log = run_baseline_transmitter(&traj, &ScheduleConfig::new(threshold)).unwrap();
    let times: Vec<f64> = log.messages.iter().map(|m| m.tx_t).collect();
    assert!(times.len() >= 10, "too few transmissions: {}", times.len());

    // Closed form: sqrt(2 th / a) = 1.0 s, already a grid multiple. The
    // grid-quantized crossing of the simulated coasting error must agree at
    // every transmit instant.
    let ideal_gap = (2.0 * threshold / accel).sqrt();
    let quantized = (ideal_gap * 10.0).ceil() / 10.0;
    assert_eq!(quantized, 1.0);
    for pair in times.windows(2) {
        let gap = pair[1] - pair[0];
        assert!((gap - quantized).abs() < 1e-9, "gap {gap} != {quantized}");
    }

    // Brute force: replay the coasting error from each report and find the
    // first on-grid violation.
    for (i, pair) in times.windows(2).enumerate() {
        let tx = pair[0];
        let k = (tx * 10.0).round() as usize;
        let (pos, vel) = match log.messages[i].kind {
            MessageKind::RawBsm { pos, vel } => (pos, vel),
            _ => unreachable!("baseline log carries raw reports only"),
        };
        let mut first_violation = None;
        for step in 1..60 {
            let t = traj.samples[k + step].t;
            let coast_x = pos.x + vel.x * (t - tx);
            let err = (coast_x - traj.samples[k + step].x).abs();
            if err >= threshold {
                first_violation = Some(t);
                break;
            }
        }
        assert_eq!(first_violation, Some(pair[1]), "brute force disagrees at tx {tx}");
    }
    println!("acceptance baseline_closed_form: PASS (all gaps exactly {quantized} s)");
}

// --- criterion 4: rate-vs-threshold trends -----------------------------------

#[test]
fn criterion_rate_vs_threshold() {
    let start = Instant::now();
    let traj = scenario("mixed-demo");
    let mut mbc_totals = Vec::new();
    let mut base_totals = Vec::new();
    for threshold in DEFAULT_THRESHOLDS_M {
        let cfg = ScheduleConfig::new(threshold);
        let mbc = run_mbc_transmitter(&traj, &cfg).unwrap();
        let base = run_baseline_transmitter(&traj, &cfg).unwrap();
        mbc_totals.push(mbc.messages.len());
        base_totals.push(base.messages.len());
    }
    for totals in [&mbc_totals, &base_totals] {
        for pair in totals.windows(2) {
            assert!(
                pair[1] <= pair[0],
                "total rate increased across thresholds: {totals:?}"
            );
        }
    }
    for (i, threshold) in DEFAULT_THRESHOLDS_M.iter().enumerate() {
        assert!(
            mbc_totals[i] <= base_totals[i],
            "MBC total {} exceeds baseline {} at threshold {threshold}",
            mbc_totals[i],
            base_totals[i]
        );
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "took {elapsed:?}");
    println!(
        "acceptance rate_vs_threshold: PASS (mbc {mbc_totals:?} <= baseline {base_totals:?}, {elapsed:.2?})"
    );
}

// --- criterion 5: tracking accuracy under packet loss --------------------------

#[test]
fn criterion_lossy_tracking() {
    let start = Instant::now();
    let traj = scenario("mixed-demo");
    // The strictest default threshold (the J2945/1 minimum): the cell with
    // enough messages for a stable percentile comparison at this trace
    // length, evaluated at the heavy-loss operating point.
    let threshold = DEFAULT_THRESHOLDS_M[0];
    let per = 0.4;
    let cfg = ScheduleConfig::new(threshold);
    let mbc_log = run_mbc_transmitter(&traj, &cfg).unwrap();
    let target = mbc_log.full_update_count();
    let (matched_threshold, matched_log) = match_baseline_rate(&traj, &cfg, target).unwrap();

    let mut wins = 0;
    let mut margins = Vec::new();
    for master in 0..10u64 {
        let mbc_seed = cell_seed(master, 0, 1, Arm::Mbc);
        let base_seed = cell_seed(master, 0, 1, Arm::BaselineMatched);
        let md = apply_channel(&mbc_log, &ChannelConfig { per, seed: mbc_seed }).unwrap();
        let bd = apply_channel(&matched_log, &ChannelConfig { per, seed: base_seed }).unwrap();
        let mp90 = percentile(&run_receiver(&md, &traj).values(), 0.9).unwrap();
        let bp90 = percentile(&run_receiver(&bd, &traj).values(), 0.9).unwrap();
        if mp90 < bp90 {
            wins += 1;
        }
        margins.push(format!("{mp90:.2}/{bp90:.2}"));
    }
    let elapsed = start.elapsed();
    assert!(
        wins >= 9,
        "MBC won only {wins}/10 seeds (P90 mbc/baseline: {margins:?})"
    );
    assert!(elapsed.as_secs_f64() < 60.0, "took {elapsed:?}");
    println!(
        "acceptance lossy_tracking: PASS ({wins}/10 seeds, matched baseline threshold {matched_threshold:.3} m, {elapsed:.2?})"
    );
}

// --- criterion 6: threshold guarantee ----------------------------------------

#[test]
fn criterion_threshold_guarantee() {
    let mut checked = 0usize;
    for name in ["cruise", "lane-change", "hard-brake", "mixed-demo"] {
        let traj = scenario(name);
        for threshold in DEFAULT_THRESHOLDS_M {
            let cfg = ScheduleConfig::new(threshold);
            let log = run_mbc_transmitter(&traj, &cfg).unwrap();
            let delivered = apply_channel(&log, &ChannelConfig { per: 0.0, seed: 0 }).unwrap();
            let series = run_receiver(&delivered, &traj);
            let updates: Vec<f64> = log
                .messages
                .iter()
                .filter(|m| matches!(m.kind, MessageKind::FullUpdate { .. }))
                .map(|m| m.tx_t)
                .collect();
            for s in &series.samples {
                if updates.iter().any(|u| (u - s.t).abs() < 1e-9) {
                    continue;
                }
                assert!(
                    s.pte < threshold,
                    "{name}: pte {} >= threshold {threshold} at t={}",
                    s.pte,
                    s.t
                );
                checked += 1;
            }
        }
    }
    println!("acceptance threshold_guarantee: PASS ({checked} lossless samples strictly under threshold)");
}

// --- criterion 7: channel statistics ------------------------------------------

#[test]
fn criterion_channel_statistics() {
    use mbc::models::Vec2;
    use mbc::scheduler::{ModelMessage, TxLog};

    let mut log = TxLog::default();
    for i in 0..10_000u64 {
        log.messages.push(ModelMessage {
            seq: i,
            tx_t: i as f64 * 0.1,
            kind: MessageKind::RawBsm { pos: Vec2::new(0.0, 0.0), vel: Vec2::new(0.0, 0.0) },
        });
    }
    let mut counts = Vec::new();
    for seed in 0..5u64 {
        let cfg = ChannelConfig { per: 0.4, seed };
        let a = apply_channel(&log, &cfg).unwrap();
        let b = apply_channel(&log, &cfg).unwrap();
        assert_eq!(a.mask, b.mask, "identical seed must give identical mask");
        let count = a.messages.len();
        assert!(
            (5853..=6147).contains(&count),
            "seed {seed}: delivered {count} outside +-3 sigma of Binomial(10^4, 0.6)"
        );
        counts.push(count);
    }
    println!("acceptance channel_statistics: PASS (delivered counts {counts:?})");
}

// --- criterion 8: sweep determinism -------------------------------------------

#[test]
fn criterion_sweep_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let run_once = || {
        let status = std::process::Command::new(env!("CARGO_BIN_EXE_mbc"))
            .args(["sweep", "--scenario", "mixed-demo", "--seed", "42"])
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(out.join("report.json")).unwrap()
    };
    let first = run_once();
    let second = run_once();
    assert_eq!(first, second, "report.json differs between identical sweeps");
    println!("acceptance sweep_determinism: PASS ({} byte report identical across runs)", first.len());
}
