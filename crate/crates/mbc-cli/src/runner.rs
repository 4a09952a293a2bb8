//! Subcommand implementations: trace loading, the sweep engine, and
//! artifact assembly.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;

use mbc::experiment::{run_cell, CellOutput, CellReport};
use mbc::geo::{self, EnuTrajectory, ParsedTrace, TraceFormat};
use mbc::synth;

use crate::config::ExperimentConfig;
use crate::output;
use crate::AppError;

const DEFAULT_SCENARIO: &str = "mixed-demo";

/// Top-level report: tool provenance, the resolved config, one entry per
/// (threshold, per) cell.
#[derive(Debug, Serialize)]
pub struct Report<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub seed: u64,
    pub config: &'a ExperimentConfig,
    pub cells: Vec<CellReport>,
}

fn map_mbc_err(e: mbc::Error) -> AppError {
    AppError::from(e)
}

/// Load the experiment trajectory: a trace file when given, a bundled
/// scenario otherwise. File format is detected from the CSV header.
pub fn load_trajectory(cfg: &ExperimentConfig) -> Result<EnuTrajectory, AppError> {
    if let Some(path) = &cfg.trace {
        let bytes = fs::read(path)
            .with_context(|| format!("reading trace {}", path.display()))
            .map_err(AppError::Data)?;
        let traj = parse_any_trace(&bytes)?;
        geo::resample(&traj, cfg.schedule.rate_hz).map_err(map_mbc_err)
    } else {
        let name = cfg.scenario.as_deref().unwrap_or(DEFAULT_SCENARIO);
        let (spec, natural) = scenario_by_name(name, cfg)?;
        let duration = cfg.duration_s.unwrap_or(natural);
        synth::generate(&spec, duration, cfg.seed).map_err(map_mbc_err)
    }
}

fn scenario_by_name(
    name: &str,
    cfg: &ExperimentConfig,
) -> Result<(synth::ScenarioSpec, f64), AppError> {
    let (mut spec, natural) = synth::by_name(name)
        .ok_or_else(|| AppError::Config(anyhow::anyhow!("unknown scenario `{name}`")))?;
    spec.rate_hz = cfg.schedule.rate_hz;
    Ok((spec, natural))
}

fn parse_any_trace(bytes: &[u8]) -> Result<EnuTrajectory, AppError> {
    let header = bytes
        .split(|b| *b == b'\n')
        .next()
        .map(|line| String::from_utf8_lossy(line).trim().to_string())
        .unwrap_or_default();
    let format = match header.as_str() {
        "t,x,y" => TraceFormat::Enu,
        "t,lat,lon,alt" => TraceFormat::Geodetic,
        other => {
            return Err(AppError::Data(anyhow::anyhow!(
                "unrecognized trace header `{other}` (expected `t,x,y` or `t,lat,lon,alt`)"
            )))
        }
    };
    let parsed = geo::parse_trace(bytes, format).map_err(map_mbc_err)?;
    match parsed {
        ParsedTrace::Enu(traj) => Ok(traj),
        ParsedTrace::Geodetic(fixes) => geo::to_enu_trajectory(&fixes).map_err(map_mbc_err),
    }
}

/// Run every (threshold, per) cell sequentially in deterministic order.
pub fn run_cells(cfg: &ExperimentConfig, traj: &EnuTrajectory) -> Result<Vec<CellOutput>, AppError> {
    let mut cells = Vec::new();
    for (ti, threshold) in cfg.thresholds_m.iter().enumerate() {
        let template = cfg.schedule.to_schedule(*threshold);
        for (pi, per) in cfg.pers.iter().enumerate() {
            let cell = run_cell(traj, &template, *threshold, *per, ti, pi, cfg.seed)
                .map_err(map_mbc_err)?;
            cells.push(cell);
        }
    }
    Ok(cells)
}

/// `run`: full artifacts, including per-instant series.
pub fn cmd_run(cfg: &ExperimentConfig) -> Result<(), AppError> {
    execute(cfg, true)
}

/// `sweep`: summary tables only.
pub fn cmd_sweep(cfg: &ExperimentConfig) -> Result<(), AppError> {
    execute(cfg, false)
}

fn execute(cfg: &ExperimentConfig, write_series: bool) -> Result<(), AppError> {
    cfg.validate()?;
    let traj = load_trajectory(cfg)?;
    let cells = run_cells(cfg, &traj)?;

    let report = Report {
        tool: "mbc",
        version: env!("CARGO_PKG_VERSION"),
        seed: cfg.seed,
        config: cfg,
        cells: cells.iter().map(|c| c.report.clone()).collect(),
    };

    let mut artifacts: Vec<(PathBuf, Vec<u8>)> = Vec::new();
    let out = &cfg.out_dir;
    let mut report_json = serde_json::to_vec_pretty(&report)
        .context("serializing report")
        .map_err(AppError::Data)?;
    report_json.push(b'\n');
    artifacts.push((out.join("report.json"), report_json));
    artifacts.push((out.join("rates.csv"), output::rates_csv(&cells).map_err(AppError::Data)?));
    artifacts.push((
        out.join("pte_percentiles.csv"),
        output::percentiles_csv(&cells).map_err(AppError::Data)?,
    ));
    if write_series {
        artifacts.push((out.join("pte.csv"), output::pte_csv(&cells).map_err(AppError::Data)?));
        artifacts.push((
            out.join("messages.csv"),
            output::messages_csv(&cells).map_err(AppError::Data)?,
        ));
        artifacts.push((
            out.join("decisions.csv"),
            output::decisions_csv(&cells).map_err(AppError::Data)?,
        ));
    }

    write_atomically(out, artifacts)?;
    Ok(())
}

/// Write all artifacts or none: failures roll back files created by this
/// invocation.
fn write_atomically(out_dir: &Path, artifacts: Vec<(PathBuf, Vec<u8>)>) -> Result<(), AppError> {
    fs::create_dir_all(out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))
        .map_err(AppError::Config)?;
    let mut written: Vec<PathBuf> = Vec::new();
    for (path, bytes) in artifacts {
        if let Err(e) = fs::write(&path, bytes) {
            for p in &written {
                let _ = fs::remove_file(p);
            }
            return Err(AppError::Data(
                anyhow::Error::from(e).context(format!("writing {}", path.display())),
            ));
        }
        written.push(path);
    }
    Ok(())
}

/// `synth`: emit a scenario as an ENU CSV trace.
pub fn cmd_synth(
    name: &str,
    out: &Path,
    seed: u64,
    duration_s: Option<f64>,
    rate_hz: f64,
    noise_std_m: Option<f64>,
) -> Result<(), AppError> {
    let (mut spec, natural) = synth::by_name(name)
        .ok_or_else(|| AppError::Config(anyhow::anyhow!("unknown scenario `{name}`")))?;
    spec.rate_hz = rate_hz;
    if let Some(noise) = noise_std_m {
        spec.noise_std_m = noise;
    }
    let duration = duration_s.unwrap_or(natural);
    let traj = synth::generate(&spec, duration, seed).map_err(map_mbc_err)?;
    let mut bytes = Vec::new();
    geo::write_enu_csv(&mut bytes, &traj).map_err(map_mbc_err)?;
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .with_context(|| format!("creating {}", parent.display()))
                .map_err(AppError::Config)?;
        }
    }
    fs::write(out, bytes)
        .with_context(|| format!("writing {}", out.display()))
        .map_err(AppError::Data)?;
    Ok(())
}
