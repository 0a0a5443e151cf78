//! The `simulate`, `sweep` and `render` verbs.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use matchange_core::montecarlo::CampaignSummary;

use crate::artifacts::{export_trial, render, MissingArtifact};
use crate::config::{ConfigError, ExperimentConfig};
use crate::output::{write_sweep, SWEEP_CSV};
use crate::runner::{campaign_params, default_workers, run_campaign, sweep_params, CampaignResult, MIN_SUCCESS_RATE};

pub const EXIT_OK: i32 = 0;
pub const EXIT_TRIALS_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

pub const TOP_TRIAL_DIR: &str = "top_trial";
pub const RESOLVED_CONFIG: &str = "config.json";

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub seed: Option<u64>,
    pub detectors: Option<Vec<String>>,
}

pub fn load_config(path: &Path, o: &Overrides) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = o.seed {
        cfg.seed = s;
    }
    if let Some(d) = &o.detectors {
        cfg.detectors = Some(d.clone());
    }
    if let Some(w) = o.workers {
        cfg.workers = Some(w);
    }
    if let Some(out) = &o.out {
        cfg.out = Some(out.clone());
    }
    cfg.validate()?;
    if cfg.out.is_none() {
        return Err(ConfigError::Invalid {
            field: "out".into(),
            message: "no output directory in the config or on the command line".into(),
        });
    }
    Ok(cfg)
}

fn workers(cfg: &ExperimentConfig) -> usize {
    cfg.workers.unwrap_or_else(default_workers)
}

fn write_resolved(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    fs::write(out.join(RESOLVED_CONFIG), serde_json::to_string_pretty(cfg)? + "\n")?;
    Ok(())
}

/// Sampled campaign into `out`, with the top-visibility trial exported to
/// `out/top_trial`.
pub fn simulate(cfg: &ExperimentConfig, out: &Path) -> Result<CampaignResult> {
    let ranges = cfg.param_ranges()?;
    let mut tc = cfg.trial_config()?;
    tc.keep_artifacts = true;
    write_resolved(cfg, out)?;
    let params = campaign_params(&ranges, &tc, cfg.seed, cfg.trials);
    let res = run_campaign(&params, &tc, cfg.seed, workers(cfg), out)?;
    if let Some((rec, Some(art))) = &res.top {
        export_trial(&out.join(TOP_TRIAL_DIR), rec, art)?;
    }
    Ok(res)
}

pub fn level_dir(factor: &str, level: f64) -> String {
    format!("{factor}_{level}")
}

/// One-factor sweep: a campaign per level under `out/<factor>_<level>`,
/// summaries of all levels in `out/sweep.csv`.
pub fn sweep(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<(f64, CampaignResult)>> {
    let spec = cfg.sweep.as_ref().context("config has no sweep section")?;
    let factor = cfg.sweep_factor()?.context("config has no sweep section")?;
    let ranges = cfg.param_ranges()?;
    let tc = cfg.trial_config()?;
    let n = spec.trials.unwrap_or(cfg.trials);
    write_resolved(cfg, out)?;
    let mut results = Vec::new();
    for &level in &spec.levels {
        log::info!("sweep {} = {level}", factor.name());
        let params = sweep_params(&ranges, &tc, cfg.seed, n, factor, level)?;
        let dir = out.join(level_dir(factor.name(), level));
        results.push((level, run_campaign(&params, &tc, cfg.seed, workers(cfg), &dir)?));
    }
    let rows: Vec<(f64, CampaignSummary)> = results
        .iter()
        .filter_map(|(l, r)| r.summary.clone().map(|s| (*l, s)))
        .collect();
    write_sweep(&out.join(SWEEP_CSV), factor.name(), &rows)?;
    Ok(results)
}

fn exit_for(results: &[&CampaignResult]) -> i32 {
    let ok: usize = results.iter().map(|r| r.records.len()).sum();
    let failed: usize = results.iter().map(|r| r.failures.len()).sum();
    if failed > 0 {
        log::warn!("{failed} of {} trials failed", ok + failed);
    }
    let total = ok + failed;
    if total > 0 && ok as f64 >= MIN_SUCCESS_RATE * total as f64 {
        EXIT_OK
    } else {
        EXIT_TRIALS_FAILED
    }
}

fn report(e: &anyhow::Error) -> i32 {
    log::error!("{e:#}");
    eprintln!("error: {e:#}");
    if e.downcast_ref::<ConfigError>().is_some() || e.downcast_ref::<MissingArtifact>().is_some() {
        EXIT_USAGE
    } else {
        EXIT_TRIALS_FAILED
    }
}

fn config_or_exit(path: &Path, o: &Overrides) -> Result<(ExperimentConfig, PathBuf), i32> {
    match load_config(path, o) {
        Ok(cfg) => {
            let out = cfg.out.clone().expect("validated");
            Ok((cfg, out))
        }
        Err(e) => Err(report(&e.into())),
    }
}

pub fn cmd_simulate(config: &Path, o: &Overrides) -> i32 {
    let (cfg, out) = match config_or_exit(config, o) {
        Ok(v) => v,
        Err(code) => return code,
    };
    match simulate(&cfg, &out) {
        Ok(res) => exit_for(&[&res]),
        Err(e) => report(&e),
    }
}

pub fn cmd_sweep(config: &Path, o: &Overrides) -> i32 {
    let (cfg, out) = match config_or_exit(config, o) {
        Ok(v) => v,
        Err(code) => return code,
    };
    if cfg.sweep.is_none() {
        return report(
            &ConfigError::Invalid {
                field: "sweep".into(),
                message: "missing sweep section".into(),
            }
            .into(),
        );
    }
    match sweep(&cfg, &out) {
        Ok(res) => exit_for(&res.iter().map(|(_, r)| r).collect::<Vec<_>>()),
        Err(e) => report(&e),
    }
}

pub fn cmd_render(trial_dir: &Path, out: Option<&Path>) -> i32 {
    let out = out.map_or_else(|| trial_dir.join("render"), Path::to_path_buf);
    match render(trial_dir, &out) {
        Ok(()) => EXIT_OK,
        Err(e) => report(&e),
    }
}
