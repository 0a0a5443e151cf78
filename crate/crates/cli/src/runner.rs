//! Parallel trial execution with an ordered, append-only sink.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::mpsc;
use std::time::Instant;

use anyhow::{Context, Result};
use matchange_core::montecarlo::{
    aggregate, run_trial, sample_trial_params, sweep_trial_params, CampaignSummary, ParamRanges, SweepFactor,
    TrialArtifacts, TrialConfig, TrialOutcome, TrialParams, TrialRecord,
};
use rayon::prelude::*;

use crate::output::{write_summary, TrialSink, SUMMARY_CSV};

/// Share of trials that must succeed for a campaign to count as passed.
pub const MIN_SUCCESS_RATE: f64 = 0.9;

pub fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, usize::from)
}

/// Parameters of trials `0..n` of a sampled campaign.
pub fn campaign_params(ranges: &ParamRanges, cfg: &TrialConfig, seed: u64, n: usize) -> Vec<TrialParams> {
    (0..n as u64)
        .map(|i| sample_trial_params(ranges, cfg.width, cfg.height, seed, i))
        .collect()
}

/// Parameters of trials `0..n` of one sweep level.
pub fn sweep_params(
    ranges: &ParamRanges,
    cfg: &TrialConfig,
    seed: u64,
    n: usize,
    factor: SweepFactor,
    level: f64,
) -> Result<Vec<TrialParams>> {
    (0..n as u64)
        .map(|i| Ok(sweep_trial_params(ranges, cfg.width, cfg.height, seed, i, factor, level)?))
        .collect()
}

/// Runs every trial on a pool of `workers` threads and hands results to
/// `sink` in trial order, as soon as each prefix is complete.
pub fn run_ordered<F>(params: &[TrialParams], cfg: &TrialConfig, workers: usize, mut sink: F) -> Result<()>
where
    F: FnMut(&TrialParams, matchange_core::Result<TrialOutcome>) -> Result<()>,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .context("building worker pool")?;
    let (tx, rx) = mpsc::channel();
    std::thread::scope(|s| {
        s.spawn(move || {
            pool.install(|| {
                params.par_iter().enumerate().for_each_with(tx, |tx, (i, p)| {
                    let start = Instant::now();
                    let out = run_trial(p, cfg).map(|mut o| {
                        o.record.wall_time = start.elapsed().as_secs_f64();
                        o
                    });
                    let _ = tx.send((i, out));
                });
            });
        });
        let mut pending = BTreeMap::new();
        let mut next = 0;
        for (i, out) in rx {
            pending.insert(i, out);
            while let Some(out) = pending.remove(&next) {
                sink(&params[next], out)?;
                next += 1;
            }
        }
        Ok(())
    })
}

#[derive(Debug)]
pub struct CampaignResult {
    pub records: Vec<TrialRecord>,
    pub failures: Vec<(TrialParams, String)>,
    /// Highest-visibility trial, first on ties, with its rasters when kept.
    pub top: Option<(TrialRecord, Option<TrialArtifacts>)>,
    pub summary: Option<CampaignSummary>,
}

impl CampaignResult {
    pub fn success_rate(&self) -> f64 {
        let n = self.records.len() + self.failures.len();
        if n == 0 {
            0.0
        } else {
            self.records.len() as f64 / n as f64
        }
    }

    pub fn passed(&self) -> bool {
        self.success_rate() >= MIN_SUCCESS_RATE
    }
}

/// Runs a campaign, streaming per-trial rows into `dir` and writing the
/// summary at the end.
pub fn run_campaign(params: &[TrialParams], cfg: &TrialConfig, seed: u64, workers: usize, dir: &Path) -> Result<CampaignResult> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let names: Vec<String> = cfg.reported().iter().map(|d| d.name().to_string()).collect();
    let mut sink = TrialSink::create(dir, &names)?;
    let mut res = CampaignResult {
        records: Vec::new(),
        failures: Vec::new(),
        top: None,
        summary: None,
    };
    let total = params.len();
    run_ordered(params, cfg, workers, |p, out| {
        match out {
            Ok(o) => {
                log::info!(
                    "trial {}/{} done in {:.1}s, visibility {:.3}",
                    p.index + 1,
                    total,
                    o.record.wall_time,
                    o.record.visibility
                );
                sink.record(&o.record)?;
                let better = match &res.top {
                    Some((r, _)) => o.record.visibility > r.visibility,
                    None => true,
                };
                if better {
                    res.top = Some((o.record.clone(), o.artifacts));
                }
                res.records.push(o.record);
            }
            Err(e) => {
                log::warn!("trial {} (seed {}) failed: {e}", p.index, p.seed);
                sink.failure(p, &e.to_string())?;
                res.failures.push((p.clone(), e.to_string()));
            }
        }
        Ok(())
    })?;
    if !res.records.is_empty() {
        let mut s = aggregate(&res.records, seed)?;
        s.failed = res.failures.len();
        write_summary(&dir.join(SUMMARY_CSV), &s)?;
        res.summary = Some(s);
    }
    Ok(res)
}
