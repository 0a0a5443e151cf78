//! CSV tables. Floats use the shortest representation that round-trips.

use std::fs::File;
use std::path::Path;

use anyhow::{Context, Result};
use matchange_core::eval::MetricReport;
use matchange_core::montecarlo::{CampaignSummary, Estimate, TrialParams, TrialRecord};

pub const TRIALS_CSV: &str = "trials.csv";
pub const META_CSV: &str = "trial_meta.csv";
pub const FAILURES_CSV: &str = "failures.csv";
pub const SUMMARY_CSV: &str = "summary.csv";
pub const SWEEP_CSV: &str = "sweep.csv";

pub const PARAM_COLUMNS: [&str; 22] = [
    "trial_index",
    "seed",
    "snr_db",
    "nu",
    "sigma_xy",
    "sigma_phi",
    "veg_fraction",
    "gamma_bg",
    "gamma_chg",
    "looks",
    "bg_decorr",
    "scenario",
    "contrast",
    "change_shape",
    "change_cx",
    "change_cy",
    "change_ax",
    "change_ay",
    "change_eps_re",
    "change_eps_im",
    "change_sigma_delta",
    "change_lc_delta",
];

const ESTIMATE_SUFFIXES: [&str; 4] = ["mean", "se", "lo", "hi"];
const METRICS: [&str; 3] = ["roc_auc", "ap", "f1"];

fn num(v: f64) -> String {
    format!("{v}")
}

fn create(path: &Path) -> Result<csv::Writer<File>> {
    csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))
}

pub fn trials_header(detectors: &[String]) -> Vec<String> {
    let mut h: Vec<String> = PARAM_COLUMNS.iter().map(|s| s.to_string()).collect();
    for d in detectors {
        for m in METRICS {
            h.push(format!("{d}_{m}"));
        }
    }
    h
}

pub fn param_fields(p: &TrialParams) -> Vec<String> {
    let c = &p.change;
    vec![
        p.index.to_string(),
        p.seed.to_string(),
        num(p.snr_db),
        num(p.nu),
        num(p.sigma_xy),
        num(p.sigma_phi),
        num(p.veg_fraction),
        num(p.gamma_bg),
        num(p.gamma_chg),
        p.looks.to_string(),
        num(p.bg_decorr),
        p.scenario.name().to_string(),
        num(p.contrast),
        c.shape.name().to_string(),
        num(c.center.0),
        num(c.center.1),
        num(c.extent.0),
        num(c.extent.1),
        num(c.eps_delta.re),
        num(c.eps_delta.im),
        num(c.sigma_delta),
        num(c.lc_delta),
    ]
}

/// Append-only per-trial tables of one campaign.
pub struct TrialSink {
    trials: csv::Writer<File>,
    meta: csv::Writer<File>,
    failures: csv::Writer<File>,
    detectors: Vec<String>,
}

impl TrialSink {
    pub fn create(dir: &Path, detectors: &[String]) -> Result<Self> {
        let mut trials = create(&dir.join(TRIALS_CSV))?;
        trials.write_record(trials_header(detectors))?;
        let mut meta = create(&dir.join(META_CSV))?;
        meta.write_record(["trial_index", "visibility", "wall_time_s"])?;
        let mut failures = create(&dir.join(FAILURES_CSV))?;
        failures.write_record(["trial_index", "seed", "error"])?;
        for w in [&mut trials, &mut meta, &mut failures] {
            w.flush()?;
        }
        Ok(Self {
            trials,
            meta,
            failures,
            detectors: detectors.to_vec(),
        })
    }

    pub fn record(&mut self, r: &TrialRecord) -> Result<()> {
        let mut row = param_fields(&r.params);
        for d in &self.detectors {
            let m: &MetricReport = r
                .reports
                .iter()
                .find(|m| &m.detector == d)
                .with_context(|| format!("trial {} has no {d} report", r.params.index))?;
            row.extend([num(m.roc_auc), num(m.ap), num(m.f1)]);
        }
        self.trials.write_record(&row)?;
        self.trials.flush()?;
        self.meta
            .write_record([r.params.index.to_string(), num(r.visibility), format!("{:.6}", r.wall_time)])?;
        self.meta.flush()?;
        Ok(())
    }

    pub fn failure(&mut self, p: &TrialParams, error: &str) -> Result<()> {
        self.failures
            .write_record([p.index.to_string(), p.seed.to_string(), error.to_string()])?;
        self.failures.flush()?;
        Ok(())
    }
}

fn estimate_fields(e: &Estimate) -> [String; 4] {
    [num(e.mean), num(e.std_err), num(e.lo), num(e.hi)]
}

fn summary_header(prefix: &[&str]) -> Vec<String> {
    let mut h: Vec<String> = prefix.iter().map(|s| s.to_string()).collect();
    h.extend(["detector", "trials", "failed"].map(String::from));
    for m in METRICS {
        for s in ESTIMATE_SUFFIXES {
            h.push(format!("{m}_{s}"));
        }
    }
    h
}

fn summary_rows(s: &CampaignSummary) -> Vec<Vec<String>> {
    s.detectors
        .iter()
        .map(|d| {
            let mut row = vec![d.detector.clone(), s.trials.to_string(), s.failed.to_string()];
            for e in [&d.roc_auc, &d.ap, &d.f1] {
                row.extend(estimate_fields(e));
            }
            row
        })
        .collect()
}

/// One row per detector.
pub fn write_summary(path: &Path, s: &CampaignSummary) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(summary_header(&[]))?;
    for row in summary_rows(s) {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

/// One row per (level, detector).
pub fn write_sweep(path: &Path, factor: &str, levels: &[(f64, CampaignSummary)]) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(summary_header(&["factor", "level"]))?;
    for (level, s) in levels {
        for row in summary_rows(s) {
            let mut full = vec![factor.to_string(), num(*level)];
            full.extend(row);
            w.write_record(full)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_metrics(path: &Path, reports: &[MetricReport]) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(["detector", "roc_auc", "ap", "f1", "pfa_target", "threshold"])?;
    for m in reports {
        w.write_record([
            m.detector.clone(),
            num(m.roc_auc),
            num(m.ap),
            num(m.f1),
            num(m.pfa_target),
            num(m.threshold),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_curve(path: &Path, columns: [&str; 2], points: &[(f64, f64)]) -> Result<()> {
    let mut w = create(path)?;
    w.write_record(columns)?;
    for (a, b) in points {
        w.write_record([num(*a), num(*b)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_curve(path: &Path) -> Result<Vec<(f64, f64)>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    r.records()
        .map(|rec| {
            let rec = rec?;
            let a: f64 = rec.get(0).context("short row")?.parse()?;
            let b: f64 = rec.get(1).context("short row")?.parse()?;
            Ok((a, b))
        })
        .collect()
}
