//! Rasters of a single trial and the figure data derived from them.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use image::GrayImage;
use matchange_core::detectors::ScoreMap;
use matchange_core::eval::{labelled_scores, pr_curve, roc_curve};
use matchange_core::montecarlo::{TrialArtifacts, TrialRecord};
use matchange_core::Grid;

use crate::output::{write_curve, write_metrics};
use crate::raster::RasterFile;

pub const FEATURES: &str = "features.mcr";
pub const SCORES: &str = "scores.mcr";
pub const VALID: &str = "valid.mcr";
pub const TRUTH: &str = "truth.mcr";
pub const METRICS: &str = "metrics.csv";
pub const TRIAL_INFO: &str = "trial.txt";
pub const AE_MANIFEST: &str = "ae_manifest.txt";
pub const AE_WEIGHTS: &str = "ae_weights.bin";
pub const SCALES: &str = "scales.txt";
pub const CONTOUR: &str = "truth_contour.png";

pub fn roc_file(detector: &str) -> String {
    format!("roc_{detector}.csv")
}

pub fn pr_file(detector: &str) -> String {
    format!("pr_{detector}.csv")
}

/// Raised when a trial directory lacks a required file.
#[derive(Debug, thiserror::Error)]
#[error("missing trial artifact {0}")]
pub struct MissingArtifact(pub PathBuf);

/// Writes every raster of a trial plus its ROC/PR points into `dir`.
pub fn export_trial(dir: &Path, record: &TrialRecord, art: &TrialArtifacts) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let (w, h) = art.truth.dims();
    let mut features = RasterFile::new(w, h);
    for (plane, g) in art.stack.planes() {
        features.push(plane.name(), g)?;
    }
    features.save(&dir.join(FEATURES))?;
    let mut scores = RasterFile::new(w, h);
    let mut valid = RasterFile::new(w, h);
    for m in &art.maps {
        scores.push(&m.detector, &m.scores)?;
        valid.push_mask(&m.detector, &m.valid)?;
    }
    scores.save(&dir.join(SCORES))?;
    valid.save(&dir.join(VALID))?;
    let mut truth = RasterFile::new(w, h);
    truth.push_mask("truth", &art.truth)?;
    truth.push("true_gamma", &art.true_gamma)?;
    truth.save(&dir.join(TRUTH))?;
    write_metrics(&dir.join(METRICS), &record.reports)?;
    fs::write(
        dir.join(TRIAL_INFO),
        format!(
            "trial_index {}\nseed {}\nvisibility {}\n",
            record.params.index, record.params.seed, record.visibility
        ),
    )?;
    if let Some(model) = &art.ae_model {
        fs::write(dir.join(AE_MANIFEST), model.manifest())?;
        fs::write(dir.join(AE_WEIGHTS), model.weight_bytes())?;
    }
    write_curves(dir, &art.maps, &art.truth)
}

fn write_curves(dir: &Path, maps: &[ScoreMap], truth: &Grid<bool>) -> Result<()> {
    for m in maps {
        let (s, t) = labelled_scores(m, truth)?;
        write_curve(&dir.join(roc_file(&m.detector)), ["pfa", "pd"], &roc_curve(&s, &t)?)?;
        write_curve(&dir.join(pr_file(&m.detector)), ["recall", "precision"], &pr_curve(&s, &t)?)?;
    }
    Ok(())
}

fn load(dir: &Path, name: &str) -> Result<RasterFile> {
    let path = dir.join(name);
    if !path.is_file() {
        return Err(MissingArtifact(path).into());
    }
    RasterFile::load(&path).with_context(|| format!("reading {}", path.display()))
}

/// Min–max scaling to 8 bits over the finite samples selected by `mask`;
/// everything else maps to 0. Returns the image and the `(min, max)` used.
pub fn to_grey(g: &Grid<f64>, mask: Option<&Grid<bool>>) -> (GrayImage, f64, f64) {
    let keep = |i: usize| mask.is_none_or(|m| m.as_slice()[i]) && g.as_slice()[i].is_finite();
    let (lo, hi) = g
        .iter()
        .enumerate()
        .filter(|(i, _)| keep(*i))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, &v)| (lo.min(v), hi.max(v)));
    let span = hi - lo;
    let px: Vec<u8> = g
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            if !keep(i) || !(span > 0.0) {
                0
            } else {
                (255.0 * (v - lo) / span).round().clamp(0.0, 255.0) as u8
            }
        })
        .collect();
    let img = GrayImage::from_raw(g.width() as u32, g.height() as u32, px).expect("buffer matches dimensions");
    (img, lo, hi)
}

/// Truth pixels with at least one 4-neighbour outside the truth region.
pub fn contour(truth: &Grid<bool>) -> Grid<bool> {
    let (w, h) = truth.dims();
    Grid::from_fn(w, h, |x, y| {
        truth[(x, y)]
            && (x == 0
                || y == 0
                || x + 1 == w
                || y + 1 == h
                || !truth[(x - 1, y)]
                || !truth[(x + 1, y)]
                || !truth[(x, y - 1)]
                || !truth[(x, y + 1)])
    })
}

/// Figure data for a trial directory written by [`export_trial`]: ROC/PR
/// points per detector, 8-bit maps of every plane with a scale sidecar, and
/// the truth contour mask.
pub fn render(trial_dir: &Path, out: &Path) -> Result<()> {
    let features = load(trial_dir, FEATURES)?;
    let scores = load(trial_dir, SCORES)?;
    let valid = load(trial_dir, VALID)?;
    let truth_file = load(trial_dir, TRUTH)?;
    let truth = truth_file
        .mask("truth")
        .ok_or_else(|| MissingArtifact(trial_dir.join(TRUTH)))?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut maps = Vec::new();
    for name in &scores.names {
        let s = scores.plane(name).context("score plane")?;
        let v = valid
            .mask(name)
            .ok_or_else(|| MissingArtifact(trial_dir.join(VALID)))?;
        maps.push(ScoreMap {
            detector: name.clone(),
            scores: s,
            valid: v,
        });
    }
    write_curves(out, &maps, &truth)?;
    let mut scales = String::from("# image min max\n");
    let mut save = |file: String, g: &Grid<f64>, mask: Option<&Grid<bool>>| -> Result<()> {
        let (img, lo, hi) = to_grey(g, mask);
        img.save(out.join(&file)).with_context(|| format!("writing {file}"))?;
        scales.push_str(&format!("{file} {lo} {hi}\n"));
        Ok(())
    };
    for name in &features.names {
        save(format!("feature_{name}.png"), &features.plane(name).context("feature plane")?, None)?;
    }
    for m in &maps {
        save(format!("score_{}.png", m.detector), &m.scores, Some(&m.valid))?;
    }
    if let Some(g) = truth_file.plane("true_gamma") {
        save("true_gamma.png".into(), &g, None)?;
    }
    fs::write(out.join(SCALES), scales)?;
    let c = contour(&truth);
    let (img, _, _) = to_grey(&c.map(|&b| if b { 1.0 } else { 0.0 }), None);
    img.save(out.join(CONTOUR))?;
    Ok(())
}
