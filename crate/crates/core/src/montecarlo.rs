//! Seeded Monte Carlo trials: parameter sampling, the end-to-end trial
//! pipeline, one-factor sweeps and bootstrap aggregation.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;

use crate::ae::{ae_score_map, train_ae, AeConfig, AeModel};
use crate::detectors::{ccd_map, ccd_ml_map, global_rx_map, local_rx_map, DetectorKind, LocalRxConfig, RxConfig, ScoreMap};
use crate::em::{backscatter_map, RadarConfig};
use crate::error::{invalid, Error, Result};
use crate::eval::{evaluate, fuse, learn_weights, znorm, EvalConfig, FusionWeights, MetricReport};
use crate::features::{build_feature_stack, FeatureConfig, FeatureStack, Plane};
use crate::raster::Grid;
use crate::rng::{derive_seed, stream, substream, Stage};
use crate::scene::{build_scene, true_coherence_field, ChangeShape, ChangeSpec, MaterialClass, SceneSpec};
use crate::slc::{form_slc_pair, SlcParams};

/// Closed interval `[lo, hi]` sampled uniformly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Span {
    pub lo: f64,
    pub hi: f64,
}

impl Span {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }

    fn sample(&self, rng: &mut impl Rng) -> f64 {
        if self.hi > self.lo {
            rng.random_range(self.lo..=self.hi)
        } else {
            self.lo
        }
    }

    fn check(&self, name: &str, domain: (f64, f64)) -> Result<()> {
        if !(self.lo <= self.hi) || self.lo < domain.0 || self.hi > domain.1 {
            return Err(invalid!(
                "{name} range [{}, {}] is not a subinterval of [{}, {}]",
                self.lo,
                self.hi,
                domain.0,
                domain.1
            ));
        }
        Ok(())
    }
}

/// Material transition planted in the change region.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// Dry soil wetting up.
    Moisture,
    /// Asphalt resurfaced with gravel.
    Resurfacing,
}

impl Scenario {
    pub const ALL: [Scenario; 2] = [Scenario::Moisture, Scenario::Resurfacing];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Moisture => "moisture",
            Scenario::Resurfacing => "resurfacing",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.name() == s)
    }

    /// `(before, after)` materials.
    pub fn materials(self) -> (MaterialClass, MaterialClass) {
        match self {
            Scenario::Moisture => (MaterialClass::dry_soil(), MaterialClass::wet_soil()),
            Scenario::Resurfacing => (MaterialClass::asphalt(), MaterialClass::gravel()),
        }
    }
}

/// Sampling ranges of every trial parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamRanges {
    pub snr_db: Span,
    pub nu: Span,
    pub sigma_xy: Span,
    pub sigma_phi: Span,
    pub veg_fraction: Span,
    pub gamma_bg: Span,
    pub gamma_chg: Span,
    /// Inclusive integer range of looks.
    pub looks: (usize, usize),
    pub bg_decorr: Span,
    /// Fraction of the way from the before to the after material.
    pub contrast: Span,
    /// Change-region area as a fraction of the scene.
    pub change_area: Span,
    pub scenarios: Vec<Scenario>,
}

impl Default for ParamRanges {
    fn default() -> Self {
        Self {
            snr_db: Span::new(12.0, 28.0),
            nu: Span::new(0.3, 1.2),
            sigma_xy: Span::new(0.08, 0.25),
            sigma_phi: Span::new(0.10, 0.30),
            veg_fraction: Span::new(0.08, 0.18),
            gamma_bg: Span::new(0.90, 0.95),
            gamma_chg: Span::new(0.45, 0.65),
            looks: (2, 8),
            bg_decorr: Span::new(0.75, 0.90),
            contrast: Span::new(0.10, 0.25),
            change_area: Span::new(0.015, 0.035),
            scenarios: Scenario::ALL.to_vec(),
        }
    }
}

impl ParamRanges {
    pub fn validate(&self) -> Result<()> {
        self.snr_db.check("snr_db", (-30.0, 80.0))?;
        self.nu.check("nu", (1e-3, 1e6))?;
        self.sigma_xy.check("sigma_xy", (0.0, 5.0))?;
        self.sigma_phi.check("sigma_phi", (0.0, core::f64::consts::PI))?;
        self.veg_fraction.check("veg_fraction", (0.0, 0.9))?;
        self.gamma_bg.check("gamma_bg", (0.0, 1.0))?;
        self.gamma_chg.check("gamma_chg", (0.0, 1.0))?;
        self.bg_decorr.check("bg_decorr", (0.0, 1.0))?;
        self.contrast.check("contrast", (0.0, 1.0))?;
        self.change_area.check("change_area", (1e-4, 0.25))?;
        if self.looks.0 == 0 || self.looks.0 > self.looks.1 {
            return Err(invalid!("looks range {:?} must be a non-empty range of positive integers", self.looks));
        }
        if self.gamma_chg.hi > self.gamma_bg.lo {
            return Err(invalid!("gamma_chg range must lie below the gamma_bg range"));
        }
        if self.scenarios.is_empty() {
            return Err(invalid!("at least one change scenario is required"));
        }
        Ok(())
    }

    /// Scene-area bounds that admit every sampled change region.
    pub fn area_bounds(&self) -> (f64, f64) {
        (self.change_area.lo * 0.999, self.change_area.hi * 1.001)
    }
}

/// Every random input of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialParams {
    pub index: u64,
    pub seed: u64,
    pub snr_db: f64,
    pub nu: f64,
    pub sigma_xy: f64,
    pub sigma_phi: f64,
    pub veg_fraction: f64,
    pub gamma_bg: f64,
    pub gamma_chg: f64,
    pub looks: usize,
    pub bg_decorr: f64,
    pub scenario: Scenario,
    pub contrast: f64,
    pub change: ChangeSpec,
}

impl TrialParams {
    pub fn slc_params(&self) -> SlcParams {
        SlcParams {
            looks: self.looks,
            nu: self.nu,
            snr_db: self.snr_db,
            sigma_xy: self.sigma_xy,
            sigma_phi: self.sigma_phi,
        }
    }

    /// Removes the change signal: equal coherences and zero deltas.
    pub fn into_null(mut self) -> Self {
        self.gamma_chg = self.gamma_bg;
        self.contrast = 0.0;
        self.change.eps_delta = Complex64::new(0.0, 0.0);
        self.change.sigma_delta = 0.0;
        self.change.lc_delta = 0.0;
        self
    }
}

/// Draws a change region of the requested area fraction inside the scene.
fn sample_change(
    rng: &mut impl Rng,
    ranges: &ParamRanges,
    width: usize,
    height: usize,
    scenario: Scenario,
    contrast: f64,
) -> ChangeSpec {
    let shape = [ChangeShape::Square, ChangeShape::Rectangle, ChangeShape::Ellipse][rng.random_range(0..3)];
    let area = ranges.change_area.sample(rng) * (width * height) as f64;
    let aspect = if shape == ChangeShape::Square { 1.0 } else { rng.random_range(0.6..=1.6f64) };
    let ab = match shape {
        ChangeShape::Ellipse => area / core::f64::consts::PI,
        _ => area / 4.0,
    };
    let ax = (ab * aspect).sqrt();
    let ay = if shape == ChangeShape::Square { ax } else { ab / ax };
    let margin = 2.0;
    let span = |len: usize, a: f64| {
        let lo = a + margin;
        let hi = (len - 1) as f64 - a - margin;
        (lo, hi.max(lo))
    };
    let (xlo, xhi) = span(width, ax);
    let (ylo, yhi) = span(height, ay);
    let cx = Span::new(xlo, xhi).sample(rng);
    let cy = Span::new(ylo, yhi).sample(rng);
    let (before, after) = scenario.materials();
    ChangeSpec {
        shape,
        center: (cx, cy),
        extent: (ax, ay),
        eps_delta: (after.eps - before.eps) * contrast,
        sigma_delta: (after.rms_height - before.rms_height) * contrast,
        lc_delta: (after.corr_length - before.corr_length) * contrast,
    }
}

/// Independent uniform draws keyed by `(campaign_seed, trial_index)`.
pub fn sample_trial_params(
    ranges: &ParamRanges,
    width: usize,
    height: usize,
    campaign_seed: u64,
    trial_index: u64,
) -> TrialParams {
    let mut rng = substream(campaign_seed, Stage::TrialSeed, trial_index);
    let snr_db = ranges.snr_db.sample(&mut rng);
    let nu = ranges.nu.sample(&mut rng);
    let sigma_xy = ranges.sigma_xy.sample(&mut rng);
    let sigma_phi = ranges.sigma_phi.sample(&mut rng);
    let veg_fraction = ranges.veg_fraction.sample(&mut rng);
    let gamma_bg = ranges.gamma_bg.sample(&mut rng);
    let gamma_chg = ranges.gamma_chg.sample(&mut rng);
    let looks = rng.random_range(ranges.looks.0..=ranges.looks.1);
    let bg_decorr = ranges.bg_decorr.sample(&mut rng);
    let scenario = ranges.scenarios[rng.random_range(0..ranges.scenarios.len())];
    let contrast = ranges.contrast.sample(&mut rng);
    let change = sample_change(&mut rng, ranges, width, height, scenario, contrast);
    let seed = rng.random();
    TrialParams {
        index: trial_index,
        seed,
        snr_db,
        nu,
        sigma_xy,
        sigma_phi,
        veg_fraction,
        gamma_bg,
        gamma_chg,
        looks,
        bg_decorr,
        scenario,
        contrast,
        change,
    }
}

/// Factor varied by a one-factor sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepFactor {
    Looks,
    Nu,
    SnrDb,
    SigmaXy,
    SigmaPhi,
    GammaChg,
    VegFraction,
}

impl SweepFactor {
    pub const ALL: [SweepFactor; 7] = [
        SweepFactor::Looks,
        SweepFactor::Nu,
        SweepFactor::SnrDb,
        SweepFactor::SigmaXy,
        SweepFactor::SigmaPhi,
        SweepFactor::GammaChg,
        SweepFactor::VegFraction,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepFactor::Looks => "looks",
            SweepFactor::Nu => "nu",
            SweepFactor::SnrDb => "snr_db",
            SweepFactor::SigmaXy => "sigma_xy",
            SweepFactor::SigmaPhi => "sigma_phi",
            SweepFactor::GammaChg => "gamma_chg",
            SweepFactor::VegFraction => "veg_fraction",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.name() == s)
    }

    fn apply(self, p: &mut TrialParams, level: f64) -> Result<()> {
        if !level.is_finite() {
            return Err(invalid!("sweep level must be finite"));
        }
        match self {
            SweepFactor::Looks => {
                if level < 1.0 || level.fract() != 0.0 {
                    return Err(invalid!("looks level {level} is not a positive integer"));
                }
                p.looks = level as usize;
            }
            SweepFactor::Nu => p.nu = level,
            SweepFactor::SnrDb => p.snr_db = level,
            SweepFactor::SigmaXy => p.sigma_xy = level,
            SweepFactor::SigmaPhi => p.sigma_phi = level,
            SweepFactor::GammaChg => p.gamma_chg = level,
            SweepFactor::VegFraction => p.veg_fraction = level,
        }
        Ok(())
    }
}

/// Trial `trial_index` of a sweep: nuisance fields at their range
/// midpoints (looks rounded), change geometry and seed drawn as in
/// [`sample_trial_params`] so every level sees the same scenes, and the
/// swept factor set to `level`.
pub fn sweep_trial_params(
    ranges: &ParamRanges,
    width: usize,
    height: usize,
    campaign_seed: u64,
    trial_index: u64,
    factor: SweepFactor,
    level: f64,
) -> Result<TrialParams> {
    let mut p = sample_trial_params(ranges, width, height, campaign_seed, trial_index);
    p.snr_db = ranges.snr_db.mid();
    p.nu = ranges.nu.mid();
    p.sigma_xy = ranges.sigma_xy.mid();
    p.sigma_phi = ranges.sigma_phi.mid();
    p.veg_fraction = ranges.veg_fraction.mid();
    p.gamma_bg = ranges.gamma_bg.mid();
    p.gamma_chg = ranges.gamma_chg.mid();
    p.looks = (ranges.looks.0 + ranges.looks.1).div_ceil(2);
    p.bg_decorr = ranges.bg_decorr.mid();
    factor.apply(&mut p, level)?;
    Ok(p)
}

/// Planes the autoencoder sees by default: everything but coherence.
pub const DEFAULT_AE_PLANES: [Plane; 6] = [
    Plane::LogI1,
    Plane::LogI2,
    Plane::LogRatio,
    Plane::TextureMean,
    Plane::TextureVar,
    Plane::Incidence,
];

/// Fixed, non-sampled trial settings.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialConfig {
    pub width: usize,
    pub height: usize,
    /// Detectors to report, in any order; reports follow canonical order.
    pub detectors: Vec<DetectorKind>,
    pub radar: RadarConfig,
    pub features: FeatureConfig,
    pub rx: RxConfig,
    pub rxrob: RxConfig,
    pub lrx: LocalRxConfig,
    pub ae: AeConfig,
    /// Planes the AE sees; all when `None`.
    pub ae_planes: Option<Vec<Plane>>,
    pub eval: EvalConfig,
    pub calib_fraction: f64,
    pub theta_center: f64,
    pub theta_ripple: f64,
    pub bg_decorr_spread: f64,
    /// Keep rasters of the trial for export.
    pub keep_artifacts: bool,
}

impl TrialConfig {
    pub fn new(width: usize, height: usize, detectors: Vec<DetectorKind>) -> Self {
        Self {
            width,
            height,
            detectors,
            radar: RadarConfig::default(),
            features: FeatureConfig::default(),
            rx: RxConfig::sample(),
            rxrob: RxConfig::robust(),
            lrx: LocalRxConfig::default(),
            ae: AeConfig::default(),
            ae_planes: Some(DEFAULT_AE_PLANES.to_vec()),
            eval: EvalConfig::default(),
            calib_fraction: 0.1,
            theta_center: 35f64.to_radians(),
            theta_ripple: 3f64.to_radians(),
            bg_decorr_spread: 0.10,
            keep_artifacts: false,
        }
    }

    /// Reported detectors in canonical order, without duplicates.
    pub fn reported(&self) -> Vec<DetectorKind> {
        DetectorKind::ALL
            .into_iter()
            .filter(|d| self.detectors.contains(d))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.detectors.is_empty() {
            return Err(invalid!("no detectors selected"));
        }
        if self.detectors.contains(&DetectorKind::CcdMl) {
            return Err(Error::Unsupported("ccdml".into()));
        }
        if self.width < 32 || self.height < 32 {
            return Err(invalid!("scenes must be at least 32x32"));
        }
        if !(self.calib_fraction > 0.0 && self.calib_fraction <= 0.5) {
            return Err(invalid!("calibration fraction outside (0, 0.5]"));
        }
        self.ae.validate()?;
        self.lrx.geometry.validate()
    }
}

/// Metrics of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub params: TrialParams,
    /// One report per reported detector, canonical order.
    pub reports: Vec<MetricReport>,
    /// Standardised CCD separation of changed from unchanged pixels.
    pub visibility: f64,
    /// Wall-clock seconds, filled in by the caller that timed the trial.
    pub wall_time: f64,
}

impl TrialRecord {
    pub fn report(&self, detector: DetectorKind) -> Option<&MetricReport> {
        self.reports.iter().find(|r| r.detector == detector.name())
    }
}

/// Rasters of one trial kept for export.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialArtifacts {
    pub stack: FeatureStack,
    pub truth: Grid<bool>,
    pub true_gamma: Grid<f64>,
    /// Score maps of the reported detectors, canonical order.
    pub maps: Vec<ScoreMap>,
    pub ae_model: Option<AeModel>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub record: TrialRecord,
    pub artifacts: Option<TrialArtifacts>,
}

/// `(mean in-region score − mean background score) / background std`.
pub fn visibility(ccd: &ScoreMap, truth: &Grid<bool>) -> f64 {
    let (mut s_in, mut n_in) = (0.0, 0usize);
    let mut bg = Vec::new();
    for ((s, v), t) in ccd.scores.iter().zip(ccd.valid.iter()).zip(truth.iter()) {
        if !v {
            continue;
        }
        if *t {
            s_in += s;
            n_in += 1;
        } else {
            bg.push(*s);
        }
    }
    if n_in == 0 || bg.len() < 2 {
        return 0.0;
    }
    let mean_bg = bg.iter().sum::<f64>() / bg.len() as f64;
    let var = bg.iter().map(|v| (v - mean_bg) * (v - mean_bg)).sum::<f64>() / (bg.len() - 1) as f64;
    if var <= 0.0 {
        return 0.0;
    }
    (s_in / n_in as f64 - mean_bg) / var.sqrt()
}

/// Scene, SLC pair and feature stack of a trial.
pub fn simulate_stack(params: &TrialParams, cfg: &TrialConfig) -> Result<(FeatureStack, Grid<bool>, Grid<f64>)> {
    let (base, _) = params.scenario.materials();
    let mut spec = SceneSpec::new(cfg.width, cfg.height, base, params.change.clone());
    spec.veg_fraction = params.veg_fraction;
    spec.gamma_bg = params.gamma_bg;
    spec.gamma_chg = params.gamma_chg;
    spec.bg_decorr = params.bg_decorr;
    spec.bg_decorr_spread = cfg.bg_decorr_spread;
    spec.theta_center = cfg.theta_center;
    spec.theta_ripple = cfg.theta_ripple;
    let (lo, hi) = spec.area_bounds;
    let frac = params.change.analytic_area() / (cfg.width * cfg.height) as f64;
    spec.area_bounds = (lo.min(frac), hi.max(frac));
    let pair = build_scene(&spec, params.seed)?;
    let m1 = backscatter_map(&pair.epoch1, &cfg.radar)?;
    let m2 = backscatter_map(&pair.epoch2, &cfg.radar)?;
    let gamma = true_coherence_field(&pair);
    let slc = form_slc_pair(&m1, &m2, &gamma, &params.slc_params(), params.seed)?;
    let stack = build_feature_stack(&slc, pair.theta(), &cfg.features)?;
    Ok((stack, pair.epoch1.change_mask, gamma))
}

fn learned_or_equal(inputs: &[ScoreMap], truth: &Grid<bool>, fraction: f64, seed: u64) -> Result<FusionWeights> {
    match learn_weights(inputs, truth, fraction, seed) {
        Ok(w) => Ok(w),
        Err(Error::FitFailed(_)) => {
            let names: Vec<&str> = inputs.iter().map(|m| m.detector.as_str()).collect();
            FusionWeights::equal(&names)
        }
        Err(e) => Err(e),
    }
}

/// Runs scene → backscatter → SLC → features → detectors → fusion →
/// metrics for one parameter draw.
pub fn run_trial(params: &TrialParams, cfg: &TrialConfig) -> Result<TrialOutcome> {
    cfg.validate()?;
    let reported = cfg.reported();
    let mut needed: Vec<DetectorKind> = reported.clone();
    for d in &reported {
        needed.extend_from_slice(d.inputs());
    }
    needed.push(DetectorKind::Ccd);
    let needs = |k: DetectorKind| needed.contains(&k);

    let (stack, truth, true_gamma) = simulate_stack(params, cfg)?;
    let coherence = stack
        .plane(Plane::Coherence)
        .ok_or_else(|| invalid!("feature stack lacks coherence"))?;

    let mut maps: Vec<(DetectorKind, ScoreMap)> = Vec::new();
    let mut ae_model = None;
    if needs(DetectorKind::Rx) {
        maps.push((DetectorKind::Rx, global_rx_map(&stack, &cfg.rx, None)?));
    }
    if needs(DetectorKind::RxRob) {
        maps.push((DetectorKind::RxRob, global_rx_map(&stack, &cfg.rxrob, None)?));
    }
    if needs(DetectorKind::Lrx) {
        maps.push((DetectorKind::Lrx, local_rx_map(&stack, &cfg.lrx)?));
    }
    let ccd = ccd_map(coherence);
    let vis = visibility(&ccd, &truth);
    maps.push((DetectorKind::Ccd, ccd));
    if needs(DetectorKind::CcdMl) {
        maps.push((DetectorKind::CcdMl, ccd_ml_map(coherence)?));
    }
    if needs(DetectorKind::Ae) {
        let ae_stack = match &cfg.ae_planes {
            Some(p) => stack.select(p)?,
            None => stack.clone(),
        };
        let stable = truth.map(|t| !t);
        let ae_cfg = AeConfig {
            seed: derive_seed(params.seed, Stage::AeInit as u64),
            ..cfg.ae
        };
        let model = train_ae(&ae_stack, &stable, &ae_cfg)?;
        maps.push((DetectorKind::Ae, ae_score_map(&ae_stack, &model)?));
        ae_model = Some(model);
    }
    let base = |k: DetectorKind| -> Result<ScoreMap> {
        let m = maps
            .iter()
            .find(|(d, _)| *d == k)
            .map(|(_, m)| m)
            .ok_or_else(|| invalid!("missing input map {}", k.name()))?;
        Ok(znorm(m)?.map)
    };
    let calib_seed = derive_seed(params.seed, Stage::Calibration as u64);
    let mut fused = Vec::new();
    for kind in [DetectorKind::Fuse, DetectorKind::FuseW, DetectorKind::Fuse3W] {
        if !reported.contains(&kind) {
            continue;
        }
        let inputs = kind.inputs().iter().map(|&k| base(k)).collect::<Result<Vec<_>>>()?;
        let weights = if kind == DetectorKind::Fuse {
            let names: Vec<&str> = inputs.iter().map(|m| m.detector.as_str()).collect();
            FusionWeights::equal(&names)?
        } else {
            learned_or_equal(&inputs, &truth, cfg.calib_fraction, calib_seed)?
        };
        fused.push((kind, fuse(kind.name(), &inputs, &weights)?));
    }
    maps.extend(fused);

    let mut reports = Vec::with_capacity(reported.len());
    let mut kept = Vec::new();
    for kind in &reported {
        let (_, map) = maps
            .iter()
            .find(|(d, _)| d == kind)
            .ok_or_else(|| invalid!("detector {} produced no map", kind.name()))?;
        reports.push(evaluate(map, &truth, &cfg.eval)?);
        if cfg.keep_artifacts {
            kept.push(map.clone());
        }
    }
    let artifacts = cfg.keep_artifacts.then(|| TrialArtifacts {
        stack,
        truth: truth.clone(),
        true_gamma,
        maps: kept,
        ae_model,
    });
    Ok(TrialOutcome {
        record: TrialRecord {
            params: params.clone(),
            reports,
            visibility: vis,
            wall_time: 0.0,
        },
        artifacts,
    })
}

/// Mean with a percentile-bootstrap confidence interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub lo: f64,
    pub hi: f64,
    /// Sample standard error `s / √n` (0 for a single value).
    pub std_err: f64,
}

pub const BOOTSTRAP_RESAMPLES: usize = 10_000;
pub const CONFIDENCE: f64 = 0.95;

/// Percentile bootstrap of the mean with `resamples` seeded resamples.
pub fn bootstrap_mean(values: &[f64], resamples: usize, seed: u64) -> Result<Estimate> {
    let n = values.len();
    if n == 0 {
        return Err(Error::InsufficientData("no values to aggregate".into()));
    }
    if resamples == 0 {
        return Err(invalid!("at least one bootstrap resample is required"));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let std_err = if n > 1 {
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
        (var / n as f64).sqrt()
    } else {
        0.0
    };
    let mut rng = stream(seed, Stage::Bootstrap);
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| values[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let tail = (1.0 - CONFIDENCE) / 2.0;
    let lo_idx = ((tail * resamples as f64).floor() as usize).min(resamples - 1);
    let hi_idx = (((1.0 - tail) * resamples as f64).ceil() as usize).clamp(1, resamples) - 1;
    // resample means of identical values can differ from `mean` in the last bit
    let lo = means[lo_idx].min(mean);
    let hi = means[hi_idx].max(mean);
    Ok(Estimate { mean, lo, hi, std_err })
}

/// Per-detector aggregate of a campaign.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorSummary {
    pub detector: String,
    pub roc_auc: Estimate,
    pub ap: Estimate,
    pub f1: Estimate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignSummary {
    pub trials: usize,
    /// Trials that aborted and were left out.
    pub failed: usize,
    pub detectors: Vec<DetectorSummary>,
}

impl CampaignSummary {
    pub fn detector(&self, kind: DetectorKind) -> Option<&DetectorSummary> {
        self.detectors.iter().find(|d| d.detector == kind.name())
    }
}

/// Mean and bootstrap CI of every metric of every detector present in the
/// first record.
pub fn aggregate(records: &[TrialRecord], seed: u64) -> Result<CampaignSummary> {
    let first = records
        .first()
        .ok_or_else(|| Error::InsufficientData("no trial records".into()))?;
    let mut detectors = Vec::new();
    for (k, rep) in first.reports.iter().enumerate() {
        let mut cols = [vec![], vec![], vec![]];
        for r in records {
            let m = r
                .reports
                .iter()
                .find(|m| m.detector == rep.detector)
                .ok_or_else(|| invalid!("trial {} lacks detector {}", r.params.index, rep.detector))?;
            cols[0].push(m.roc_auc);
            cols[1].push(m.ap);
            cols[2].push(m.f1);
        }
        let s = |i: usize| derive_seed(seed, (k * 3 + i) as u64);
        detectors.push(DetectorSummary {
            detector: rep.detector.clone(),
            roc_auc: bootstrap_mean(&cols[0], BOOTSTRAP_RESAMPLES, s(0))?,
            ap: bootstrap_mean(&cols[1], BOOTSTRAP_RESAMPLES, s(1))?,
            f1: bootstrap_mean(&cols[2], BOOTSTRAP_RESAMPLES, s(2))?,
        });
    }
    Ok(CampaignSummary {
        trials: records.len(),
        failed: 0,
        detectors,
    })
}

/// Index of the record with the highest visibility (first on ties).
pub fn most_visible(records: &[TrialRecord]) -> Option<usize> {
    records
        .iter()
        .enumerate()
        .fold(None, |best: Option<(usize, f64)>, (i, r)| match best {
            Some((_, v)) if r.visibility <= v => best,
            _ => Some((i, r.visibility)),
        })
        .map(|(i, _)| i)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_in_range_and_reproducible() {
        let r = ParamRanges::default();
        for i in 0..200 {
            let p = sample_trial_params(&r, 128, 128, 42, i);
            assert!(r.snr_db.contains(p.snr_db) && r.nu.contains(p.nu));
            assert!(r.gamma_chg.contains(p.gamma_chg) && r.gamma_bg.contains(p.gamma_bg));
            assert!((2..=8).contains(&p.looks));
            let frac = p.change.analytic_area() / (128.0 * 128.0);
            assert!(r.change_area.contains(frac * (1.0 - 1e-9)) || r.change_area.contains(frac));
            p.change.validate(128, 128, r.area_bounds()).unwrap();
            assert_eq!(p, sample_trial_params(&r, 128, 128, 42, i));
        }
        assert_ne!(sample_trial_params(&r, 128, 128, 42, 0), sample_trial_params(&r, 128, 128, 42, 1));
    }

    #[test]
    fn sweep_fixes_nuisances() {
        let r = ParamRanges::default();
        let a = sweep_trial_params(&r, 64, 64, 1, 3, SweepFactor::Looks, 2.0).unwrap();
        let b = sweep_trial_params(&r, 64, 64, 1, 3, SweepFactor::Looks, 8.0).unwrap();
        assert_eq!(a.looks, 2);
        assert_eq!(b.looks, 8);
        assert_eq!(a.seed, b.seed);
        assert_eq!(a.change, b.change);
        assert_eq!(a.snr_db, 20.0);
        assert!(sweep_trial_params(&r, 64, 64, 1, 3, SweepFactor::Looks, 2.5).is_err());
    }

    #[test]
    fn identical_values_give_zero_width() {
        let e = bootstrap_mean(&[0.7; 20], 500, 1).unwrap();
        assert_eq!(e.hi - e.lo, 0.0);
        assert!((e.mean - 0.7).abs() < 1e-12);
    }

    #[test]
    fn two_point_bootstrap() {
        let e = bootstrap_mean(&[0.4, 0.6], 10_000, 3).unwrap();
        assert!((e.mean - 0.5).abs() < 1e-15);
        for v in [e.lo, e.hi] {
            assert!([0.4, 0.5, 0.6].iter().any(|a| (a - v).abs() < 1e-12), "{v}");
        }
        assert!(e.lo <= e.mean && e.mean <= e.hi);
    }

    #[test]
    fn empty_aggregate_is_an_error() {
        assert!(matches!(aggregate(&[], 0), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn ccdml_is_rejected_up_front() {
        let cfg = TrialConfig::new(64, 64, alloc::vec![DetectorKind::CcdMl]);
        assert!(matches!(cfg.validate(), Err(Error::Unsupported(_))));
    }
}
