//! Experiment configuration: a versioned JSON document.

use std::fs;
use std::path::{Path, PathBuf};

use matchange_core::detectors::{DetectorKind, LocalRxGeometry, ScatterKind};
use matchange_core::features::Plane;
use matchange_core::montecarlo::{ParamRanges, Scenario, Span, SweepFactor, TrialConfig};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("field `{field}`: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: &str, message: impl ToString) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        message: message.to_string(),
    }
}

/// `[lo, hi]` overrides of the sampling ranges.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeOverrides {
    pub snr_db: Option<[f64; 2]>,
    pub nu: Option<[f64; 2]>,
    pub sigma_xy: Option<[f64; 2]>,
    pub sigma_phi: Option<[f64; 2]>,
    pub veg_fraction: Option<[f64; 2]>,
    pub gamma_bg: Option<[f64; 2]>,
    pub gamma_chg: Option<[f64; 2]>,
    pub looks: Option<[usize; 2]>,
    pub bg_decorr: Option<[f64; 2]>,
    pub contrast: Option<[f64; 2]>,
    pub change_area: Option<[f64; 2]>,
    pub scenarios: Option<Vec<String>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureOverrides {
    pub window: Option<usize>,
    pub coh_window: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RxOverrides {
    pub shrinkage: Option<f64>,
    pub max_iter: Option<usize>,
    pub standardize: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LrxOverrides {
    pub outer: Option<usize>,
    pub guard: Option<usize>,
    pub shrinkage: Option<f64>,
    pub standardize: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AeOverrides {
    pub patch: Option<usize>,
    pub epochs: Option<usize>,
    pub hidden_width: Option<usize>,
    pub latent_width: Option<usize>,
    pub learning_rate: Option<f64>,
    pub momentum: Option<f64>,
    pub batch_size: Option<usize>,
    pub max_tiles: Option<usize>,
    pub planes: Option<Vec<String>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalOverrides {
    pub pfa: Option<f64>,
    pub morph_radius: Option<usize>,
    pub calib_fraction: Option<f64>,
}

/// One-factor sweep: every other field at its range midpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub factor: String,
    pub levels: Vec<f64>,
    /// Trials per level; defaults to the campaign trial count.
    pub trials: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub seed: u64,
    pub trials: usize,
    #[serde(default = "default_side")]
    pub width: usize,
    #[serde(default = "default_side")]
    pub height: usize,
    pub detectors: Option<Vec<String>>,
    #[serde(default)]
    pub ranges: RangeOverrides,
    #[serde(default)]
    pub features: FeatureOverrides,
    #[serde(default)]
    pub rx: RxOverrides,
    #[serde(default)]
    pub rxrob: RxOverrides,
    #[serde(default)]
    pub lrx: LrxOverrides,
    #[serde(default)]
    pub ae: AeOverrides,
    #[serde(default)]
    pub eval: EvalOverrides,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub sweep: Option<SweepSpec>,
}

fn default_side() -> usize {
    128
}

/// Every detector that can be run, in canonical order.
pub fn default_detectors() -> Vec<DetectorKind> {
    DetectorKind::ALL
        .into_iter()
        .filter(|&d| d != DetectorKind::CcdMl)
        .collect()
}

/// Parses a comma-separated detector list.
pub fn parse_detectors(list: &[String]) -> Result<Vec<DetectorKind>, ConfigError> {
    if list.is_empty() {
        return Err(invalid("detectors", "empty detector list"));
    }
    list.iter()
        .map(|s| {
            let s = s.trim();
            DetectorKind::from_name(s).ok_or_else(|| invalid("detectors", format!("unknown detector `{s}`")))
        })
        .collect()
}

fn span(field: &str, v: Option<[f64; 2]>, base: Span) -> Result<Span, ConfigError> {
    match v {
        None => Ok(base),
        Some([lo, hi]) if lo.is_finite() && hi.is_finite() && lo <= hi => Ok(Span::new(lo, hi)),
        Some([lo, hi]) => Err(invalid(field, format!("[{lo}, {hi}] is not a non-empty interval"))),
    }
}

impl ExperimentConfig {
    pub fn minimal(seed: u64, trials: usize, width: usize, height: usize) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            seed,
            trials,
            width,
            height,
            detectors: None,
            ranges: RangeOverrides::default(),
            features: FeatureOverrides::default(),
            rx: RxOverrides::default(),
            rxrob: RxOverrides::default(),
            lrx: LrxOverrides::default(),
            ae: AeOverrides::default(),
            eval: EvalOverrides::default(),
            out: None,
            workers: None,
            sweep: None,
        }
    }

    pub fn from_str(text: &str, path: &Path) -> Result<Self, ConfigError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_str(&text, path)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(invalid(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        if self.trials == 0 {
            return Err(invalid("trials", "must be at least 1"));
        }
        if self.workers == Some(0) {
            return Err(invalid("workers", "must be at least 1"));
        }
        self.param_ranges()?;
        self.trial_config()?;
        if let Some(s) = &self.sweep {
            self.sweep_factor()?;
            if s.levels.is_empty() {
                return Err(invalid("sweep.levels", "no levels"));
            }
            if s.trials == Some(0) {
                return Err(invalid("sweep.trials", "must be at least 1"));
            }
        }
        Ok(())
    }

    pub fn detector_kinds(&self) -> Result<Vec<DetectorKind>, ConfigError> {
        match &self.detectors {
            None => Ok(default_detectors()),
            Some(list) => parse_detectors(list),
        }
    }

    pub fn param_ranges(&self) -> Result<ParamRanges, ConfigError> {
        let d = ParamRanges::default();
        let o = &self.ranges;
        let looks = match o.looks {
            None => d.looks,
            Some([lo, hi]) if lo >= 1 && lo <= hi => (lo, hi),
            Some([lo, hi]) => return Err(invalid("ranges.looks", format!("[{lo}, {hi}] is not a range of positive integers"))),
        };
        let scenarios = match &o.scenarios {
            None => d.scenarios.clone(),
            Some(v) if v.is_empty() => return Err(invalid("ranges.scenarios", "empty list")),
            Some(v) => v
                .iter()
                .map(|s| Scenario::from_name(s).ok_or_else(|| invalid("ranges.scenarios", format!("unknown scenario `{s}`"))))
                .collect::<Result<_, _>>()?,
        };
        let r = ParamRanges {
            snr_db: span("ranges.snr_db", o.snr_db, d.snr_db)?,
            nu: span("ranges.nu", o.nu, d.nu)?,
            sigma_xy: span("ranges.sigma_xy", o.sigma_xy, d.sigma_xy)?,
            sigma_phi: span("ranges.sigma_phi", o.sigma_phi, d.sigma_phi)?,
            veg_fraction: span("ranges.veg_fraction", o.veg_fraction, d.veg_fraction)?,
            gamma_bg: span("ranges.gamma_bg", o.gamma_bg, d.gamma_bg)?,
            gamma_chg: span("ranges.gamma_chg", o.gamma_chg, d.gamma_chg)?,
            looks,
            bg_decorr: span("ranges.bg_decorr", o.bg_decorr, d.bg_decorr)?,
            contrast: span("ranges.contrast", o.contrast, d.contrast)?,
            change_area: span("ranges.change_area", o.change_area, d.change_area)?,
            scenarios,
        };
        r.validate().map_err(|e| invalid("ranges", e))?;
        Ok(r)
    }

    pub fn trial_config(&self) -> Result<TrialConfig, ConfigError> {
        let mut c = TrialConfig::new(self.width, self.height, self.detector_kinds()?);
        let f = &self.features;
        c.features.window = f.window.unwrap_or(c.features.window);
        c.features.coh_window = f.coh_window.unwrap_or(c.features.coh_window);
        for (field, o, rx) in [("rx", &self.rx, &mut c.rx), ("rxrob", &self.rxrob, &mut c.rxrob)] {
            if let Some(s) = o.shrinkage {
                if !(0.0..=1.0).contains(&s) {
                    return Err(invalid(&format!("{field}.shrinkage"), "outside [0, 1]"));
                }
                rx.fit.shrinkage = s;
            }
            rx.fit.max_iter = o.max_iter.unwrap_or(rx.fit.max_iter);
            rx.standardize = o.standardize.unwrap_or(rx.standardize);
        }
        if c.rxrob.fit.kind == ScatterKind::Tyler && c.rxrob.fit.max_iter == 0 {
            return Err(invalid("rxrob.max_iter", "must be at least 1"));
        }
        let l = &self.lrx;
        c.lrx.geometry = LocalRxGeometry {
            outer: l.outer.unwrap_or(c.lrx.geometry.outer),
            guard: l.guard.unwrap_or(c.lrx.geometry.guard),
        };
        c.lrx.geometry.validate().map_err(|e| invalid("lrx", e))?;
        if let Some(s) = l.shrinkage {
            if !(0.0..=1.0).contains(&s) {
                return Err(invalid("lrx.shrinkage", "outside [0, 1]"));
            }
            c.lrx.fit.shrinkage = s;
        }
        c.lrx.standardize = l.standardize.unwrap_or(c.lrx.standardize);
        let a = &self.ae;
        c.ae.patch = a.patch.unwrap_or(c.ae.patch);
        c.ae.epochs = a.epochs.unwrap_or(c.ae.epochs);
        c.ae.hidden_width = a.hidden_width.unwrap_or(c.ae.hidden_width);
        c.ae.latent_width = a.latent_width.unwrap_or(c.ae.latent_width);
        c.ae.learning_rate = a.learning_rate.unwrap_or(c.ae.learning_rate);
        c.ae.momentum = a.momentum.unwrap_or(c.ae.momentum);
        c.ae.batch_size = a.batch_size.unwrap_or(c.ae.batch_size);
        c.ae.max_tiles = a.max_tiles.unwrap_or(c.ae.max_tiles);
        if let Some(planes) = &a.planes {
            let p = planes
                .iter()
                .map(|s| Plane::from_name(s).ok_or_else(|| invalid("ae.planes", format!("unknown plane `{s}`"))))
                .collect::<Result<Vec<_>, _>>()?;
            if p.is_empty() {
                return Err(invalid("ae.planes", "empty list"));
            }
            c.ae_planes = Some(p);
        }
        c.ae.validate().map_err(|e| invalid("ae", e))?;
        let e = &self.eval;
        if let Some(pfa) = e.pfa {
            if !(pfa > 0.0 && pfa < 1.0) {
                return Err(invalid("eval.pfa", "outside (0, 1)"));
            }
            c.eval.pfa = pfa;
        }
        c.eval.morph_radius = e.morph_radius.unwrap_or(c.eval.morph_radius);
        c.calib_fraction = e.calib_fraction.unwrap_or(c.calib_fraction);
        for (field, w) in [("features.window", c.features.window), ("features.coh_window", c.features.coh_window)] {
            if w < 3 || w % 2 == 0 {
                return Err(invalid(field, format!("{w} is not an odd size of at least 3")));
            }
        }
        c.validate().map_err(|e| invalid("detectors", e))?;
        Ok(c)
    }

    pub fn sweep_factor(&self) -> Result<Option<SweepFactor>, ConfigError> {
        self.sweep
            .as_ref()
            .map(|s| SweepFactor::from_name(&s.factor).ok_or_else(|| invalid("sweep.factor", format!("unknown factor `{}`", s.factor))))
            .transpose()
    }
}
