//! Compact convolutional autoencoder trained on unchanged tiles; the
//! anomaly score is the per-pixel reconstruction error.

pub mod net;

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write as _;

#[allow(unused_imports)]
use num_traits::Float;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::detectors::ScoreMap;
use crate::error::{invalid, Error, Result};
use crate::features::FeatureStack;
use crate::raster::Grid;
use crate::rng::{stream, substream, Stage};

pub use net::{architecture, LayerSpec, LEAKY_SLOPE};

pub const MIN_TRAINING_TILES: usize = 100;
const MANIFEST_MAGIC: &str = "matchange-ae 1";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AeConfig {
    /// Tile side; a multiple of 4.
    pub patch: usize,
    pub epochs: usize,
    pub hidden_width: usize,
    pub latent_width: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    /// Cap on training tiles drawn from the stable area.
    pub max_tiles: usize,
    pub seed: u64,
}

impl Default for AeConfig {
    fn default() -> Self {
        Self {
            patch: 16,
            epochs: 50,
            hidden_width: 8,
            latent_width: 4,
            learning_rate: 1e-2,
            momentum: 0.9,
            batch_size: 32,
            max_tiles: 128,
            seed: 0,
        }
    }
}

impl AeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.patch < 4 || self.patch % 4 != 0 {
            return Err(invalid!("patch {} is not a positive multiple of 4", self.patch));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(invalid!("epochs and batch size must be at least 1"));
        }
        if self.hidden_width == 0 || self.latent_width == 0 {
            return Err(invalid!("layer widths must be at least 1"));
        }
        if !(self.learning_rate > 0.0) || !(0.0..1.0).contains(&self.momentum) {
            return Err(invalid!("learning rate must be positive and momentum in [0, 1)"));
        }
        if self.max_tiles < MIN_TRAINING_TILES {
            return Err(invalid!("max_tiles below {MIN_TRAINING_TILES}"));
        }
        Ok(())
    }
}

/// Trained weights plus the per-plane standardisation fitted on the
/// training tiles.
#[derive(Debug, Clone, PartialEq)]
pub struct AeModel {
    pub channels: usize,
    pub patch: usize,
    pub layers: Vec<LayerSpec>,
    pub weights: Vec<f64>,
    pub norm_mean: Vec<f64>,
    pub norm_std: Vec<f64>,
    /// Mean training loss of every epoch.
    pub loss_history: Vec<f64>,
}

/// Fresh parameters: uniform weights with variance `2 / fan_in`, zero biases.
pub fn init_params(layers: &[LayerSpec], seed: u64) -> Vec<f64> {
    let mut rng = stream(seed, Stage::AeInit);
    let mut out = Vec::with_capacity(layers.iter().map(LayerSpec::param_len).sum());
    for l in layers {
        let fan_in = (l.cin * net::KERNEL * net::KERNEL) as f64;
        let a = (6.0 / fan_in).sqrt();
        out.extend((0..l.weight_len()).map(|_| rng.random_range(-a..a)));
        out.extend(core::iter::repeat_n(0.0, l.cout));
    }
    out
}

/// Top-left corners of tiles lying entirely inside `stable`, on a grid of
/// pitch `patch / 4`.
pub fn stable_tile_origins(stable: &Grid<bool>, patch: usize) -> Vec<(usize, usize)> {
    let (w, h) = stable.dims();
    if w < patch || h < patch {
        return Vec::new();
    }
    // prefix counts of unstable pixels give an O(1) tile test
    let mut bad = vec![0u32; (w + 1) * (h + 1)];
    for y in 0..h {
        for x in 0..w {
            bad[(y + 1) * (w + 1) + x + 1] = u32::from(!stable[(x, y)]) + bad[y * (w + 1) + x + 1]
                + bad[(y + 1) * (w + 1) + x]
                - bad[y * (w + 1) + x];
        }
    }
    let rect = |x0: usize, y0: usize| {
        let (x1, y1) = (x0 + patch, y0 + patch);
        bad[y1 * (w + 1) + x1] + bad[y0 * (w + 1) + x0] - bad[y0 * (w + 1) + x1] - bad[y1 * (w + 1) + x0]
    };
    let pitch = (patch / 4).max(1);
    let mut out = Vec::new();
    for y0 in (0..=h - patch).step_by(pitch) {
        for x0 in (0..=w - patch).step_by(pitch) {
            if rect(x0, y0) == 0 {
                out.push((x0, y0));
            }
        }
    }
    out
}

fn extract_tile(stack: &FeatureStack, x0: usize, y0: usize, patch: usize, mean: &[f64], std: &[f64]) -> Vec<f64> {
    let mut t = Vec::with_capacity(stack.depth() * patch * patch);
    for (c, (_, g)) in stack.planes().enumerate() {
        for y in y0..y0 + patch {
            for x in x0..x0 + patch {
                t.push((g[(x, y)] - mean[c]) / std[c]);
            }
        }
    }
    t
}

fn tile_moments(stack: &FeatureStack, origins: &[(usize, usize)], patch: usize) -> (Vec<f64>, Vec<f64>) {
    let d = stack.depth();
    let mut mean = vec![0.0; d];
    let mut sq = vec![0.0; d];
    let n = (origins.len() * patch * patch) as f64;
    for (c, (_, g)) in stack.planes().enumerate() {
        for &(x0, y0) in origins {
            for y in y0..y0 + patch {
                for x in x0..x0 + patch {
                    mean[c] += g[(x, y)];
                }
            }
        }
        mean[c] /= n;
        for &(x0, y0) in origins {
            for y in y0..y0 + patch {
                for x in x0..x0 + patch {
                    let v = g[(x, y)] - mean[c];
                    sq[c] += v * v;
                }
            }
        }
    }
    let std = sq
        .iter()
        .map(|s| {
            let sd = (s / n).sqrt();
            if sd > 1e-12 && sd.is_finite() {
                sd
            } else {
                1.0
            }
        })
        .collect();
    (mean, std)
}

/// Mini-batch SGD with momentum on the mean squared reconstruction error,
/// using tiles that lie wholly inside `stable_mask`.
pub fn train_ae(stack: &FeatureStack, stable_mask: &Grid<bool>, cfg: &AeConfig) -> Result<AeModel> {
    cfg.validate()?;
    if stable_mask.dims() != stack.dims() {
        return Err(invalid!("stable mask size differs from feature stack"));
    }
    let mut origins = stable_tile_origins(stable_mask, cfg.patch);
    if origins.len() < MIN_TRAINING_TILES {
        return Err(Error::InsufficientData(format!(
            "{} fully stable {}-pixel tiles, need {MIN_TRAINING_TILES}",
            origins.len(),
            cfg.patch
        )));
    }
    if origins.len() > cfg.max_tiles {
        let mut rng = stream(cfg.seed, Stage::AeTiles);
        origins.shuffle(&mut rng);
        origins.truncate(cfg.max_tiles);
        origins.sort_unstable_by_key(|&(x, y)| (y, x));
    }
    let d = stack.depth();
    let (norm_mean, norm_std) = tile_moments(stack, &origins, cfg.patch);
    let tiles: Vec<Vec<f64>> = origins
        .iter()
        .map(|&(x, y)| extract_tile(stack, x, y, cfg.patch, &norm_mean, &norm_std))
        .collect();

    let layers = architecture(d, cfg.hidden_width, cfg.latent_width);
    let mut params = init_params(&layers, cfg.seed);
    let mut velocity = vec![0.0; params.len()];
    let mut grad = vec![0.0; params.len()];
    let mut order: Vec<usize> = (0..tiles.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut rng = substream(cfg.seed, Stage::AeBatches, epoch as u64);
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let tr = net::forward(&layers, &params, &tiles[i], cfg.patch);
                epoch_loss += net::backward(&layers, &params, &tr, &tiles[i], scale, &mut grad);
            }
            for ((p, v), g) in params.iter_mut().zip(&mut velocity).zip(&grad) {
                *v = cfg.momentum * *v - cfg.learning_rate * g;
                *p += *v;
            }
        }
        let mean_loss = epoch_loss / tiles.len() as f64;
        if !mean_loss.is_finite() {
            return Err(invalid!("training diverged at epoch {epoch}"));
        }
        history.push(mean_loss);
    }
    Ok(AeModel {
        channels: d,
        patch: cfg.patch,
        layers,
        weights: params,
        norm_mean,
        norm_std,
        loss_history: history,
    })
}

/// Tile origins along one axis: pitch `stride`, with a final tile flush
/// against the far edge.
fn axis_origins(len: usize, patch: usize, stride: usize) -> Vec<usize> {
    let mut v: Vec<usize> = (0..=len - patch).step_by(stride).collect();
    if *v.last().unwrap_or(&0) != len - patch {
        v.push(len - patch);
    }
    v
}

impl AeModel {
    /// Channel-mean squared error of one standardised tile, per pixel.
    pub fn tile_errors(&self, tile: &[f64]) -> Vec<f64> {
        let tr = net::forward(&self.layers, &self.weights, tile, self.patch);
        let pp = self.patch * self.patch;
        let mut err = vec![0.0; pp];
        for c in 0..self.channels {
            for (e, (o, t)) in err
                .iter_mut()
                .zip(tr.output[c * pp..(c + 1) * pp].iter().zip(&tile[c * pp..(c + 1) * pp]))
            {
                *e += (o - t) * (o - t);
            }
        }
        err.iter_mut().for_each(|e| *e /= self.channels as f64);
        err
    }

    /// Plain-text shape manifest for [`AeModel::weight_bytes`].
    pub fn manifest(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "format {MANIFEST_MAGIC}");
        let _ = writeln!(s, "byte_order little_endian f64");
        let _ = writeln!(s, "channels {}", self.channels);
        let _ = writeln!(s, "patch {}", self.patch);
        for l in &self.layers {
            let _ = writeln!(
                s,
                "layer {} cin {} cout {} kernel 3 stride {} activation {}",
                l.name(),
                l.cin,
                l.cout,
                l.stride,
                if l.leaky { "leaky" } else { "linear" }
            );
        }
        let _ = writeln!(s, "parameters {}", self.weights.len());
        let _ = writeln!(s, "norm_mean {}", join(&self.norm_mean));
        let _ = writeln!(s, "norm_std {}", join(&self.norm_std));
        s
    }

    /// Weights as consecutive little-endian `f64`, layer by layer, each
    /// layer's kernel `[cout][cin][3][3]` followed by its biases.
    pub fn weight_bytes(&self) -> Vec<u8> {
        self.weights.iter().flat_map(|w| w.to_le_bytes()).collect()
    }

    pub fn from_parts(manifest: &str, bytes: &[u8]) -> Result<Self> {
        let mut channels = None;
        let mut patch = None;
        let mut layers = Vec::new();
        let mut n_params = None;
        let mut norm_mean = Vec::new();
        let mut norm_std = Vec::new();
        for line in manifest.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let (key, rest) = line.split_once(' ').unwrap_or((line, ""));
            match key {
                "format" if rest != MANIFEST_MAGIC => return Err(invalid!("unknown model format `{rest}`")),
                "channels" => channels = Some(parse_num::<usize>(rest)?),
                "patch" => patch = Some(parse_num::<usize>(rest)?),
                "parameters" => n_params = Some(parse_num::<usize>(rest)?),
                "norm_mean" => norm_mean = parse_list(rest)?,
                "norm_std" => norm_std = parse_list(rest)?,
                "layer" => layers.push(parse_layer(rest)?),
                _ => {}
            }
        }
        let channels = channels.ok_or_else(|| invalid!("manifest lacks `channels`"))?;
        let patch = patch.ok_or_else(|| invalid!("manifest lacks `patch`"))?;
        let expected: usize = layers.iter().map(LayerSpec::param_len).sum();
        if n_params != Some(expected) || bytes.len() != expected * 8 {
            return Err(invalid!("weight payload does not match the layer manifest"));
        }
        if norm_mean.len() != channels || norm_std.len() != channels || norm_std.iter().any(|s| !(*s > 0.0)) {
            return Err(invalid!("normalisation does not match {channels} channels"));
        }
        let weights: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap_or([0; 8])))
            .collect();
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(invalid!("non-finite weight"));
        }
        Ok(Self {
            channels,
            patch,
            layers,
            weights,
            norm_mean,
            norm_std,
            loss_history: Vec::new(),
        })
    }
}

fn join(v: &[f64]) -> String {
    let mut s = String::new();
    for (i, x) in v.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{x:?}");
    }
    s
}

fn parse_num<T: core::str::FromStr>(s: &str) -> Result<T> {
    s.trim().parse().map_err(|_| invalid!("bad number `{s}` in manifest"))
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split_whitespace().map(parse_num).collect()
}

fn parse_layer(s: &str) -> Result<LayerSpec> {
    let t: Vec<&str> = s.split_whitespace().collect();
    let field = |name: &str| -> Result<&str> {
        t.iter()
            .position(|k| *k == name)
            .and_then(|i| t.get(i + 1).copied())
            .ok_or_else(|| invalid!("layer line lacks `{name}`"))
    };
    Ok(LayerSpec {
        cin: parse_num(field("cin")?)?,
        cout: parse_num(field("cout")?)?,
        stride: parse_num(field("stride")?)?,
        upsample: t.first() == Some(&"upconv"),
        leaky: field("activation")? == "leaky",
    })
}

/// Per-pixel channel-mean squared reconstruction error, averaged over all
/// tiles (pitch `patch / 2`) that cover the pixel.
pub fn ae_score_map(stack: &FeatureStack, model: &AeModel) -> Result<ScoreMap> {
    if stack.depth() != model.channels {
        return Err(invalid!(
            "model expects {} channels, stack has {}",
            model.channels,
            stack.depth()
        ));
    }
    let (w, h) = stack.dims();
    let p = model.patch;
    if w < p || h < p {
        return Err(invalid!("scene {w}x{h} smaller than a {p}-pixel tile"));
    }
    let mut sum = Grid::filled(w, h, 0.0);
    let mut count = Grid::filled(w, h, 0u32);
    let stride = (p / 2).max(1);
    for &y0 in &axis_origins(h, p, stride) {
        for &x0 in &axis_origins(w, p, stride) {
            let tile = extract_tile(stack, x0, y0, p, &model.norm_mean, &model.norm_std);
            let err = model.tile_errors(&tile);
            for ty in 0..p {
                for tx in 0..p {
                    sum[(x0 + tx, y0 + ty)] += err[ty * p + tx];
                    count[(x0 + tx, y0 + ty)] += 1;
                }
            }
        }
    }
    let scores = Grid::from_fn(w, h, |x, y| sum[(x, y)] / f64::from(count[(x, y)]));
    Ok(ScoreMap::dense("ae", scores))
}

/// Largest relative error between analytic and central-difference
/// gradients, per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientCheck {
    pub layer_errors: Vec<f64>,
    /// Smallest |pre-activation| of the leaky layers at the checked point.
    pub min_preactivation: f64,
}

impl GradientCheck {
    pub fn max_error(&self) -> f64 {
        self.layer_errors.iter().fold(0.0, |m, &e| m.max(e))
    }
}

/// Checks every parameter of a `channels`-channel network on a random
/// `side × side` tile at a random parameter point drawn from `seed`, redrawn
/// until every leaky pre-activation is at least `10h` from the kink.
pub fn gradient_check(channels: usize, side: usize, seed: u64) -> Result<GradientCheck> {
    if side < 4 || side % 4 != 0 {
        return Err(invalid!("tile side {side} is not a multiple of 4"));
    }
    let cfg = AeConfig::default();
    let layers = architecture(channels, cfg.hidden_width, cfg.latent_width);
    let mut rng = stream(seed, Stage::AeInit);
    let n: usize = layers.iter().map(LayerSpec::param_len).sum();
    let h = 1e-4;
    let (params, x, tr) = loop {
        let params: Vec<f64> = (0..n).map(|_| rng.random_range(-0.5..0.5)).collect();
        let x: Vec<f64> = (0..channels * side * side).map(|_| rng.random_range(-1.0..1.0)).collect();
        let tr = net::forward(&layers, &params, &x, side);
        if tr.min_abs_preactivation(&layers) > 10.0 * h {
            break (params, x, tr);
        }
    };
    let mut grad = vec![0.0; n];
    net::backward(&layers, &params, &tr, &x, 1.0, &mut grad);
    let loss_at = |p: &[f64]| net::tile_loss(&net::forward(&layers, p, &x, side).output, &x);
    let mut layer_errors = Vec::with_capacity(layers.len());
    let mut off = 0;
    let mut p = params.clone();
    for l in &layers {
        let mut worst = 0.0f64;
        for i in off..off + l.param_len() {
            p[i] = params[i] + h;
            let up = loss_at(&p);
            p[i] = params[i] - h;
            let dn = loss_at(&p);
            p[i] = params[i];
            let num = (up - dn) / (2.0 * h);
            let err = (num - grad[i]).abs() / num.abs().max(grad[i].abs()).max(1e-7);
            worst = worst.max(err);
        }
        layer_errors.push(worst);
        off += l.param_len();
    }
    Ok(GradientCheck {
        layer_errors,
        min_preactivation: tr.min_abs_preactivation(&layers),
    })
}
