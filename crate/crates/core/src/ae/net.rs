//! Convolution stack with hand-written forward and backward passes.
//!
//! Tensors are channel-major `(c, y, x)` flat slices. Every layer is a 3×3
//! convolution with zero padding 1, optionally preceded by ×2
//! nearest-neighbour upsampling.

use alloc::vec;
use alloc::vec::Vec;

pub const LEAKY_SLOPE: f64 = 0.1;
pub const KERNEL: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpec {
    pub cin: usize,
    pub cout: usize,
    pub stride: usize,
    pub upsample: bool,
    pub leaky: bool,
}

impl LayerSpec {
    pub fn weight_len(&self) -> usize {
        self.cout * self.cin * KERNEL * KERNEL
    }

    pub fn param_len(&self) -> usize {
        self.weight_len() + self.cout
    }

    /// Output side for an input of side `n`.
    pub fn out_side(&self, n: usize) -> usize {
        let n = if self.upsample { 2 * n } else { n };
        (n - 1) / self.stride + 1
    }

    pub fn name(&self) -> &'static str {
        match (self.upsample, self.stride) {
            (true, _) => "upconv",
            (false, 1) => "conv",
            _ => "downconv",
        }
    }
}

/// Encoder `d → hidden → latent` (stride 2 each), decoder mirrored with
/// upsampling; every layer but the last is leaky.
pub fn architecture(d: usize, hidden: usize, latent: usize) -> Vec<LayerSpec> {
    vec![
        LayerSpec { cin: d, cout: hidden, stride: 2, upsample: false, leaky: true },
        LayerSpec { cin: hidden, cout: latent, stride: 2, upsample: false, leaky: true },
        LayerSpec { cin: latent, cout: hidden, stride: 1, upsample: true, leaky: true },
        LayerSpec { cin: hidden, cout: d, stride: 1, upsample: true, leaky: false },
    ]
}

/// Per-layer activations kept for the backward pass.
#[derive(Debug, Clone, Default)]
pub struct Trace {
    /// Layer inputs after any upsampling.
    inputs: Vec<Vec<f64>>,
    /// Pre-activations.
    pre: Vec<Vec<f64>>,
    /// Spatial side of each layer input (after upsampling).
    sides: Vec<usize>,
    pub output: Vec<f64>,
}

impl Trace {
    /// Smallest pre-activation magnitude over the leaky layers.
    pub fn min_abs_preactivation(&self, layers: &[LayerSpec]) -> f64 {
        layers
            .iter()
            .zip(&self.pre)
            .filter(|(l, _)| l.leaky)
            .flat_map(|(_, p)| p.iter())
            .fold(f64::INFINITY, |m, v| m.min(v.abs()))
    }
}

#[inline]
fn act(v: f64, leaky: bool) -> f64 {
    if leaky && v < 0.0 {
        LEAKY_SLOPE * v
    } else {
        v
    }
}

#[inline]
fn act_grad(v: f64, leaky: bool) -> f64 {
    if leaky && v < 0.0 {
        LEAKY_SLOPE
    } else {
        1.0
    }
}

fn upsample(x: &[f64], c: usize, n: usize) -> Vec<f64> {
    let m = 2 * n;
    let mut out = vec![0.0; c * m * m];
    for ch in 0..c {
        for y in 0..m {
            for xx in 0..m {
                out[(ch * m + y) * m + xx] = x[(ch * n + y / 2) * n + xx / 2];
            }
        }
    }
    out
}

fn downsample_grad(g: &[f64], c: usize, n: usize) -> Vec<f64> {
    let m = 2 * n;
    let mut out = vec![0.0; c * n * n];
    for ch in 0..c {
        for y in 0..m {
            for xx in 0..m {
                out[(ch * n + y / 2) * n + xx / 2] += g[(ch * m + y) * m + xx];
            }
        }
    }
    out
}

fn conv_forward(spec: &LayerSpec, params: &[f64], input: &[f64], n: usize) -> Vec<f64> {
    let (w, b) = params.split_at(spec.weight_len());
    let m = (n - 1) / spec.stride + 1;
    let mut out = vec![0.0; spec.cout * m * m];
    for co in 0..spec.cout {
        let plane = &mut out[co * m * m..(co + 1) * m * m];
        plane.iter_mut().for_each(|v| *v = b[co]);
        for ci in 0..spec.cin {
            let src = &input[ci * n * n..(ci + 1) * n * n];
            let k = &w[(co * spec.cin + ci) * 9..(co * spec.cin + ci + 1) * 9];
            for oy in 0..m {
                for ox in 0..m {
                    let cy = (oy * spec.stride) as isize;
                    let cx = (ox * spec.stride) as isize;
                    let mut acc = 0.0;
                    for ky in 0..3isize {
                        let iy = cy + ky - 1;
                        if iy < 0 || iy >= n as isize {
                            continue;
                        }
                        let row = &src[iy as usize * n..(iy as usize + 1) * n];
                        for kx in 0..3isize {
                            let ix = cx + kx - 1;
                            if ix < 0 || ix >= n as isize {
                                continue;
                            }
                            acc += k[(ky * 3 + kx) as usize] * row[ix as usize];
                        }
                    }
                    plane[oy * m + ox] += acc;
                }
            }
        }
    }
    out
}

/// Accumulates parameter gradients into `grad` and returns the input
/// gradient.
fn conv_backward(
    spec: &LayerSpec,
    params: &[f64],
    input: &[f64],
    n: usize,
    d_pre: &[f64],
    grad: &mut [f64],
) -> Vec<f64> {
    let (w, _) = params.split_at(spec.weight_len());
    let (gw, gb) = grad.split_at_mut(spec.weight_len());
    let m = (n - 1) / spec.stride + 1;
    let mut d_in = vec![0.0; spec.cin * n * n];
    for co in 0..spec.cout {
        let dp = &d_pre[co * m * m..(co + 1) * m * m];
        gb[co] += dp.iter().sum::<f64>();
        for ci in 0..spec.cin {
            let src = &input[ci * n * n..(ci + 1) * n * n];
            let base = (co * spec.cin + ci) * 9;
            let k = &w[base..base + 9];
            let gk = &mut gw[base..base + 9];
            let di = &mut d_in[ci * n * n..(ci + 1) * n * n];
            for oy in 0..m {
                for ox in 0..m {
                    let g = dp[oy * m + ox];
                    if g == 0.0 {
                        continue;
                    }
                    let cy = (oy * spec.stride) as isize;
                    let cx = (ox * spec.stride) as isize;
                    for ky in 0..3isize {
                        let iy = cy + ky - 1;
                        if iy < 0 || iy >= n as isize {
                            continue;
                        }
                        for kx in 0..3isize {
                            let ix = cx + kx - 1;
                            if ix < 0 || ix >= n as isize {
                                continue;
                            }
                            let p = iy as usize * n + ix as usize;
                            let t = (ky * 3 + kx) as usize;
                            gk[t] += g * src[p];
                            di[p] += g * k[t];
                        }
                    }
                }
            }
        }
    }
    d_in
}

/// Runs the stack on one `(d, side, side)` tile.
pub fn forward(layers: &[LayerSpec], params: &[f64], x: &[f64], side: usize) -> Trace {
    let mut trace = Trace::default();
    let mut cur = x.to_vec();
    let mut n = side;
    let mut off = 0;
    for l in layers {
        if l.upsample {
            cur = upsample(&cur, l.cin, n);
            n *= 2;
        }
        let p = &params[off..off + l.param_len()];
        let pre = conv_forward(l, p, &cur, n);
        let out: Vec<f64> = pre.iter().map(|&v| act(v, l.leaky)).collect();
        trace.inputs.push(core::mem::take(&mut cur));
        trace.pre.push(pre);
        trace.sides.push(n);
        cur = out;
        n = (n - 1) / l.stride + 1;
        off += l.param_len();
    }
    trace.output = cur;
    trace
}

/// Mean squared reconstruction error of one tile.
pub fn tile_loss(output: &[f64], target: &[f64]) -> f64 {
    output
        .iter()
        .zip(target)
        .map(|(o, t)| (o - t) * (o - t))
        .sum::<f64>()
        / target.len() as f64
}

/// Back-propagates `scale · ∂(tile loss)/∂θ` into `grad`; returns the loss.
pub fn backward(
    layers: &[LayerSpec],
    params: &[f64],
    trace: &Trace,
    target: &[f64],
    scale: f64,
    grad: &mut [f64],
) -> f64 {
    let loss = tile_loss(&trace.output, target);
    let k = 2.0 * scale / target.len() as f64;
    let mut g: Vec<f64> = trace.output.iter().zip(target).map(|(o, t)| k * (o - t)).collect();
    let mut offsets = Vec::with_capacity(layers.len());
    let mut off = 0;
    for l in layers {
        offsets.push(off);
        off += l.param_len();
    }
    for (li, l) in layers.iter().enumerate().rev() {
        let pre = &trace.pre[li];
        for (gv, &p) in g.iter_mut().zip(pre) {
            *gv *= act_grad(p, l.leaky);
        }
        let n = trace.sides[li];
        let o = offsets[li];
        let range = o..o + l.param_len();
        let d_in = conv_backward(l, &params[range.clone()], &trace.inputs[li], n, &g, &mut grad[range]);
        g = if l.upsample { downsample_grad(&d_in, l.cin, n / 2) } else { d_in };
    }
    loss
}
