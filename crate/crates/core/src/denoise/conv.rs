//! A small volumetric convolutional denoiser with hand-written reverse mode.
//!
//! Layout: an input convolution to `width` feature maps, `blocks` residual
//! blocks `h ← h + act(conv(h))`, and a linear output convolution back to
//! the element channels. All convolutions are 3×3×3 with zero padding, so
//! every layer preserves the `length³` spatial shape.

use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{check_shape, Denoiser, NoiseLevel};
use crate::error::{Error, Result};

pub const KERNEL: usize = 3;
const TAPS: usize = KERNEL * KERNEL * KERNEL;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Silu,
}

impl Activation {
    #[inline]
    fn forward(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Silu => x / (1.0 + (-x).exp()),
        }
    }

    #[inline]
    fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Silu => {
                let s = 1.0 / (1.0 + (-x).exp());
                s + x * s * (1.0 - s)
            }
        }
    }

    fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Silu => "silu",
        }
    }
}

/// Shape of the network and the noise level it is trained for.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub channels: usize,
    pub length: usize,
    pub width: usize,
    pub blocks: usize,
    pub activation: Activation,
    pub sigma: NoiseLevel,
}

impl Architecture {
    pub fn new(channels: usize, length: usize, width: usize, blocks: usize, sigma: NoiseLevel) -> Result<Self> {
        let arch = Architecture {
            channels,
            length,
            width,
            blocks,
            activation: Activation::Silu,
            sigma,
        };
        arch.validate()?;
        Ok(arch)
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels == 0 || self.width == 0 || self.length == 0 {
            return Err(Error::invalid("architecture sizes must be positive"));
        }
        Ok(())
    }

    pub fn voxels(&self) -> usize {
        self.length * self.length * self.length
    }

    /// Flat tensor length the network consumes and produces.
    pub fn dim(&self) -> usize {
        self.channels * self.voxels()
    }

    /// `(in, out)` channel counts for every convolution, in order.
    pub fn layers(&self) -> Vec<(usize, usize)> {
        let mut v = vec![(self.channels, self.width)];
        v.extend(std::iter::repeat_n((self.width, self.width), self.blocks));
        v.push((self.width, self.channels));
        v
    }

    /// Parameter tensor sizes in declaration order: weight then bias per layer.
    pub fn param_sizes(&self) -> Vec<usize> {
        self.layers()
            .into_iter()
            .flat_map(|(cin, cout)| [cout * cin * TAPS, cout])
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.param_sizes().iter().sum()
    }

    /// Single-line `key=value` description stored in checkpoints.
    pub fn describe(&self) -> String {
        self.to_string()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut channels = None;
        let mut length = None;
        let mut width = None;
        let mut blocks = None;
        let mut activation = None;
        let mut sigma = None;
        for field in text.split_whitespace() {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| Error::invalid(format!("malformed architecture field `{field}`")))?;
            let bad = |_| Error::invalid(format!("bad value in architecture field `{field}`"));
            match key {
                "channels" => channels = Some(value.parse().map_err(bad)?),
                "length" => length = Some(value.parse().map_err(bad)?),
                "width" => width = Some(value.parse().map_err(bad)?),
                "blocks" => blocks = Some(value.parse().map_err(bad)?),
                "kernel" => {
                    if value != "3" {
                        return Err(Error::invalid(format!("unsupported kernel size {value}")));
                    }
                }
                "activation" => {
                    activation = Some(match value {
                        "relu" => Activation::Relu,
                        "silu" => Activation::Silu,
                        other => return Err(Error::invalid(format!("unknown activation {other}"))),
                    })
                }
                "sigma" => {
                    let s: f64 = value
                        .parse()
                        .map_err(|_| Error::invalid(format!("bad sigma `{value}`")))?;
                    sigma = Some(NoiseLevel::new(s)?);
                }
                _ => {}
            }
        }
        let missing = |name: &str| Error::invalid(format!("architecture lacks `{name}`"));
        let arch = Architecture {
            channels: channels.ok_or_else(|| missing("channels"))?,
            length: length.ok_or_else(|| missing("length"))?,
            width: width.ok_or_else(|| missing("width"))?,
            blocks: blocks.ok_or_else(|| missing("blocks"))?,
            activation: activation.ok_or_else(|| missing("activation"))?,
            sigma: sigma.ok_or_else(|| missing("sigma"))?,
        };
        arch.validate()?;
        Ok(arch)
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "channels={} length={} width={} blocks={} kernel={} activation={} sigma={}",
            self.channels,
            self.length,
            self.width,
            self.blocks,
            KERNEL,
            self.activation.name(),
            self.sigma.get()
        )
    }
}

/// Trainable state: live parameters plus their exponential moving average.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvDenoiserParams {
    pub arch: Architecture,
    pub params: Vec<Vec<f64>>,
    pub ema: Vec<Vec<f64>>,
    pub ema_decay: f64,
}

impl ConvDenoiserParams {
    /// He-style initialisation; the output layer starts 10× smaller.
    pub fn init<R: Rng + ?Sized>(arch: Architecture, ema_decay: f64, rng: &mut R) -> Result<Self> {
        arch.validate()?;
        if !(0.0..=1.0).contains(&ema_decay) {
            return Err(Error::invalid(format!("ema decay must be in [0, 1], got {ema_decay}")));
        }
        let layers = arch.layers();
        let last = layers.len() - 1;
        let mut params = Vec::with_capacity(2 * layers.len());
        for (l, &(cin, cout)) in layers.iter().enumerate() {
            let mut std = (2.0 / (cin * TAPS) as f64).sqrt();
            if l == last {
                std *= 0.1;
            }
            let normal = Normal::new(0.0, std).expect("finite std");
            params.push((0..cout * cin * TAPS).map(|_| normal.sample(rng)).collect());
            params.push(vec![0.0; cout]);
        }
        Ok(ConvDenoiserParams {
            arch,
            ema: params.clone(),
            params,
            ema_decay,
        })
    }

    pub fn from_parts(arch: Architecture, params: Vec<Vec<f64>>, ema: Vec<Vec<f64>>, ema_decay: f64) -> Result<Self> {
        let sizes = arch.param_sizes();
        let fits = |t: &[Vec<f64>]| t.len() == sizes.len() && t.iter().zip(&sizes).all(|(v, &n)| v.len() == n);
        if !fits(&params) || !fits(&ema) {
            return Err(Error::invalid("parameter tensors do not match the architecture"));
        }
        Ok(ConvDenoiserParams {
            arch,
            params,
            ema,
            ema_decay,
        })
    }

    /// `shadow ← decay · shadow + (1 - decay) · params`.
    pub fn update_ema(&mut self) {
        let d = self.ema_decay;
        for (s, p) in self.ema.iter_mut().zip(&self.params) {
            for (s, p) in s.iter_mut().zip(p) {
                *s = d * *s + (1.0 - d) * p;
            }
        }
    }

    pub fn denoiser(&self) -> ConvDenoiser {
        ConvDenoiser::new(self.arch.clone(), self.params.clone())
    }

    pub fn ema_denoiser(&self) -> ConvDenoiser {
        ConvDenoiser::new(self.arch.clone(), self.ema.clone())
    }
}

/// Frozen network, usable as a [`Denoiser`].
#[derive(Clone, Debug)]
pub struct ConvDenoiser {
    arch: Architecture,
    weights: Vec<Vec<f64>>,
}

/// Cached activations from one forward pass.
pub struct ForwardPass {
    /// Pre-activations of the input layer and of every residual block.
    pre: Vec<Vec<f64>>,
    /// Inputs to each residual block and to the output layer.
    hidden: Vec<Vec<f64>>,
    pub output: Vec<f64>,
}

impl ConvDenoiser {
    pub fn new(arch: Architecture, weights: Vec<Vec<f64>>) -> Self {
        debug_assert_eq!(weights.len(), arch.param_sizes().len());
        ConvDenoiser { arch, weights }
    }

    pub fn arch(&self) -> &Architecture {
        &self.arch
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn forward(&self, y: &[f64]) -> ForwardPass {
        let a = &self.arch;
        let l = a.length;
        let act = a.activation;
        let w = &self.weights;
        let mut pre = Vec::with_capacity(a.blocks + 1);
        let mut hidden = Vec::with_capacity(a.blocks + 1);

        let p0 = conv3d(y, a.channels, a.width, l, &w[0], &w[1]);
        hidden.push(p0.iter().map(|&v| act.forward(v)).collect::<Vec<_>>());
        pre.push(p0);
        for b in 0..a.blocks {
            let h = hidden.last().unwrap();
            let p = conv3d(h, a.width, a.width, l, &w[2 + 2 * b], &w[3 + 2 * b]);
            let next = h.iter().zip(&p).map(|(h, &p)| h + act.forward(p)).collect();
            pre.push(p);
            hidden.push(next);
        }
        let last = 2 * (a.blocks + 1);
        let output = conv3d(hidden.last().unwrap(), a.width, a.channels, l, &w[last], &w[last + 1]);
        ForwardPass { pre, hidden, output }
    }

    /// Parameter gradients of `Σ (x̂(y) - x)²` for one `(clean, noisy)` pair.
    pub fn loss_and_gradient(&self, clean: &[f64], noisy: &[f64]) -> Result<(f64, Vec<Vec<f64>>)> {
        check_shape(self.arch.dim(), clean.len())?;
        check_shape(self.arch.dim(), noisy.len())?;
        let a = &self.arch;
        let l = a.length;
        let act = a.activation;
        let fp = self.forward(noisy);
        let mut loss = 0.0;
        let d_out: Vec<f64> = fp
            .output
            .iter()
            .zip(clean)
            .map(|(o, x)| {
                let r = o - x;
                loss += r * r;
                2.0 * r
            })
            .collect();

        let mut grads: Vec<Vec<f64>> = a.param_sizes().into_iter().map(|n| vec![0.0; n]).collect();
        let last = 2 * (a.blocks + 1);
        let (gw, gb) = split_pair(&mut grads, last);
        let mut d_h = conv3d_backward(fp.hidden.last().unwrap(), a.width, a.channels, l, &self.weights[last], &d_out, gw, gb, true);
        for b in (0..a.blocks).rev() {
            let p = &fp.pre[b + 1];
            let d_pre: Vec<f64> = d_h.iter().zip(p).map(|(g, &p)| g * act.derivative(p)).collect();
            let (gw, gb) = split_pair(&mut grads, 2 + 2 * b);
            let d_in = conv3d_backward(&fp.hidden[b], a.width, a.width, l, &self.weights[2 + 2 * b], &d_pre, gw, gb, true);
            for (d, e) in d_h.iter_mut().zip(d_in) {
                *d += e;
            }
        }
        let d_pre0: Vec<f64> = d_h.iter().zip(&fp.pre[0]).map(|(g, &p)| g * act.derivative(p)).collect();
        let (gw, gb) = split_pair(&mut grads, 0);
        conv3d_backward(noisy, a.channels, a.width, l, &self.weights[0], &d_pre0, gw, gb, false);
        Ok((loss, grads))
    }
}

fn split_pair(grads: &mut [Vec<f64>], at: usize) -> (&mut Vec<f64>, &mut Vec<f64>) {
    let (head, tail) = grads.split_at_mut(at + 1);
    (&mut head[at], &mut tail[0])
}

impl Denoiser for ConvDenoiser {
    fn sigma(&self) -> NoiseLevel {
        self.arch.sigma
    }
    fn dim(&self) -> usize {
        self.arch.dim()
    }
    fn apply(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_shape(self.arch.dim(), y.len())?;
        Ok(self.forward(y).output)
    }
}

/// Index range of `x` along one axis such that `x + offset` stays inside `[0, l)`.
#[inline]
fn valid_range(offset: isize, l: usize) -> (usize, usize) {
    let lo = (-offset).max(0) as usize;
    let hi = (l as isize - offset.max(0)) as usize;
    (lo, hi)
}

#[inline]
fn taps() -> impl Iterator<Item = (usize, isize, isize, isize)> {
    (0..TAPS).map(|t| {
        let a = (t / 9) as isize - 1;
        let b = ((t / 3) % 3) as isize - 1;
        let c = (t % 3) as isize - 1;
        (t, a, b, c)
    })
}

/// Zero-padded "same" 3×3×3 convolution over `cin` channel volumes.
fn conv3d(input: &[f64], cin: usize, cout: usize, l: usize, weight: &[f64], bias: &[f64]) -> Vec<f64> {
    let n = l * l * l;
    let mut out = vec![0.0; cout * n];
    for o in 0..cout {
        let out_o = &mut out[o * n..(o + 1) * n];
        out_o.fill(bias[o]);
        for i in 0..cin {
            let in_i = &input[i * n..(i + 1) * n];
            for (t, da, db, dc) in taps() {
                let w = weight[(o * cin + i) * TAPS + t];
                let (a0, a1) = valid_range(da, l);
                let (b0, b1) = valid_range(db, l);
                let (c0, c1) = valid_range(dc, l);
                for x in a0..a1 {
                    for y in b0..b1 {
                        let orow = (x * l + y) * l;
                        let irow = (((x as isize + da) as usize * l + (y as isize + db) as usize) * l) as isize + dc;
                        let src = &in_i[(irow + c0 as isize) as usize..(irow + c1 as isize) as usize];
                        for (dst, s) in out_o[orow + c0..orow + c1].iter_mut().zip(src) {
                            *dst += w * s;
                        }
                    }
                }
            }
        }
    }
    out
}

/// Accumulates weight and bias gradients and returns the input gradient
/// (empty when `want_input` is false).
#[allow(clippy::too_many_arguments)]
fn conv3d_backward(
    input: &[f64],
    cin: usize,
    cout: usize,
    l: usize,
    weight: &[f64],
    grad_out: &[f64],
    grad_w: &mut [f64],
    grad_b: &mut [f64],
    want_input: bool,
) -> Vec<f64> {
    let n = l * l * l;
    let mut grad_in = if want_input { vec![0.0; cin * n] } else { Vec::new() };
    for o in 0..cout {
        let g_o = &grad_out[o * n..(o + 1) * n];
        grad_b[o] += g_o.iter().sum::<f64>();
        for i in 0..cin {
            let in_i = &input[i * n..(i + 1) * n];
            for (t, da, db, dc) in taps() {
                let widx = (o * cin + i) * TAPS + t;
                let w = weight[widx];
                let (a0, a1) = valid_range(da, l);
                let (b0, b1) = valid_range(db, l);
                let (c0, c1) = valid_range(dc, l);
                let mut acc = 0.0;
                for x in a0..a1 {
                    for y in b0..b1 {
                        let orow = (x * l + y) * l;
                        let start = ((((x as isize + da) as usize * l + (y as isize + db) as usize) * l) as isize + dc) + c0 as isize;
                        let start = start as usize;
                        let len = c1 - c0;
                        let g = &g_o[orow + c0..orow + c1];
                        let src = &in_i[start..start + len];
                        acc += g.iter().zip(src).map(|(g, s)| g * s).sum::<f64>();
                        if want_input {
                            let dst = &mut grad_in[i * n + start..i * n + start + len];
                            for (d, g) in dst.iter_mut().zip(g) {
                                *d += w * g;
                            }
                        }
                    }
                }
                grad_w[widx] += acc;
            }
        }
    }
    grad_in
}
