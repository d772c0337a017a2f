//! A small conditional noise predictor with exact gradients.
//!
//! ```text
//! input  = [x_t (3 ch) | control image (k ch)]
//! z1     = conv1(input) + time_a                       (full resolution)
//! a1     = act(z1)
//! z2     = conv2(avgpool(a1)) + time_b + W_cond · emb  (half resolution)
//! a2     = act(z2)
//! a3     = act(conv3(a2))
//! output = conv_out(upsample(a3) + a1)
//! ```
//!
//! `[time_a | time_b] = W_time · sinusoid(t) + b_time`. The output layer starts
//! at zero so the initial prediction is zero. Spatial sizes must be even.

pub mod layers;
mod io;
mod train;

pub use io::{load_params, read_params, save_params, write_params, PARAMS_MAGIC};
pub use layers::Activation;
pub use train::{train, train_from, AdamState, TrainConfig, TrainReport};

use crate::conditioning::Condition;
use crate::ddpm::Denoiser;
use crate::error::{Error, Result};
use crate::rng::{self, Domain};
use crate::tensor::Tensor;
use layers::*;
use rand::Rng;

/// Architecture hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DenoiserSpec {
    pub image_channels: usize,
    pub control_channels: usize,
    pub hidden: usize,
    pub cond_dim: usize,
    pub time_dim: usize,
    pub activation: Activation,
}

impl Default for DenoiserSpec {
    fn default() -> Self {
        Self { image_channels: 3, control_channels: 0, hidden: 16, cond_dim: 16, time_dim: 16, activation: Activation::Silu }
    }
}

/// Parameter tensors in storage (and file) order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamGroup {
    Conv1Weight,
    Conv1Bias,
    TimeWeight,
    TimeBias,
    CondWeight,
    Conv2Weight,
    Conv2Bias,
    Conv3Weight,
    Conv3Bias,
    OutWeight,
    OutBias,
}

impl ParamGroup {
    pub const ALL: [ParamGroup; 11] = [
        ParamGroup::Conv1Weight,
        ParamGroup::Conv1Bias,
        ParamGroup::TimeWeight,
        ParamGroup::TimeBias,
        ParamGroup::CondWeight,
        ParamGroup::Conv2Weight,
        ParamGroup::Conv2Bias,
        ParamGroup::Conv3Weight,
        ParamGroup::Conv3Bias,
        ParamGroup::OutWeight,
        ParamGroup::OutBias,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ParamGroup::Conv1Weight => "conv1.weight",
            ParamGroup::Conv1Bias => "conv1.bias",
            ParamGroup::TimeWeight => "time.weight",
            ParamGroup::TimeBias => "time.bias",
            ParamGroup::CondWeight => "cond.weight",
            ParamGroup::Conv2Weight => "conv2.weight",
            ParamGroup::Conv2Bias => "conv2.bias",
            ParamGroup::Conv3Weight => "conv3.weight",
            ParamGroup::Conv3Bias => "conv3.bias",
            ParamGroup::OutWeight => "out.weight",
            ParamGroup::OutBias => "out.bias",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|g| g.name() == name)
    }

    fn is_weight(self) -> bool {
        matches!(
            self,
            ParamGroup::Conv1Weight
                | ParamGroup::TimeWeight
                | ParamGroup::CondWeight
                | ParamGroup::Conv2Weight
                | ParamGroup::Conv3Weight
                | ParamGroup::OutWeight
        )
    }
}

impl DenoiserSpec {
    pub fn validate(&self) -> Result<()> {
        if self.image_channels == 0 || self.hidden == 0 || self.cond_dim == 0 || self.time_dim == 0 {
            return Err(Error::InvalidArgument(format!("invalid denoiser spec {self:?}")));
        }
        Ok(())
    }

    pub fn input_channels(&self) -> usize {
        self.image_channels + self.control_channels
    }

    /// Element count and fan-in of one parameter group.
    pub fn group_shape(&self, g: ParamGroup) -> (usize, usize) {
        let (h, c, d, e, cin) = (self.hidden, self.image_channels, self.cond_dim, self.time_dim, self.input_channels());
        match g {
            ParamGroup::Conv1Weight => (h * cin * 9, cin * 9),
            ParamGroup::Conv1Bias | ParamGroup::Conv2Bias | ParamGroup::Conv3Bias => (h, 1),
            ParamGroup::TimeWeight => (2 * h * e, e),
            ParamGroup::TimeBias => (2 * h, 1),
            ParamGroup::CondWeight => (h * d, d),
            ParamGroup::Conv2Weight | ParamGroup::Conv3Weight => (h * h * 9, h * 9),
            ParamGroup::OutWeight => (c * h * 9, h * 9),
            ParamGroup::OutBias => (c, 1),
        }
    }

    /// Closed form: `h*cin*9 + 2*h*h*9 + c*h*9` conv weights, `3h + c` conv
    /// biases, `2h*(e+1)` time projection and `h*d` condition projection.
    pub fn param_count(&self) -> usize {
        let (h, c, d, e, cin) = (self.hidden, self.image_channels, self.cond_dim, self.time_dim, self.input_channels());
        h * cin * 9 + 2 * h * h * 9 + c * h * 9 + 3 * h + c + 2 * h * (e + 1) + h * d
    }

    fn offsets(&self) -> [(usize, usize); 11] {
        let mut out = [(0, 0); 11];
        let mut off = 0;
        for (slot, g) in out.iter_mut().zip(ParamGroup::ALL) {
            let n = self.group_shape(g).0;
            *slot = (off, off + n);
            off += n;
        }
        out
    }

    /// FNV-1a over a canonical description; stored in parameter files.
    pub fn hash(&self) -> u64 {
        let act = match self.activation {
            Activation::Silu => "silu",
            Activation::Identity => "identity",
        };
        let text = format!(
            "v1 image={} control={} hidden={} cond={} time={} act={act}",
            self.image_channels, self.control_channels, self.hidden, self.cond_dim, self.time_dim
        );
        text.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
    }
}

/// Flat parameter vector plus its layout.
#[derive(Debug, Clone, PartialEq)]
pub struct DenoiserParams {
    spec: DenoiserSpec,
    offsets: [(usize, usize); 11],
    values: Vec<f64>,
}

impl DenoiserParams {
    pub fn zeros(spec: DenoiserSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self { spec, offsets: spec.offsets(), values: vec![0.0; spec.param_count()] })
    }

    /// Weights uniform in `±sqrt(3 / fan_in)`, biases zero, output layer zero.
    pub fn init(spec: DenoiserSpec, seed: u64) -> Result<Self> {
        let mut p = Self::init_all(spec, seed)?;
        for g in ParamGroup::ALL {
            if !g.is_weight() || g == ParamGroup::OutWeight {
                p.group_mut(g).fill(0.0);
            }
        }
        Ok(p)
    }

    /// Like [`DenoiserParams::init`] but with every group random, including
    /// biases and the output layer. Used for gradient checks.
    pub fn init_all(spec: DenoiserSpec, seed: u64) -> Result<Self> {
        let mut p = Self::zeros(spec)?;
        let mut rng = rng::stream(seed, Domain::Init, 0);
        for g in ParamGroup::ALL {
            let bound = (3.0 / spec.group_shape(g).1 as f64).sqrt();
            let bound = if g.is_weight() { bound } else { 0.1 };
            for v in p.group_mut(g) {
                *v = rng.random_range(-bound..bound);
            }
        }
        Ok(p)
    }

    pub fn from_values(spec: DenoiserSpec, values: Vec<f64>) -> Result<Self> {
        let mut p = Self::zeros(spec)?;
        if values.len() != p.values.len() {
            return Err(Error::ShapeMismatch { expected: vec![p.values.len()], got: vec![values.len()] });
        }
        p.values = values;
        Ok(p)
    }

    pub fn spec(&self) -> &DenoiserSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn range(&self, g: ParamGroup) -> std::ops::Range<usize> {
        let (a, b) = self.offsets[g as usize];
        a..b
    }

    pub fn group(&self, g: ParamGroup) -> &[f64] {
        &self.values[self.range(g)]
    }

    pub fn group_mut(&mut self, g: ParamGroup) -> &mut [f64] {
        let r = self.range(g);
        &mut self.values[r]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Intermediate activations kept for the backward pass.
pub struct ForwardCache {
    h: usize,
    w: usize,
    input: Vec<f64>,
    time_features: Vec<f64>,
    embedding: Vec<f64>,
    z1: Vec<f64>,
    pooled: Vec<f64>,
    z2: Vec<f64>,
    a2: Vec<f64>,
    z3: Vec<f64>,
    u: Vec<f64>,
}

impl DenoiserParams {
    fn assemble_input(&self, x_t: &Tensor, cond: &Condition) -> Result<(usize, usize, Vec<f64>, Vec<f64>)> {
        let s = &self.spec;
        let shape = x_t.shape();
        if shape.len() != 3 || shape[0] != s.image_channels || shape[1] % 2 != 0 || shape[2] % 2 != 0 || shape[1] == 0 || shape[2] == 0 {
            return Err(Error::ShapeMismatch { expected: vec![s.image_channels, 0, 0], got: shape.to_vec() });
        }
        let (h, w) = (shape[1], shape[2]);
        let mut input = Vec::with_capacity(s.input_channels() * h * w);
        input.extend_from_slice(x_t.data());
        match cond.control() {
            Some(c) if s.control_channels > 0 => {
                if (c.channels, c.height, c.width) != (s.control_channels, h, w) {
                    return Err(Error::ShapeMismatch {
                        expected: vec![s.control_channels, h, w],
                        got: vec![c.channels, c.height, c.width],
                    });
                }
                input.extend_from_slice(&c.data);
            }
            _ => input.resize(s.input_channels() * h * w, 0.0),
        }
        let embedding = match cond.embedding() {
            Some(e) if e.len() != s.cond_dim => {
                return Err(Error::ShapeMismatch { expected: vec![s.cond_dim], got: vec![e.len()] })
            }
            Some(e) => e.to_vec(),
            None => vec![0.0; s.cond_dim],
        };
        Ok((h, w, input, embedding))
    }

    /// Noise prediction plus the cache needed by [`DenoiserParams::backward`].
    pub fn forward_cached(&self, x_t: &Tensor, t: usize, cond: &Condition) -> Result<(Tensor, ForwardCache)> {
        let s = &self.spec;
        let (h, w, input, embedding) = self.assemble_input(x_t, cond)?;
        let (hid, cin, c) = (s.hidden, s.input_channels(), s.image_channels);
        let (h2, w2) = (h / 2, w / 2);
        let act = s.activation;
        use ParamGroup::*;

        let time_features = timestep_features(t, s.time_dim);
        let temb = linear(self.group(TimeWeight), Some(self.group(TimeBias)), &time_features, 2 * hid);
        let cvec = linear(self.group(CondWeight), None, &embedding, hid);

        let mut z1 = vec![0.0; hid * h * w];
        conv3x3(&input, cin, h, w, self.group(Conv1Weight), hid, &mut z1);
        add_channel_bias(&mut z1, h * w, |o| self.group(Conv1Bias)[o] + temb[o]);
        let a1: Vec<f64> = z1.iter().map(|&z| act.apply(z)).collect();

        let pooled = avg_pool2(&a1, hid, h, w);
        let mut z2 = vec![0.0; hid * h2 * w2];
        conv3x3(&pooled, hid, h2, w2, self.group(Conv2Weight), hid, &mut z2);
        add_channel_bias(&mut z2, h2 * w2, |o| self.group(Conv2Bias)[o] + temb[hid + o] + cvec[o]);
        let a2: Vec<f64> = z2.iter().map(|&z| act.apply(z)).collect();

        let mut z3 = vec![0.0; hid * h2 * w2];
        conv3x3(&a2, hid, h2, w2, self.group(Conv3Weight), hid, &mut z3);
        add_channel_bias(&mut z3, h2 * w2, |o| self.group(Conv3Bias)[o]);
        let a3: Vec<f64> = z3.iter().map(|&z| act.apply(z)).collect();

        let mut u = upsample2(&a3, hid, h2, w2);
        u.iter_mut().zip(&a1).for_each(|(u, a)| *u += a);

        let mut out = vec![0.0; c * h * w];
        conv3x3(&u, hid, h, w, self.group(OutWeight), c, &mut out);
        add_channel_bias(&mut out, h * w, |o| self.group(OutBias)[o]);

        let out = Tensor::from_vec(&[c, h, w], out)?;
        out.ensure_finite("denoiser output")?;
        Ok((out, ForwardCache { h, w, input, time_features, embedding, z1, pooled, z2, a2, z3, u }))
    }

    pub fn forward(&self, x_t: &Tensor, t: usize, cond: &Condition) -> Result<Tensor> {
        Ok(self.forward_cached(x_t, t, cond)?.0)
    }

    /// Accumulates `d loss / d params` into `grad` given `d loss / d output`.
    pub fn backward(&self, cache: &ForwardCache, grad_out: &Tensor, grad: &mut [f64]) -> Result<()> {
        let s = &self.spec;
        let (h, w) = (cache.h, cache.w);
        let (hid, cin, c) = (s.hidden, s.input_channels(), s.image_channels);
        let (h2, w2) = (h / 2, w / 2);
        if grad_out.shape() != [c, h, w] {
            return Err(Error::ShapeMismatch { expected: vec![c, h, w], got: grad_out.shape().to_vec() });
        }
        if grad.len() != self.values.len() {
            return Err(Error::ShapeMismatch { expected: vec![self.values.len()], got: vec![grad.len()] });
        }
        let act = s.activation;
        let g_out = grad_out.data();
        let r = |g: ParamGroup| self.range(g);
        use ParamGroup::*;

        conv3x3_weight_grad(&cache.u, hid, h, w, g_out, c, &mut grad[r(OutWeight)]);
        sum_channels(g_out, h * w, &mut grad[r(OutBias)]);
        let mut g_u = vec![0.0; hid * h * w];
        conv3x3_input_grad(g_out, c, h, w, self.group(OutWeight), hid, &mut g_u);

        // Upsample branch back to the bottleneck.
        let g_a3 = upsample2_grad(&g_u, hid, h2, w2);
        let g_z3: Vec<f64> = g_a3.iter().zip(&cache.z3).map(|(g, &z)| g * act.derivative(z)).collect();
        conv3x3_weight_grad(&cache.a2, hid, h2, w2, &g_z3, hid, &mut grad[r(Conv3Weight)]);
        sum_channels(&g_z3, h2 * w2, &mut grad[r(Conv3Bias)]);
        let mut g_a2 = vec![0.0; hid * h2 * w2];
        conv3x3_input_grad(&g_z3, hid, h2, w2, self.group(Conv3Weight), hid, &mut g_a2);

        let g_z2: Vec<f64> = g_a2.iter().zip(&cache.z2).map(|(g, &z)| g * act.derivative(z)).collect();
        conv3x3_weight_grad(&cache.pooled, hid, h2, w2, &g_z2, hid, &mut grad[r(Conv2Weight)]);
        let mut g_bias2 = vec![0.0; hid];
        sum_channels(&g_z2, h2 * w2, &mut g_bias2);
        add_into(&mut grad[r(Conv2Bias)], &g_bias2);
        outer_into(&mut grad[r(CondWeight)], &g_bias2, &cache.embedding);
        let mut g_pooled = vec![0.0; hid * h2 * w2];
        conv3x3_input_grad(&g_z2, hid, h2, w2, self.group(Conv2Weight), hid, &mut g_pooled);

        // Skip path plus pooled path into a1.
        let mut g_a1 = g_u;
        avg_pool2_grad(&g_pooled, hid, h, w, &mut g_a1);
        let g_z1: Vec<f64> = g_a1.iter().zip(&cache.z1).map(|(g, &z)| g * act.derivative(z)).collect();
        conv3x3_weight_grad(&cache.input, cin, h, w, &g_z1, hid, &mut grad[r(Conv1Weight)]);
        let mut g_bias1 = vec![0.0; hid];
        sum_channels(&g_z1, h * w, &mut g_bias1);
        add_into(&mut grad[r(Conv1Bias)], &g_bias1);

        let g_temb: Vec<f64> = g_bias1.iter().chain(&g_bias2).copied().collect();
        add_into(&mut grad[r(TimeBias)], &g_temb);
        outer_into(&mut grad[r(TimeWeight)], &g_temb, &cache.time_features);
        Ok(())
    }
}

impl DenoiserParams {
    /// Mean squared error against `target` and its gradient with respect to every parameter.
    pub fn loss_and_grad(&self, x_t: &Tensor, t: usize, cond: &Condition, target: &Tensor) -> Result<(f64, Vec<f64>)> {
        let (pred, cache) = self.forward_cached(x_t, t, cond)?;
        let diff = pred.axpby(1.0, target, -1.0)?;
        let n = diff.len() as f64;
        let loss = diff.data().iter().map(|d| d * d).sum::<f64>() / n;
        let mut grad = vec![0.0; self.len()];
        self.backward(&cache, &diff.map(|d| 2.0 * d / n), &mut grad)?;
        Ok((loss, grad))
    }
}

fn add_channel_bias(x: &mut [f64], plane: usize, bias: impl Fn(usize) -> f64) {
    for (o, chunk) in x.chunks_mut(plane).enumerate() {
        let b = bias(o);
        chunk.iter_mut().for_each(|v| *v += b);
    }
}

fn sum_channels(g: &[f64], plane: usize, out: &mut [f64]) {
    for (o, chunk) in g.chunks(plane).enumerate() {
        out[o] += chunk.iter().sum::<f64>();
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
}

fn outer_into(dst: &mut [f64], rows: &[f64], cols: &[f64]) {
    for (i, r) in rows.iter().enumerate() {
        for (j, c) in cols.iter().enumerate() {
            dst[i * cols.len() + j] += r * c;
        }
    }
}

/// A trained network usable as a [`Denoiser`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConvDenoiser {
    pub params: DenoiserParams,
}

impl ConvDenoiser {
    pub fn new(params: DenoiserParams) -> Self {
        Self { params }
    }
}

impl Denoiser for ConvDenoiser {
    fn predict(&self, x_t: &Tensor, t: usize, cond: &Condition) -> Result<Tensor> {
        self.params.forward(x_t, t, cond)
    }
}

impl Denoiser for DenoiserParams {
    fn predict(&self, x_t: &Tensor, t: usize, cond: &Condition) -> Result<Tensor> {
        self.forward(x_t, t, cond)
    }
}
