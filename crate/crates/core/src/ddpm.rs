//! Denoising diffusion: schedule, forward noising, objective and ancestral sampling.
//!
//! Timesteps run `1..=T`. With `alpha_t = 1 - beta_t` and
//! `alpha_bar_t = prod_{s <= t} alpha_s` (and `alpha_bar_0 = 1`):
//!
//! ```text
//! q_sample:  x_t     = sqrt(alpha_bar_t) x_0 + sqrt(1 - alpha_bar_t) eps
//! mean:      mu      = (x_t - (1 - alpha_t) / sqrt(1 - alpha_bar_t) eps_theta) / sqrt(alpha_t)
//! variance:  sigma^2 = (1 - alpha_bar_{t-1}) / (1 - alpha_bar_t) (1 - alpha_t)
//! ```
//!
//! The final step (`t = 1`) has zero variance and draws no noise.

use crate::conditioning::Condition;
use crate::error::{Error, Result};
use crate::rng::{self, Domain};
use crate::tensor::Tensor;
use rand::Rng;
use rayon::prelude::*;
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    Linear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    pub kind: ScheduleKind,
    pub beta_start: f64,
    pub beta_end: f64,
    beta: Vec<f64>,
    alpha: Vec<f64>,
    alpha_bar: Vec<f64>,
}

impl NoiseSchedule {
    pub fn new(steps: usize, beta_start: f64, beta_end: f64, kind: ScheduleKind) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidArgument("schedule needs at least one step".into()));
        }
        if !(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "need 0 < beta_start <= beta_end < 1, got {beta_start} and {beta_end}"
            )));
        }
        let beta: Vec<f64> = match kind {
            ScheduleKind::Linear if steps == 1 => vec![beta_start],
            ScheduleKind::Linear => (0..steps)
                .map(|i| beta_start + (beta_end - beta_start) * i as f64 / (steps - 1) as f64)
                .collect(),
        };
        let alpha: Vec<f64> = beta.iter().map(|b| 1.0 - b).collect();
        let alpha_bar = alpha
            .iter()
            .scan(1.0, |acc, a| {
                *acc *= a;
                Some(*acc)
            })
            .collect();
        Ok(Self { kind, beta_start, beta_end, beta, alpha, alpha_bar })
    }

    pub fn linear(steps: usize, beta_start: f64, beta_end: f64) -> Result<Self> {
        Self::new(steps, beta_start, beta_end, ScheduleKind::Linear)
    }

    /// 1000 steps, beta from 1e-4 to 0.02.
    pub fn default_linear() -> Self {
        Self::linear(1000, 1e-4, 0.02).expect("default schedule")
    }

    /// The default beta range rescaled by `1000 / steps`, so short schedules
    /// still end near pure noise. Needs `steps > 20`.
    pub fn linear_rescaled(steps: usize) -> Result<Self> {
        let s = 1000.0 / steps.max(1) as f64;
        Self::linear(steps, 1e-4 * s, 0.02 * s)
    }

    pub fn steps(&self) -> usize {
        self.beta.len()
    }

    fn check(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.steps() {
            return Err(Error::TimestepOutOfRange { t, max: self.steps() });
        }
        Ok(())
    }

    /// Panics unless `1 <= t <= T`.
    pub fn beta(&self, t: usize) -> f64 {
        self.beta[t - 1]
    }

    pub fn alpha(&self, t: usize) -> f64 {
        self.alpha[t - 1]
    }

    /// `alpha_bar(0)` is 1.
    pub fn alpha_bar(&self, t: usize) -> f64 {
        if t == 0 {
            1.0
        } else {
            self.alpha_bar[t - 1]
        }
    }

    pub fn posterior_variance(&self, t: usize) -> f64 {
        (1.0 - self.alpha_bar(t - 1)) / (1.0 - self.alpha_bar(t)) * (1.0 - self.alpha(t))
    }

    /// `key = value` lines: `T`, `beta_start`, `beta_end`, `kind`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let kind = match self.kind {
            ScheduleKind::Linear => "linear",
        };
        writeln!(s, "T = {}", self.steps()).unwrap();
        writeln!(s, "beta_start = {:?}", self.beta_start).unwrap();
        writeln!(s, "beta_end = {:?}", self.beta_end).unwrap();
        writeln!(s, "kind = {kind}").unwrap();
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |m: String| Error::format("schedule", m);
        let (mut steps, mut start, mut end, mut kind) = (None, None, None, None);
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let (k, v) = line.split_once('=').ok_or_else(|| bad(format!("expected key = value: `{line}`")))?;
            let v = v.trim();
            match k.trim() {
                "T" => steps = Some(v.parse::<usize>().map_err(|e| bad(e.to_string()))?),
                "beta_start" => start = Some(v.parse::<f64>().map_err(|e| bad(e.to_string()))?),
                "beta_end" => end = Some(v.parse::<f64>().map_err(|e| bad(e.to_string()))?),
                "kind" if v == "linear" => kind = Some(ScheduleKind::Linear),
                other => return Err(bad(format!("unknown entry `{other} = {v}`"))),
            }
        }
        let missing = |k: &str| bad(format!("missing {k}"));
        Self::new(
            steps.ok_or_else(|| missing("T"))?,
            start.ok_or_else(|| missing("beta_start"))?,
            end.ok_or_else(|| missing("beta_end"))?,
            kind.ok_or_else(|| missing("kind"))?,
        )
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

/// A noise predictor `eps_theta(x_t, t, c)`.
pub trait Denoiser {
    fn predict(&self, x_t: &Tensor, t: usize, cond: &Condition) -> Result<Tensor>;
}

impl<F> Denoiser for F
where
    F: Fn(&Tensor, usize, &Condition) -> Result<Tensor>,
{
    fn predict(&self, x_t: &Tensor, t: usize, cond: &Condition) -> Result<Tensor> {
        self(x_t, t, cond)
    }
}

pub fn q_sample(x0: &Tensor, t: usize, eps: &Tensor, sched: &NoiseSchedule) -> Result<Tensor> {
    sched.check(t)?;
    let ab = sched.alpha_bar(t);
    x0.axpby(ab.sqrt(), eps, (1.0 - ab).sqrt())
}

/// Mean squared error between `eps` and the prediction at the noised input.
pub fn training_loss(
    denoiser: &impl Denoiser,
    x0: &Tensor,
    cond: &Condition,
    t: usize,
    eps: &Tensor,
    sched: &NoiseSchedule,
) -> Result<f64> {
    let x_t = q_sample(x0, t, eps, sched)?;
    let pred = denoiser.predict(&x_t, t, cond)?;
    pred.mean_squared_error(eps)
}

/// Posterior mean given a noise estimate.
pub fn posterior_mean(x_t: &Tensor, t: usize, eps: &Tensor, sched: &NoiseSchedule) -> Result<Tensor> {
    sched.check(t)?;
    let a = sched.alpha(t);
    let coef = (1.0 - a) / (1.0 - sched.alpha_bar(t)).sqrt();
    x_t.axpby(1.0 / a.sqrt(), eps, -coef / a.sqrt())
}

/// Clean-signal estimate implied by a noise estimate.
pub fn predict_x0(x_t: &Tensor, t: usize, eps: &Tensor, sched: &NoiseSchedule) -> Result<Tensor> {
    sched.check(t)?;
    let ab = sched.alpha_bar(t);
    x_t.axpby(1.0 / ab.sqrt(), eps, -((1.0 - ab) / ab).sqrt())
}

/// One reverse step from a given noise estimate. Draws from `rng` only when `t > 1`.
pub fn p_sample_from_eps(x_t: &Tensor, t: usize, eps: &Tensor, sched: &NoiseSchedule, rng: &mut impl Rng) -> Result<Tensor> {
    let mean = posterior_mean(x_t, t, eps, sched)?;
    if t == 1 {
        return Ok(mean);
    }
    let sigma = sched.posterior_variance(t).sqrt();
    let z = Tensor::randn(x_t.shape(), rng);
    mean.axpby(1.0, &z, sigma)
}

pub fn p_sample_step(
    denoiser: &impl Denoiser,
    x_t: &Tensor,
    t: usize,
    cond: &Condition,
    sched: &NoiseSchedule,
    rng: &mut impl Rng,
) -> Result<Tensor> {
    sched.check(t)?;
    let eps = denoiser.predict(x_t, t, cond)?;
    p_sample_from_eps(x_t, t, &eps, sched, rng)
}

/// Classifier-free guidance settings.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GuidanceConfig {
    /// Guidance weight `w >= 0`; 0 disables guidance.
    pub scale: f64,
    /// Probability of replacing the condition with `Unconditional` in training.
    pub uncond_prob: f64,
}

impl Default for GuidanceConfig {
    fn default() -> Self {
        Self { scale: 0.0, uncond_prob: 0.1 }
    }
}

impl GuidanceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.scale >= 0.0) || !(0.0..=1.0).contains(&self.uncond_prob) {
            return Err(Error::InvalidArgument(format!("invalid guidance config {self:?}")));
        }
        Ok(())
    }
}

/// `(1 + w) eps(x_t, t, c) - w eps(x_t, t, unconditional)`.
pub fn guided_epsilon(
    denoiser: &impl Denoiser,
    x_t: &Tensor,
    t: usize,
    cond: &Condition,
    guidance: &GuidanceConfig,
) -> Result<Tensor> {
    let w = guidance.scale;
    if !(w >= 0.0) {
        return Err(Error::InvalidArgument("guidance scale must be >= 0".into()));
    }
    let e_cond = denoiser.predict(x_t, t, cond)?;
    if w == 0.0 {
        return Ok(e_cond);
    }
    let e_uncond = denoiser.predict(x_t, t, &Condition::Unconditional)?;
    e_cond.axpby(1.0 + w, &e_uncond, -w)
}

/// Runs the reverse chain `t = T..1` from `x_T ~ N(0, I)` drawn from `rng`,
/// and returns the unclamped final state.
pub fn sample_chain(
    denoiser: &impl Denoiser,
    cond: &Condition,
    sched: &NoiseSchedule,
    shape: &[usize],
    guidance: &GuidanceConfig,
    rng: &mut impl Rng,
) -> Result<Tensor> {
    let mut x = Tensor::randn(shape, rng);
    for t in (1..=sched.steps()).rev() {
        let eps = guided_epsilon(denoiser, &x, t, cond, guidance)?;
        x = p_sample_from_eps(&x, t, &eps, sched, rng)?;
        x.ensure_finite("reverse diffusion state")?;
    }
    Ok(x)
}

/// Draws one sample and clamps it to `[-1, 1]`. The random stream is
/// `(seed, item 0)`, matching the first item of [`sample_batch`].
pub fn sample(
    denoiser: &impl Denoiser,
    cond: &Condition,
    sched: &NoiseSchedule,
    shape: &[usize],
    seed: u64,
) -> Result<Tensor> {
    sample_guided(denoiser, cond, sched, shape, seed, &GuidanceConfig { scale: 0.0, uncond_prob: 0.0 })
}

pub fn sample_guided(
    denoiser: &impl Denoiser,
    cond: &Condition,
    sched: &NoiseSchedule,
    shape: &[usize],
    seed: u64,
    guidance: &GuidanceConfig,
) -> Result<Tensor> {
    let mut rng = rng::stream(seed, Domain::Sample, 0);
    Ok(sample_chain(denoiser, cond, sched, shape, guidance, &mut rng)?.map(|v| v.clamp(-1.0, 1.0)))
}

/// One sample per condition; item `i` uses stream `(seed, i)`, so the result
/// does not depend on `parallel`.
pub fn sample_batch<D: Denoiser + Sync>(
    denoiser: &D,
    conds: &[Condition],
    sched: &NoiseSchedule,
    shape: &[usize],
    seed: u64,
    guidance: &GuidanceConfig,
    parallel: bool,
) -> Result<Vec<Tensor>> {
    let run = |(i, cond): (usize, &Condition)| {
        let mut rng = rng::stream(seed, Domain::Sample, i as u64);
        sample_chain(denoiser, cond, sched, shape, guidance, &mut rng).map(|x| x.map(|v| v.clamp(-1.0, 1.0)))
    };
    if parallel {
        conds.par_iter().enumerate().map(run).collect()
    } else {
        conds.iter().enumerate().map(run).collect()
    }
}
