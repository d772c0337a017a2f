use super::{DenoiserParams, DenoiserSpec, ParamGroup};
use crate::conditioning::Condition;
use crate::ddpm::{q_sample, NoiseSchedule};
use crate::error::{Error, Result};
use crate::frame::EventFrame;
use crate::rng::{self, Domain};
use crate::tensor::Tensor;
use rand::Rng;
use rayon::prelude::*;

/// Optimizer and sampling settings for [`train`].
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub steps: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
    /// Probability of training an item with `Condition::Unconditional`.
    pub uncond_prob: f64,
    /// Parameter group names (`conv1.weight`, ...) held fixed.
    pub frozen: Vec<String>,
    /// Compute per-item gradients on the rayon pool.
    pub parallel: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 16,
            steps: 1000,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
            uncond_prob: 0.1,
            frozen: Vec::new(),
            parallel: false,
        }
    }
}

impl TrainConfig {
    /// `learning_rate == 0` is accepted so a run can leave parameters untouched.
    pub fn validate(&self) -> Result<()> {
        let ok = self.batch_size >= 1
            && self.learning_rate >= 0.0
            && self.learning_rate.is_finite()
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0
            && (0.0..=1.0).contains(&self.uncond_prob);
        if !ok {
            return Err(Error::InvalidArgument(format!("invalid train config {self:?}")));
        }
        self.frozen_groups().map(|_| ())
    }

    pub fn frozen_groups(&self) -> Result<Vec<ParamGroup>> {
        self.frozen
            .iter()
            .map(|n| ParamGroup::from_name(n).ok_or_else(|| Error::Config(format!("unknown parameter group {n:?}"))))
            .collect()
    }
}

/// First and second moment estimates plus the number of completed steps.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: usize,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        Self { step: 0, m: vec![0.0; n], v: vec![0.0; n] }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean batch loss per step, indexed from the first step of this call.
    pub losses: Vec<f64>,
    pub state: AdamState,
}

impl TrainReport {
    /// Writes `step,loss` rows; `first_step` numbers the first entry.
    pub fn write_loss_csv(&self, w: impl std::io::Write, first_step: usize) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["step", "loss"])?;
        for (i, l) in self.losses.iter().enumerate() {
            out.write_record([(first_step + i + 1).to_string(), format!("{l:.9e}")])?;
        }
        out.flush().map_err(|e| Error::io("loss csv", e))
    }
}

/// Trains freshly initialized parameters (init seed = `cfg.seed`).
pub fn train(
    data: &[(EventFrame, Condition)],
    spec: DenoiserSpec,
    cfg: &TrainConfig,
    sched: &NoiseSchedule,
) -> Result<(DenoiserParams, TrainReport)> {
    let params = DenoiserParams::init(spec, cfg.seed)?;
    let state = AdamState::new(params.len());
    train_from(params, state, data, cfg, sched)
}

/// Continues training for `cfg.steps` more steps. Step `k` always draws from
/// stream `(seed, k)`, so splitting a run into pieces does not change it.
pub fn train_from(
    mut params: DenoiserParams,
    mut state: AdamState,
    data: &[(EventFrame, Condition)],
    cfg: &TrainConfig,
    sched: &NoiseSchedule,
) -> Result<(DenoiserParams, TrainReport)> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Empty("training dataset"));
    }
    if state.m.len() != params.len() || state.v.len() != params.len() {
        return Err(Error::ShapeMismatch { expected: vec![params.len()], got: vec![state.m.len()] });
    }
    let images: Vec<Tensor> = data.iter().map(|(f, _)| f.to_model_tensor()).collect();
    let trainable = trainable_mask(&params, &cfg.frozen_groups()?);
    let mut losses = Vec::with_capacity(cfg.steps);

    for _ in 0..cfg.steps {
        let step = state.step;
        let mut rng = rng::stream(cfg.seed, Domain::Train, step as u64);
        let items: Vec<(usize, usize, Tensor, bool)> = (0..cfg.batch_size)
            .map(|_| {
                let idx = rng.random_range(0..data.len());
                let t = rng.random_range(1..=sched.steps());
                let eps = Tensor::randn(images[idx].shape(), &mut rng);
                let drop = rng.random::<f64>() < cfg.uncond_prob;
                (idx, t, eps, drop)
            })
            .collect();

        let item_grad = |(idx, t, eps, drop): &(usize, usize, Tensor, bool)| -> Result<(f64, Vec<f64>)> {
            let cond = if *drop { &Condition::Unconditional } else { &data[*idx].1 };
            let x_t = q_sample(&images[*idx], *t, eps, sched)?;
            params.loss_and_grad(&x_t, *t, cond, eps)
        };
        let per_item: Vec<(f64, Vec<f64>)> = if cfg.parallel {
            items.par_iter().map(item_grad).collect::<Result<_>>()?
        } else {
            items.iter().map(item_grad).collect::<Result<_>>()?
        };

        let b = cfg.batch_size as f64;
        let mut grad = vec![0.0; params.len()];
        let mut loss = 0.0;
        for (l, g) in &per_item {
            loss += l;
            grad.iter_mut().zip(g).for_each(|(a, x)| *a += x);
        }
        loss /= b;
        if !loss.is_finite() {
            return Err(Error::NonFinite("training loss"));
        }
        losses.push(loss);

        state.step += 1;
        let k = state.step as i32;
        let c1 = 1.0 - cfg.beta1.powi(k);
        let c2 = 1.0 - cfg.beta2.powi(k);
        let values = params.values_mut();
        for i in 0..values.len() {
            if !trainable[i] {
                continue;
            }
            let g = grad[i] / b;
            state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
            state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
            let m_hat = state.m[i] / c1;
            let v_hat = state.v[i] / c2;
            values[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
        }
    }
    Ok((params, TrainReport { losses, state }))
}

fn trainable_mask(params: &DenoiserParams, frozen: &[ParamGroup]) -> Vec<bool> {
    let mut mask = vec![true; params.len()];
    for &g in frozen {
        mask[params.range(g)].fill(false);
    }
    mask
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::denoiser::Activation;
    use crate::frame::{Encoding, EventFrame};

    fn spec() -> DenoiserSpec {
        DenoiserSpec { image_channels: 3, control_channels: 0, hidden: 4, cond_dim: 4, time_dim: 4, activation: Activation::Silu }
    }

    fn constant_frame(v: f64) -> EventFrame {
        EventFrame::from_data(4, 4, vec![v; 48], Encoding::Full).unwrap()
    }

    fn dataset() -> Vec<(EventFrame, Condition)> {
        vec![
            (constant_frame(0.2), Condition::ClassText { prompt: "a".into(), embedding: vec![1.0, 0.0, 0.0, 0.0] }),
            (constant_frame(0.9), Condition::ClassText { prompt: "b".into(), embedding: vec![0.0, 1.0, 0.0, 0.0] }),
        ]
    }

    fn sched() -> NoiseSchedule {
        NoiseSchedule::linear_rescaled(50).unwrap()
    }

    #[test]
    fn empty_dataset_rejected() {
        assert!(matches!(train(&[], spec(), &TrainConfig::default(), &sched()), Err(Error::Empty(_))));
    }

    #[test]
    fn bad_config_rejected() {
        for cfg in [
            TrainConfig { batch_size: 0, ..Default::default() },
            TrainConfig { learning_rate: -1.0, ..Default::default() },
            TrainConfig { uncond_prob: 1.5, ..Default::default() },
            TrainConfig { frozen: vec!["nope".into()], ..Default::default() },
        ] {
            assert!(cfg.validate().is_err());
        }
    }

    #[test]
    fn loss_trace_is_deterministic_and_parallel_invariant() {
        let cfg = TrainConfig { steps: 15, batch_size: 4, seed: 9, ..Default::default() };
        let (p1, r1) = train(&dataset(), spec(), &cfg, &sched()).unwrap();
        let (p2, r2) = train(&dataset(), spec(), &cfg, &sched()).unwrap();
        let (p3, r3) = train(&dataset(), spec(), &TrainConfig { parallel: true, ..cfg.clone() }, &sched()).unwrap();
        assert_eq!(r1.losses, r2.losses);
        assert_eq!(r1.losses, r3.losses);
        assert_eq!(p1, p2);
        assert_eq!(p1, p3);
    }

    #[test]
    fn resumed_run_matches_single_run() {
        let cfg = TrainConfig { steps: 10, batch_size: 2, seed: 3, ..Default::default() };
        let (full, rf) = train(&dataset(), spec(), &cfg, &sched()).unwrap();
        let half = TrainConfig { steps: 5, ..cfg.clone() };
        let (p, r1) = train(&dataset(), spec(), &half, &sched()).unwrap();
        let (p, r2) = train_from(p, r1.state.clone(), &dataset(), &half, &sched()).unwrap();
        assert_eq!(p, full);
        assert_eq!([r1.losses, r2.losses].concat(), rf.losses);
    }

    #[test]
    fn zero_learning_rate_keeps_params() {
        let cfg = TrainConfig { steps: 5, learning_rate: 0.0, ..Default::default() };
        let (p, _) = train(&dataset(), spec(), &cfg, &sched()).unwrap();
        assert_eq!(p, DenoiserParams::init(spec(), cfg.seed).unwrap());
    }

    #[test]
    fn frozen_groups_do_not_move() {
        let cfg = TrainConfig { steps: 5, frozen: vec!["conv1.weight".into(), "out.bias".into()], ..Default::default() };
        let init = DenoiserParams::init(spec(), cfg.seed).unwrap();
        let (p, _) = train(&dataset(), spec(), &cfg, &sched()).unwrap();
        assert_eq!(p.group(ParamGroup::Conv1Weight), init.group(ParamGroup::Conv1Weight));
        assert_eq!(p.group(ParamGroup::OutBias), init.group(ParamGroup::OutBias));
        assert_ne!(p.group(ParamGroup::OutWeight), init.group(ParamGroup::OutWeight));
    }

    #[test]
    fn full_dropout_ignores_labels() {
        let cfg = TrainConfig { steps: 8, uncond_prob: 1.0, ..Default::default() };
        let data = dataset();
        let mut swapped = data.clone();
        let c0 = swapped[0].1.clone();
        swapped[0].1 = swapped[1].1.clone();
        swapped[1].1 = c0;
        let (_, r1) = train(&data, spec(), &cfg, &sched()).unwrap();
        let (_, r2) = train(&swapped, spec(), &cfg, &sched()).unwrap();
        assert_eq!(r1.losses, r2.losses);
    }

    #[test]
    fn constant_image_converges() {
        let frame = EventFrame::from_data(8, 8, vec![0.75; 192], Encoding::Full).unwrap();
        let data = vec![(frame, Condition::Unconditional)];
        let spec = DenoiserSpec { hidden: 8, ..spec() };
        let cfg = TrainConfig { steps: 2000, batch_size: 8, seed: 1, ..Default::default() };
        let (_, r) = train(&data, spec, &cfg, &sched()).unwrap();
        let tail = r.losses[r.losses.len() - 100..].iter().sum::<f64>() / 100.0;
        assert!(tail < 0.1, "tail loss {tail}");
    }

    #[test]
    fn loss_csv_layout() {
        let r = TrainReport { losses: vec![0.5, 0.25], state: AdamState::new(0) };
        let mut buf = Vec::new();
        r.write_loss_csv(&mut buf, 10).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "step,loss\n11,5.000000000e-1\n12,2.500000000e-1\n");
    }
}
