//! TOML pipeline configuration.
//!
//! ```toml
//! seed = 7
//!
//! [paths]
//! sequences = "fixtures/toy_classes/sequences.tsv"
//! out = "runs"
//!
//! [encoder]
//! mode = "full"          # full | mono | fixed_count | fixed_interval
//!
//! [schedule]
//! steps = 50
//! ```
//!
//! Every section is optional. Relative paths resolve against the config file.

use crate::ddpm::{GuidanceConfig, NoiseSchedule};
use crate::denoiser::{DenoiserSpec, TrainConfig};
use crate::error::{Error, Result};
use crate::event::SensorModel;
use crate::frame::{EncoderConfig, FrameMode};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    #[serde(default)]
    pub paths: PathsConfig,
    #[serde(default)]
    pub sensor: SensorModel,
    #[serde(default)]
    pub encoder: EncoderSection,
    #[serde(default)]
    pub schedule: ScheduleSection,
    #[serde(default)]
    pub denoiser: DenoiserSpec,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub guidance: GuidanceConfig,
    #[serde(default)]
    pub sample: SampleSection,
    #[serde(default)]
    pub evaluate: EvaluateSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    /// Sequence index read by `simulate`.
    pub sequences: Option<PathBuf>,
    /// Existing stream index; when set, `encode` reads it instead of the simulate stage.
    pub streams: Option<PathBuf>,
    /// Condition list for `sample`; defaults to the eval split of the encoded manifest.
    pub conditions: Option<PathBuf>,
    /// Root for run directories.
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncoderMode {
    Full,
    Mono,
    FixedCount,
    FixedInterval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderSection {
    pub mode: EncoderMode,
    /// Events per frame for `fixed_count`.
    pub count: Option<usize>,
    /// Window length in microseconds for `fixed_interval`.
    pub interval_us: Option<u64>,
    pub count_cap: u32,
    pub polarity: FrameMode,
}

impl Default for EncoderSection {
    fn default() -> Self {
        Self { mode: EncoderMode::Full, count: None, interval_us: None, count_cap: 3, polarity: FrameMode::Signed }
    }
}

impl EncoderSection {
    pub fn encoder_config(&self) -> EncoderConfig {
        EncoderConfig { count_cap: self.count_cap, polarity_mode: self.polarity }
    }

    pub fn validate(&self) -> Result<()> {
        self.encoder_config().validate()?;
        match self.mode {
            EncoderMode::FixedCount if self.count.unwrap_or(0) == 0 => {
                Err(Error::Config("encoder.count must be >= 1 for fixed_count".into()))
            }
            EncoderMode::FixedInterval if self.interval_us.unwrap_or(0) == 0 => {
                Err(Error::Config("encoder.interval_us must be >= 1 for fixed_interval".into()))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleSection {
    pub steps: usize,
    /// Both betas default to the 1000-step values scaled by `1000 / steps`.
    pub beta_start: Option<f64>,
    pub beta_end: Option<f64>,
}

impl Default for ScheduleSection {
    fn default() -> Self {
        Self { steps: 1000, beta_start: None, beta_end: None }
    }
}

impl ScheduleSection {
    pub fn build(&self) -> Result<NoiseSchedule> {
        match (self.beta_start, self.beta_end) {
            (None, None) => NoiseSchedule::linear_rescaled(self.steps),
            (Some(a), Some(b)) => NoiseSchedule::linear(self.steps, a, b),
            _ => Err(Error::Config("schedule.beta_start and beta_end must be set together".into())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub batch_size: usize,
    pub steps: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub frozen: Vec<String>,
    /// Parameter file to continue from.
    pub resume_from: Option<PathBuf>,
    /// Steps already taken by `resume_from`; keeps the random streams aligned.
    pub resume_step: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        let d = TrainConfig::default();
        Self {
            batch_size: d.batch_size,
            steps: d.steps,
            learning_rate: d.learning_rate,
            beta1: d.beta1,
            beta2: d.beta2,
            epsilon: d.epsilon,
            frozen: d.frozen,
            resume_from: None,
            resume_step: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleSection {
    /// Samples drawn for each distinct condition.
    pub per_condition: usize,
}

impl Default for SampleSection {
    fn default() -> Self {
        Self { per_condition: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateSection {
    /// Any of `fid`, `classification`, `centroid`.
    pub metrics: Vec<String>,
    pub feature_dim: usize,
    /// Overrides the generated manifest (default: the sample stage output).
    pub generated: Option<PathBuf>,
    /// Overrides the reference manifest (default: eval split of the encode stage).
    pub reference: Option<PathBuf>,
}

impl Default for EvaluateSection {
    fn default() -> Self {
        Self { metrics: vec!["fid".into()], feature_dim: 64, generated: None, reference: None }
    }
}

pub const METRIC_NAMES: [&str; 3] = ["fid", "classification", "centroid"];

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads `path` and resolves its relative paths against the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(p) = p {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        };
        fix(&mut self.paths.sequences);
        fix(&mut self.paths.streams);
        fix(&mut self.paths.conditions);
        fix(&mut self.paths.out);
        fix(&mut self.train.resume_from);
        fix(&mut self.evaluate.generated);
        fix(&mut self.evaluate.reference);
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.sensor.validate()?;
        self.encoder.validate()?;
        self.schedule.build()?;
        self.denoiser.validate()?;
        self.guidance.validate()?;
        self.train_config(false).validate()?;
        if self.sample.per_condition == 0 {
            return Err(Error::Config("sample.per_condition must be >= 1".into()));
        }
        if self.evaluate.feature_dim == 0 {
            return Err(Error::Config("evaluate.feature_dim must be >= 1".into()));
        }
        if let Some(m) = self.evaluate.metrics.iter().find(|m| !METRIC_NAMES.contains(&m.as_str())) {
            return Err(Error::Config(format!("unknown metric {m:?}")));
        }
        Ok(())
    }

    pub fn train_config(&self, parallel: bool) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            batch_size: t.batch_size,
            steps: t.steps,
            learning_rate: t.learning_rate,
            beta1: t.beta1,
            beta2: t.beta2,
            epsilon: t.epsilon,
            seed: self.seed,
            uncond_prob: self.guidance.uncond_prob,
            frozen: t.frozen.clone(),
            parallel,
        }
    }

    /// First 16 hex digits of the SHA-256 of the serialized config with
    /// `paths.out` cleared, so the same config maps to the same run name.
    pub fn hash(&self) -> Result<String> {
        let mut c = self.clone();
        c.paths.out = None;
        let digest = Sha256::digest(c.to_toml()?.as_bytes());
        Ok(digest.iter().take(8).map(|b| format!("{b:02x}")).collect())
    }
}
