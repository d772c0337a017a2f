//! Event-camera data synthesis toolkit.
//!
//! The crate covers the whole loop at desk scale:
//!
//! - [`event`]: events, streams, sensor parameters and the binary stream format.
//! - [`frame`]: accumulation of streams into three-channel histogram frames.
//! - [`esim`]: a contrast-threshold simulator with threshold jitter and background noise.
//! - [`ddpm`]: noise schedules, forward noising, the training objective and ancestral sampling.
//! - [`denoiser`]: a small convolutional noise predictor with hand-written gradients.
//! - [`conditioning`]: class prompts, text embeddings, skeleton maps and normal maps.
//! - [`metrics`]: FID, pose errors, PCK/AUC and classification scores.
//! - [`pipeline`]: config-driven simulate / encode / train / sample / evaluate stages.

pub mod conditioning;
pub mod ddpm;
pub mod denoiser;
pub mod error;
pub mod esim;
pub mod event;
pub mod frame;
pub mod metrics;
pub mod pipeline;
pub mod rng;
pub mod tensor;
pub mod toy;

pub use error::{Error, Result};
pub use tensor::Tensor;
