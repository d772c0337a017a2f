//! Condition signals: class prompts, skeleton maps and body normal maps.

mod control;
mod normal;
mod skeleton;

pub use control::{load_control_image, resize_bilinear, ControlImage};
pub use normal::{capsule_normal_map, capsule_normals, Capsule, CapsuleBody, Intrinsics};
pub use skeleton::{
    default_bones, load_skeletons, parse_bones, rasterize_skeleton, read_bones, Joint, RasterStyle, Skeleton2D,
};

use crate::error::{Error, Result};

/// Prompt used for every pose-conditioned frame.
pub const POSE_PROMPT: &str = "A moving human";

/// Embedding size used by [`nearest_label`].
pub const LABEL_EMBED_DIM: usize = 512;

/// The condition `c` fed to the noise predictor.
#[derive(Debug, Clone, PartialEq)]
pub enum Condition {
    ClassText { prompt: String, embedding: Vec<f64> },
    /// Skeleton control image plus the constant pose prompt embedding.
    Skeleton { control: ControlImage, embedding: Vec<f64> },
    /// Normal-map control image plus the constant pose prompt embedding.
    NormalMap { control: ControlImage, embedding: Vec<f64> },
    Unconditional,
}

impl Condition {
    /// Formats `label` into a class prompt and embeds it.
    pub fn class_text(label: &str, dim: usize) -> Result<Self> {
        let prompt = format_class_prompt(label)?;
        let embedding = embed_text(&prompt, dim)?;
        Ok(Condition::ClassText { prompt, embedding })
    }

    pub fn skeleton(control: ControlImage, dim: usize) -> Result<Self> {
        Ok(Condition::Skeleton { control, embedding: embed_text(POSE_PROMPT, dim)? })
    }

    pub fn normal_map(control: ControlImage, dim: usize) -> Result<Self> {
        Ok(Condition::NormalMap { control, embedding: embed_text(POSE_PROMPT, dim)? })
    }

    pub fn embedding(&self) -> Option<&[f64]> {
        match self {
            Condition::ClassText { embedding, .. }
            | Condition::Skeleton { embedding, .. }
            | Condition::NormalMap { embedding, .. } => Some(embedding),
            Condition::Unconditional => None,
        }
    }

    pub fn control(&self) -> Option<&ControlImage> {
        match self {
            Condition::Skeleton { control, .. } | Condition::NormalMap { control, .. } => Some(control),
            _ => None,
        }
    }

    pub fn is_unconditional(&self) -> bool {
        matches!(self, Condition::Unconditional)
    }
}

/// `"A photo of " + label`. Not idempotent: formatting a prompt prefixes it again.
pub fn format_class_prompt(label: &str) -> Result<String> {
    if label.is_empty() {
        return Err(Error::InvalidArgument("class label must be non-empty".into()));
    }
    Ok(format!("A photo of {label}"))
}

/// Lowercased alphanumeric runs.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// FNV-1a over the bytes, followed by the SplitMix64 finalizer.
pub fn token_hash(token: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in token.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h ^= h >> 30;
    h = h.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h ^= h >> 27;
    h = h.wrapping_mul(0x94d0_49bb_1331_11eb);
    h ^ (h >> 31)
}

/// Signed feature hashing of the token bag into `dim` buckets, scaled to
/// unit length. Token order is irrelevant. A prompt without tokens (or whose
/// tokens cancel exactly) maps to the zero vector.
pub fn embed_text(prompt: &str, dim: usize) -> Result<Vec<f64>> {
    if dim == 0 {
        return Err(Error::InvalidArgument("embedding dimension must be >= 1".into()));
    }
    let mut v = vec![0.0; dim];
    for token in tokenize(prompt) {
        let h = token_hash(&token);
        let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
        v[(h % dim as u64) as usize] += sign;
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    Ok(v)
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// The seen label most similar to `query`, ties going to the earliest entry.
pub fn nearest_label<'a>(query: &str, labels: &'a [String]) -> Result<(&'a str, f64)> {
    nearest_label_with_dim(query, labels, LABEL_EMBED_DIM)
}

pub fn nearest_label_with_dim<'a>(query: &str, labels: &'a [String], dim: usize) -> Result<(&'a str, f64)> {
    if labels.is_empty() {
        return Err(Error::Empty("label list"));
    }
    let q = embed_text(query, dim)?;
    let mut best: Option<(&str, f64)> = None;
    for label in labels {
        let sim = cosine_similarity(&q, &embed_text(label, dim)?);
        if best.is_none_or(|(_, s)| sim > s) {
            best = Some((label, sim));
        }
    }
    Ok(best.expect("non-empty"))
}
