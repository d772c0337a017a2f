//! Small synthetic datasets: moving bars in two motion classes and a blob
//! that follows a one-bone skeleton. Both are rendered as intensity
//! sequences and turned into events by the simulator.

use crate::conditioning::{rasterize_skeleton, ControlImage, Joint, RasterStyle, Skeleton2D};
use crate::error::{Error, Result};
use crate::esim::{inject_noise, save_sequence, simulate, IntensitySequence};
use crate::event::SensorModel;
use crate::frame::{encode_full, EncoderConfig, EventFrame};
use crate::pipeline::{ConditionSpec, Manifest, ManifestEntry, Split};
use crate::rng::{self, Domain, Rng};
use rand::Rng as _;
use std::path::Path;

/// Microseconds between rendered frames.
pub const FRAME_INTERVAL_US: u64 = 10_000;
const BACKGROUND: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Motion {
    /// A horizontal bar moving up or down.
    Vertical,
    /// A vertical bar moving left or right.
    Horizontal,
}

impl Motion {
    pub const ALL: [Motion; 2] = [Motion::Vertical, Motion::Horizontal];

    pub fn label(self) -> &'static str {
        match self {
            Motion::Vertical => "vertical motion",
            Motion::Horizontal => "horizontal motion",
        }
    }
}

/// A 2 px bar near the centre moving 1 px per frame for 3 frames.
pub fn moving_bar(motion: Motion, size: usize, rng: &mut Rng) -> Result<IntensitySequence> {
    if size < 8 {
        return Err(Error::InvalidArgument(format!("moving bar needs size >= 8, got {size}")));
    }
    let start = size / 2 - 2 + rng.random_range(0..=2usize);
    let dir: isize = if rng.random::<bool>() { 1 } else { -1 };
    let level = rng.random_range(0.7..0.95);
    let frames = (0..4)
        .map(|k| {
            let pos = start as isize + dir * k as isize - if dir < 0 { 1 } else { 0 };
            let img = (0..size * size)
                .map(|i| {
                    let coord = match motion {
                        Motion::Vertical => (i / size) as isize,
                        Motion::Horizontal => (i % size) as isize,
                    };
                    if coord == pos || coord == pos + 1 { level } else { BACKGROUND }
                })
                .collect();
            (k as u64 * FRAME_INTERVAL_US, img)
        })
        .collect();
    IntensitySequence::new(size, size, frames)
}

/// One-bone skeleton: joint 0 inside `[4, size - 4]`, joint 1 three pixels away.
pub fn one_bone_skeleton(size: usize, rng: &mut Rng) -> Result<Skeleton2D> {
    if size < 10 {
        return Err(Error::InvalidArgument(format!("skeleton toy needs size >= 10, got {size}")));
    }
    let lo = 4.0;
    let hi = (size - 4) as f64;
    let x = rng.random_range(lo..=hi).round();
    let y = rng.random_range(lo..=hi).round();
    let angle = rng.random_range(0.0..std::f64::consts::TAU);
    let j1 = Joint::new(x + 3.0 * angle.cos(), y + 3.0 * angle.sin());
    Skeleton2D::new(vec![Joint::new(x, y), j1], vec![(0, 1)])
}

/// Control-image style used for the skeleton toy.
pub fn skeleton_style() -> RasterStyle {
    RasterStyle { line_width: 1.5, joint_radius: 1.5 }
}

pub fn skeleton_control(sk: &Skeleton2D, size: usize) -> Result<ControlImage> {
    rasterize_skeleton(sk, size, size, &skeleton_style())
}

/// An anti-aliased disc centred on joint 0 that drifts half a pixel per frame.
pub fn skeleton_blob(sk: &Skeleton2D, size: usize, rng: &mut Rng) -> Result<IntensitySequence> {
    let j0 = sk.joints.first().ok_or(Error::Empty("skeleton joints"))?;
    let angle = rng.random_range(0.0..std::f64::consts::TAU);
    let (dx, dy) = (0.5 * angle.cos(), 0.5 * angle.sin());
    let radius = 2.0;
    let frames = (0..3)
        .map(|k| {
            let (cx, cy) = (j0.x + dx * (k as f64 - 1.0), j0.y + dy * (k as f64 - 1.0));
            let img = (0..size * size)
                .map(|i| {
                    let (px, py) = ((i % size) as f64, (i / size) as f64);
                    let d = ((px - cx).powi(2) + (py - cy).powi(2)).sqrt();
                    let cover = (radius + 0.5 - d).clamp(0.0, 1.0);
                    BACKGROUND + 0.6 * cover
                })
                .collect();
            (k as u64 * FRAME_INTERVAL_US, img)
        })
        .collect();
    IntensitySequence::new(size, size, frames)
}

/// Simulates `seq` and encodes all events into one frame.
pub fn render_events(seq: &IntensitySequence, sensor: &SensorModel, seed: u64) -> Result<EventFrame> {
    let mut stream = simulate(seq, sensor, seed)?;
    if sensor.background_rate > 0.0 {
        let (t0, t1) = (seq.frames.first().map_or(0, |f| f.0), seq.frames.last().map_or(1, |f| f.0));
        stream = inject_noise(&stream, sensor, t0, t1.max(t0 + 1), seed)?;
    }
    Ok(encode_full(&stream, &EncoderConfig::default()))
}

/// `n_per_class` event frames per motion class; item `i` draws from its own stream.
pub fn class_dataset(n_per_class: usize, size: usize, sensor: &SensorModel, seed: u64) -> Result<Vec<(EventFrame, Motion)>> {
    let mut out = Vec::with_capacity(2 * n_per_class);
    for i in 0..n_per_class {
        for (c, motion) in Motion::ALL.into_iter().enumerate() {
            let idx = (2 * i + c) as u64;
            let mut rng = rng::stream(seed, Domain::Toy, idx);
            let seq = moving_bar(motion, size, &mut rng)?;
            out.push((render_events(&seq, sensor, seed ^ idx)?, motion));
        }
    }
    Ok(out)
}

/// `n` event frames paired with the skeleton that placed them.
pub fn skeleton_dataset(n: usize, size: usize, sensor: &SensorModel, seed: u64) -> Result<Vec<(EventFrame, Skeleton2D)>> {
    (0..n)
        .map(|i| {
            let mut rng = rng::stream(seed, Domain::Toy, i as u64);
            let sk = one_bone_skeleton(size, &mut rng)?;
            let seq = skeleton_blob(&sk, size, &mut rng)?;
            Ok((render_events(&seq, sensor, seed ^ i as u64)?, sk))
        })
        .collect()
}

/// Intensity-weighted centroid `(x, y)` of a frame; `None` for an all-zero frame.
pub fn event_mass_centroid(frame: &EventFrame) -> Option<(f64, f64)> {
    let g = frame.grayscale();
    let total: f64 = g.iter().sum();
    if total <= 0.0 {
        return None;
    }
    let (mut sx, mut sy) = (0.0, 0.0);
    for (i, v) in g.iter().enumerate() {
        sx += v * (i % frame.width) as f64;
        sy += v * (i / frame.width) as f64;
    }
    Some((sx / total, sy / total))
}

/// Name of the sequence index written by the fixture writers.
pub const SEQUENCE_INDEX: &str = "sequences.tsv";

fn write_index(dir: &Path, entries: Vec<ManifestEntry>) -> Result<Manifest> {
    let m = Manifest { entries };
    m.save(dir.join(SEQUENCE_INDEX))?;
    Ok(m)
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Writes moving-bar intensity sequences and a sequence index under `dir`.
pub fn write_class_fixture(dir: impl AsRef<Path>, n_train: usize, n_eval: usize, size: usize, seed: u64) -> Result<Manifest> {
    let dir = dir.as_ref();
    create_dir(dir)?;
    let mut entries = Vec::new();
    for (split, n) in [(Split::Train, n_train), (Split::Eval, n_eval)] {
        for _ in 0..n {
            for motion in Motion::ALL {
                let idx = entries.len();
                let mut rng = rng::stream(seed, Domain::Toy, idx as u64);
                let seq = moving_bar(motion, size, &mut rng)?;
                let rel = format!("seq_{idx:04}");
                save_sequence(dir.join(&rel), &seq)?;
                entries.push(ManifestEntry { path: rel.into(), condition: ConditionSpec::Class(motion.label().into()), split });
            }
        }
    }
    write_index(dir, entries)
}

/// Writes skeleton-blob sequences, their control images and a sequence index.
pub fn write_skeleton_fixture(dir: impl AsRef<Path>, n_train: usize, n_eval: usize, size: usize, seed: u64) -> Result<Manifest> {
    let dir = dir.as_ref();
    create_dir(dir)?;
    create_dir(&dir.join("controls"))?;
    let mut entries = Vec::new();
    for (split, n) in [(Split::Train, n_train), (Split::Eval, n_eval)] {
        for _ in 0..n {
            let idx = entries.len();
            let mut rng = rng::stream(seed, Domain::Toy, idx as u64);
            let sk = one_bone_skeleton(size, &mut rng)?;
            let seq = skeleton_blob(&sk, size, &mut rng)?;
            let rel = format!("seq_{idx:04}");
            save_sequence(dir.join(&rel), &seq)?;
            let ctrl = format!("controls/skeleton_{idx:04}.ppm");
            skeleton_control(&sk, size)?.save_ppm(dir.join(&ctrl))?;
            entries.push(ManifestEntry { path: rel.into(), condition: ConditionSpec::Skeleton(ctrl.into()), split });
        }
    }
    write_index(dir, entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bar_classes_light_different_bands() {
        let data = class_dataset(4, 16, &SensorModel::default(), 1).unwrap();
        for (frame, motion) in &data {
            let g = frame.grayscale();
            let (mut row_mass, mut col_mass) = (vec![0.0; 16], vec![0.0; 16]);
            for (i, v) in g.iter().enumerate() {
                row_mass[i / 16] += v;
                col_mass[i % 16] += v;
            }
            let lit = |m: &[f64]| m.iter().filter(|&&v| v > 1e-9).count();
            match motion {
                Motion::Vertical => assert!(lit(&row_mass) <= 5 && lit(&col_mass) == 16),
                Motion::Horizontal => assert!(lit(&col_mass) <= 5 && lit(&row_mass) == 16),
            }
        }
    }

    #[test]
    fn blob_events_centre_on_joint() {
        for (frame, sk) in skeleton_dataset(10, 16, &SensorModel::default(), 4).unwrap() {
            let (cx, cy) = event_mass_centroid(&frame).unwrap();
            let j = sk.joints[0];
            assert!(((cx - j.x).powi(2) + (cy - j.y).powi(2)).sqrt() < 1.5, "{cx},{cy} vs {j:?}");
        }
    }

    #[test]
    fn datasets_are_deterministic() {
        let s = SensorModel { threshold_sigma: 0.02, background_rate: 2.0, ..SensorModel::default() };
        assert_eq!(class_dataset(2, 16, &s, 9).unwrap(), class_dataset(2, 16, &s, 9).unwrap());
    }

    #[test]
    fn centroid_of_blank_frame_is_none() {
        assert!(event_mass_centroid(&EventFrame::blank(4, 4, crate::frame::Encoding::Full)).is_none());
    }

    #[test]
    fn fixtures_write_index() {
        let dir = tempfile::tempdir().unwrap();
        let m = write_class_fixture(dir.path(), 2, 1, 16, 3).unwrap();
        assert_eq!(m.entries.len(), 6);
        m.validate(dir.path()).unwrap();
        let m = write_skeleton_fixture(dir.path().join("sk"), 2, 1, 16, 3).unwrap();
        assert_eq!(m.split(Split::Eval).count(), 1);
        m.validate(&dir.path().join("sk")).unwrap();
    }
}
