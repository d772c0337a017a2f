//! Frame-based event simulation.
//!
//! Each pixel keeps a reference log level. Between two intensity frames the
//! log brightness `ln(I + eps)` is interpolated linearly in time, and every
//! time it moves a full per-pixel threshold `C_p` away from the reference an
//! event fires and the reference steps by `±C_p`. Background activity is
//! added separately as per-pixel Poisson noise.

use crate::error::{Error, Result};
use crate::event::{Event, EventStream, Polarity, PolarityMode, SensorModel};
use crate::frame::read_pixmap;
use crate::rng::{self, Domain};
use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;
use std::fs;
use std::path::Path;

/// Log differences within this distance of a threshold count as crossing it.
pub const CROSSING_TOLERANCE: f64 = 1e-9;

/// Timestamped grayscale frames with intensities in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensitySequence {
    pub width: usize,
    pub height: usize,
    pub frames: Vec<(u64, Vec<f64>)>,
}

impl IntensitySequence {
    pub fn new(width: usize, height: usize, frames: Vec<(u64, Vec<f64>)>) -> Result<Self> {
        let seq = Self { width, height, frames };
        seq.validate()?;
        Ok(seq)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 || self.width > u16::MAX as usize || self.height > u16::MAX as usize {
            return Err(Error::InvalidArgument(format!("bad sensor size {}x{}", self.width, self.height)));
        }
        let n = self.width * self.height;
        for (k, (t, img)) in self.frames.iter().enumerate() {
            if img.len() != n {
                return Err(Error::ShapeMismatch { expected: vec![self.height, self.width], got: vec![img.len()] });
            }
            if img.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::InvalidArgument(format!("frame {k} has intensities outside [0, 1]")));
            }
            if k > 0 && *t <= self.frames[k - 1].0 {
                return Err(Error::InvalidArgument(format!("frame {k} timestamp not strictly increasing")));
            }
        }
        Ok(())
    }
}

/// Per-pixel simulator state.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelState {
    pub reference: Vec<f64>,
    pub thresholds: Vec<f64>,
}

/// Draws `C_p ~ Normal(C, sigma^2)` per pixel, truncated below at `C / 10`.
/// Pixel `i` uses its own random stream, so the map does not depend on
/// evaluation order.
pub fn sample_thresholds(sensor: &SensorModel, width: usize, height: usize, seed: u64) -> Result<PixelState> {
    sensor.validate()?;
    let c = sensor.contrast_threshold;
    let n = width * height;
    let thresholds = if sensor.threshold_sigma == 0.0 {
        vec![c; n]
    } else {
        let normal = Normal::new(c, sensor.threshold_sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        (0..n)
            .map(|i| {
                let mut rng = rng::stream(seed, Domain::Thresholds, i as u64);
                loop {
                    let v = normal.sample(&mut rng);
                    if v >= c / 10.0 {
                        break v;
                    }
                }
            })
            .collect()
    };
    Ok(PixelState { reference: vec![0.0; n], thresholds })
}

fn round_us(v: f64) -> u64 {
    (v + 0.5).floor().max(0.0) as u64
}

/// Events for one pixel as `(timestamp, polarity)`, given its log levels per frame.
/// Updates `reference` in place.
pub fn simulate_pixel(times: &[u64], levels: &[f64], threshold: f64, reference: &mut f64) -> Vec<(u64, Polarity)> {
    let mut out = Vec::new();
    for k in 1..levels.len() {
        let (l0, l1) = (levels[k - 1], levels[k]);
        let (t0, t1) = (times[k - 1] as f64, times[k] as f64);
        let span = l1 - l0;
        let mut emit = |level: f64, polarity: Polarity| {
            let frac = if span == 0.0 { 1.0 } else { ((level - l0) / span).clamp(0.0, 1.0) };
            out.push((round_us(t0 + frac * (t1 - t0)), polarity));
        };
        while l1 - *reference >= threshold - CROSSING_TOLERANCE {
            *reference += threshold;
            emit(*reference, Polarity::Positive);
        }
        while *reference - l1 >= threshold - CROSSING_TOLERANCE {
            *reference -= threshold;
            emit(*reference, Polarity::Negative);
        }
    }
    out
}

fn simulate_impl(seq: &IntensitySequence, sensor: &SensorModel, seed: u64, parallel: bool) -> Result<EventStream> {
    seq.validate()?;
    sensor.validate()?;
    if seq.frames.len() < 2 {
        return Err(Error::InvalidArgument("simulation needs at least two frames".into()));
    }
    let state = sample_thresholds(sensor, seq.width, seq.height, seed)?;
    let times: Vec<u64> = seq.frames.iter().map(|(t, _)| *t).collect();
    let eps = sensor.log_epsilon;
    let run = |i: usize| {
        let levels: Vec<f64> = seq.frames.iter().map(|(_, img)| (img[i] + eps).ln()).collect();
        let mut reference = levels[0];
        simulate_pixel(&times, &levels, state.thresholds[i], &mut reference)
    };
    let n = seq.width * seq.height;
    let per_pixel: Vec<Vec<(u64, Polarity)>> =
        if parallel { (0..n).into_par_iter().map(run).collect() } else { (0..n).map(run).collect() };
    let mut events: Vec<Event> = per_pixel
        .into_iter()
        .enumerate()
        .flat_map(|(i, evs)| {
            let (x, y) = ((i % seq.width) as u16, (i / seq.width) as u16);
            evs.into_iter().map(move |(t, p)| Event::new(x, y, t, p))
        })
        .collect();
    events.sort_by_key(|e| e.t);
    Ok(EventStream::with_events(seq.width as u16, seq.height as u16, PolarityMode::Signed, events))
}

/// Simulates a signed event stream. Deterministic given `seed`; ties in
/// timestamp are ordered by pixel index (row-major).
pub fn simulate(seq: &IntensitySequence, sensor: &SensorModel, seed: u64) -> Result<EventStream> {
    simulate_impl(seq, sensor, seed, false)
}

/// Same result as [`simulate`], with pixels processed on the rayon pool.
pub fn simulate_parallel(seq: &IntensitySequence, sensor: &SensorModel, seed: u64) -> Result<EventStream> {
    simulate_impl(seq, sensor, seed, true)
}

/// Adds Poisson background activity over `[t0, t1)` at `sensor.background_rate`
/// events per pixel per second, with uniformly random polarity (none for
/// polarity-free streams). Existing events keep their relative order and come
/// first among equal timestamps.
pub fn inject_noise(stream: &EventStream, sensor: &SensorModel, t0: u64, t1: u64, seed: u64) -> Result<EventStream> {
    sensor.validate()?;
    if t0 >= t1 {
        return Err(Error::InvalidInterval { t0, t1 });
    }
    let lambda = sensor.background_rate * (t1 - t0) as f64 * 1e-6;
    if lambda == 0.0 {
        return Ok(stream.clone());
    }
    let poisson = Poisson::new(lambda).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let (w, h) = (stream.width as usize, stream.height as usize);
    let mut events = stream.events.clone();
    for i in 0..w * h {
        let mut rng = rng::stream(seed, Domain::Noise, i as u64);
        let count = poisson.sample(&mut rng) as u64;
        for _ in 0..count {
            let t = rng.random_range(t0..t1);
            let polarity = match stream.polarity_mode {
                PolarityMode::None => Polarity::None,
                PolarityMode::Signed if rng.random_bool(0.5) => Polarity::Positive,
                PolarityMode::Signed => Polarity::Negative,
            };
            events.push(Event::new((i % w) as u16, (i / w) as u16, t, polarity));
        }
    }
    events.sort_by_key(|e| e.t);
    Ok(EventStream::with_events(stream.width, stream.height, stream.polarity_mode, events))
}

/// Name of the timestamp manifest inside a sequence directory.
pub const TIMESTAMPS_FILE: &str = "timestamps.txt";

/// Loads `dir/timestamps.txt` (lines `<pixmap file> <t_us>`, `#` comments) and
/// the pixmaps it names; RGB frames are averaged to grayscale.
pub fn load_sequence(dir: impl AsRef<Path>) -> Result<IntensitySequence> {
    let dir = dir.as_ref();
    let manifest = dir.join(TIMESTAMPS_FILE);
    let text = fs::read_to_string(&manifest).map_err(|e| Error::io(&manifest, e))?;
    let mut frames = Vec::new();
    let (mut width, mut height) = (0, 0);
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let (Some(file), Some(t), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::format(manifest.display().to_string(), format!("line {}: expected `<file> <t_us>`", lineno + 1)));
        };
        let t: u64 = t
            .parse()
            .map_err(|_| Error::format(manifest.display().to_string(), format!("line {}: bad timestamp", lineno + 1)))?;
        let pix = read_pixmap(dir.join(file))?;
        if frames.is_empty() {
            (width, height) = (pix.width, pix.height);
        } else if (pix.width, pix.height) != (width, height) {
            return Err(Error::format(file.to_string(), "frame size differs from first frame"));
        }
        let n = width * height;
        let gray = (0..n).map(|i| (pix.planes[i] + pix.planes[n + i] + pix.planes[2 * n + i]) / 3.0).collect();
        frames.push((t, gray));
    }
    IntensitySequence::new(width, height, frames)
}

/// Writes a sequence as `frame_NNNN.ppm` files plus the timestamp manifest.
pub fn save_sequence(dir: impl AsRef<Path>, seq: &IntensitySequence) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut manifest = String::new();
    for (k, (t, img)) in seq.frames.iter().enumerate() {
        let name = format!("frame_{k:04}.ppm");
        let planes: Vec<f64> = img.iter().chain(img).chain(img).copied().collect();
        let mut bytes = Vec::new();
        crate::frame::write_rgb_ppm(&mut bytes, seq.width, seq.height, &planes).expect("in-memory write");
        let path = dir.join(&name);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        manifest.push_str(&format!("{name} {t}\n"));
    }
    let path = dir.join(TIMESTAMPS_FILE);
    fs::write(&path, manifest).map_err(|e| Error::io(&path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sensor(c: f64) -> SensorModel {
        SensorModel::ideal(c)
    }

    /// Intensity whose log (with eps) is `level`.
    fn intensity(level: f64, eps: f64) -> f64 {
        level.exp() - eps
    }

    #[test]
    fn constant_sequence_is_silent() {
        let seq = IntensitySequence::new(4, 4, vec![(0, vec![0.5; 16]), (1000, vec![0.5; 16]), (2000, vec![0.5; 16])]).unwrap();
        assert!(simulate(&seq, &sensor(0.2), 1).unwrap().is_empty());
    }

    #[test]
    fn two_and_a_half_thresholds_give_two_events() {
        let c = 0.2;
        let eps = 1e-3;
        let base = (0.1f64 + eps).ln();
        let mut f1 = vec![0.1; 4];
        f1[2] = intensity(base + 2.5 * c, eps);
        let seq = IntensitySequence::new(2, 2, vec![(0, vec![0.1; 4]), (1000, f1)]).unwrap();
        let s = simulate(&seq, &sensor(c), 0).unwrap();
        assert_eq!(s.len(), 2);
        assert!(s.events.iter().all(|e| (e.x, e.y, e.polarity) == (0, 1, Polarity::Positive)));
        // Crossings at 1/2.5 and 2/2.5 of the interval.
        assert_eq!(s.events[0].t, 400);
        assert_eq!(s.events[1].t, 800);
    }

    #[test]
    fn excursion_returns_reference() {
        let c = 0.25;
        let levels = [0.0, 3.0 * c, 0.0];
        let mut reference = 0.0;
        let evs = simulate_pixel(&[0, 100, 200], &levels, c, &mut reference);
        let pols: Vec<Polarity> = evs.iter().map(|e| e.1).collect();
        assert_eq!(pols, [[Polarity::Positive; 3], [Polarity::Negative; 3]].concat());
        assert!(reference.abs() < 1e-12);
    }

    #[test]
    fn rejects_short_sequences() {
        let seq = IntensitySequence::new(1, 1, vec![(0, vec![0.5])]).unwrap();
        assert!(simulate(&seq, &sensor(0.2), 0).is_err());
        assert!(IntensitySequence::new(1, 1, vec![(5, vec![0.5]), (5, vec![0.5])]).is_err());
        assert!(IntensitySequence::new(1, 1, vec![(5, vec![1.5])]).is_err());
    }

    #[test]
    fn uniform_thresholds_without_jitter() {
        let state = sample_thresholds(&sensor(0.3), 8, 8, 5).unwrap();
        assert!(state.thresholds.iter().all(|&c| c == 0.3));
    }

    #[test]
    fn thresholds_respect_truncation() {
        let s = SensorModel { threshold_sigma: 1.0, ..sensor(0.2) };
        let state = sample_thresholds(&s, 32, 32, 9).unwrap();
        assert!(state.thresholds.iter().all(|&c| c >= 0.02));
    }

    #[test]
    fn zero_rate_noise_is_identity() {
        let s = EventStream::with_events(4, 4, PolarityMode::Signed, vec![Event::new(1, 1, 5, Polarity::Positive)]);
        assert_eq!(inject_noise(&s, &sensor(0.2), 0, 1_000_000, 3).unwrap(), s);
        assert!(inject_noise(&s, &sensor(0.2), 10, 10, 3).is_err());
    }

    #[test]
    fn noise_on_polarity_free_stream() {
        let s = EventStream::new(4, 4, PolarityMode::None);
        let sm = SensorModel { background_rate: 100.0, ..sensor(0.2) };
        let out = inject_noise(&s, &sm, 0, 1_000_000, 3).unwrap();
        assert!(!out.is_empty());
        assert!(out.validate().is_ok());
    }
}
