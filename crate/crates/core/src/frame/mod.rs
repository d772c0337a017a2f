//! Event streams to three-channel histogram frames.
//!
//! Positive events accumulate in channel 0 (red), negative events in channel 2
//! (blue); channel 1 stays empty for signed streams. A per-pixel count `c`
//! maps to intensity `min(c, count_cap) / count_cap`.

mod pixmap;

pub use pixmap::{
    decode_pixmap, load_frame, read_pixmap, read_ppm, save_frame, write_ppm, FrameMeta, Pixmap,
};
pub(crate) use pixmap::write_rgb_ppm;

use crate::error::{Error, Result};
use crate::event::{EventStream, Polarity};
use crate::tensor::Tensor;

pub const CHANNELS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Encoding {
    FixedCount(usize),
    FixedInterval(u64),
    Full,
    Mono,
    /// Produced by the diffusion sampler rather than from events.
    Generated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceWindow {
    /// Half-open `[start, end)` in microseconds.
    Time { start: u64, end: u64 },
    /// Half-open `[start, end)` event indices.
    Index { start: usize, end: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameMode {
    Signed,
    Mono,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncoderConfig {
    pub count_cap: u32,
    pub polarity_mode: FrameMode,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self { count_cap: 3, polarity_mode: FrameMode::Signed }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.count_cap == 0 {
            return Err(Error::InvalidArgument("count_cap must be >= 1".into()));
        }
        Ok(())
    }
}

/// A `3 x height x width` image with intensities in `[0, 1]`, channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EventFrame {
    pub width: usize,
    pub height: usize,
    data: Vec<f64>,
    pub encoding: Encoding,
    pub source_window: Option<SourceWindow>,
}

impl EventFrame {
    pub fn blank(width: usize, height: usize, encoding: Encoding) -> Self {
        Self { width, height, data: vec![0.0; CHANNELS * width * height], encoding, source_window: None }
    }

    /// Values outside `[0, 1]` are clamped.
    pub fn from_data(width: usize, height: usize, data: Vec<f64>, encoding: Encoding) -> Result<Self> {
        if data.len() != CHANNELS * width * height {
            return Err(Error::ShapeMismatch { expected: vec![CHANNELS, height, width], got: vec![data.len()] });
        }
        let data = data.into_iter().map(|v| if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) }).collect();
        Ok(Self { width, height, data, encoding, source_window: None })
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.width * self.height;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn get(&self, c: usize, x: usize, y: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    /// Mean over channels, row-major.
    pub fn grayscale(&self) -> Vec<f64> {
        let n = self.width * self.height;
        (0..n).map(|i| (self.data[i] + self.data[n + i] + self.data[2 * n + i]) / 3.0).collect()
    }

    /// Maps `[0, 1]` to the `[-1, 1]` range the diffusion model works in.
    pub fn to_model_tensor(&self) -> Tensor {
        Tensor::from_vec(&[CHANNELS, self.height, self.width], self.data.iter().map(|v| 2.0 * v - 1.0).collect())
            .expect("frame shape")
    }

    /// Inverse of [`EventFrame::to_model_tensor`]; clamps to `[0, 1]`.
    pub fn from_model_tensor(t: &Tensor) -> Result<Self> {
        let shape = t.shape();
        if shape.len() != 3 || shape[0] != CHANNELS {
            return Err(Error::ShapeMismatch { expected: vec![CHANNELS, 0, 0], got: shape.to_vec() });
        }
        let data = t.data().iter().map(|v| (v + 1.0) / 2.0).collect();
        EventFrame::from_data(shape[2], shape[1], data, Encoding::Generated)
    }

    /// White-background display variant: positive events red, negative blue,
    /// and polarity-free frames blue.
    pub fn preview(&self) -> EventFrame {
        let n = self.width * self.height;
        let mut out = vec![1.0; CHANNELS * n];
        let mono = self.encoding == Encoding::Mono
            || (self.channel(0) == self.channel(2) && self.channel(0) == self.channel(1));
        for i in 0..n {
            if mono {
                let v = self.data[i];
                out[i] = 1.0 - v;
                out[n + i] = 1.0 - v;
            } else {
                let (pos, neg) = (self.data[i], self.data[2 * n + i]);
                out[i] = 1.0 - neg;
                out[n + i] = 1.0 - pos.max(neg);
                out[2 * n + i] = 1.0 - pos;
            }
        }
        EventFrame { width: self.width, height: self.height, data: out, encoding: self.encoding, source_window: self.source_window }
    }
}

/// Raw per-pixel event counts, before saturation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountImage {
    pub width: usize,
    pub height: usize,
    pub positive: Vec<u32>,
    pub negative: Vec<u32>,
    /// Events without polarity.
    pub unsigned: Vec<u32>,
}

impl CountImage {
    pub fn accumulate(stream: &EventStream) -> Self {
        let (w, h) = (stream.width as usize, stream.height as usize);
        let mut c = CountImage { width: w, height: h, positive: vec![0; w * h], negative: vec![0; w * h], unsigned: vec![0; w * h] };
        for e in &stream.events {
            let (x, y) = (e.x as usize, e.y as usize);
            if x >= w || y >= h {
                continue;
            }
            let i = y * w + x;
            match e.polarity {
                Polarity::Positive => c.positive[i] += 1,
                Polarity::Negative => c.negative[i] += 1,
                Polarity::None => c.unsigned[i] += 1,
            }
        }
        c
    }

    pub fn total(&self, i: usize) -> u32 {
        self.positive[i] + self.negative[i] + self.unsigned[i]
    }

    fn render(&self, cfg: &EncoderConfig, encoding: Encoding) -> EventFrame {
        let n = self.width * self.height;
        let cap = cfg.count_cap.max(1);
        let level = |c: u32| c.min(cap) as f64 / cap as f64;
        let mut data = vec![0.0; CHANNELS * n];
        let mono = cfg.polarity_mode == FrameMode::Mono || encoding == Encoding::Mono;
        for i in 0..n {
            if mono {
                let v = level(self.total(i));
                data[i] = v;
                data[n + i] = v;
                data[2 * n + i] = v;
            } else {
                let u = self.unsigned[i];
                data[i] = level(self.positive[i] + u);
                data[n + i] = level(u);
                data[2 * n + i] = level(self.negative[i] + u);
            }
        }
        EventFrame { width: self.width, height: self.height, data, encoding, source_window: None }
    }
}

/// All events in one frame. Polarity-free events, if present in a signed
/// encoding, light every channel.
pub fn encode_full(stream: &EventStream, cfg: &EncoderConfig) -> EventFrame {
    let mut frame = CountImage::accumulate(stream).render(cfg, Encoding::Full);
    frame.source_window = Some(SourceWindow::Index { start: 0, end: stream.len() });
    frame
}

/// White-on-black occupancy: all three channels carry the same count image.
pub fn render_mono(stream: &EventStream, cfg: &EncoderConfig) -> EventFrame {
    let mut frame = CountImage::accumulate(stream).render(cfg, Encoding::Mono);
    frame.source_window = Some(SourceWindow::Index { start: 0, end: stream.len() });
    frame
}

/// `floor(len / n)` frames of exactly `n` consecutive events; the remainder is dropped.
pub fn encode_fixed_count(stream: &EventStream, n: usize, cfg: &EncoderConfig) -> Result<Vec<EventFrame>> {
    if n == 0 {
        return Err(Error::InvalidArgument("fixed-count window must hold at least one event".into()));
    }
    let frames = (0..stream.len() / n)
        .map(|k| {
            let slice = stream.slice_by_count(k * n, n)?;
            let mut frame = CountImage::accumulate(&slice).render(cfg, Encoding::FixedCount(n));
            frame.source_window = Some(SourceWindow::Index { start: k * n, end: (k + 1) * n });
            Ok(frame)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(frames)
}

/// Consecutive half-open windows of `dt` microseconds starting at the first
/// event and continuing through the last one. Empty windows give blank frames.
pub fn encode_fixed_interval(stream: &EventStream, dt: u64, cfg: &EncoderConfig) -> Result<Vec<EventFrame>> {
    if dt == 0 {
        return Err(Error::InvalidArgument("fixed-interval window must be >= 1 us".into()));
    }
    let Some((first, last)) = stream.time_range() else {
        return Ok(Vec::new());
    };
    let windows = (last - first) / dt + 1;
    let mut frames = Vec::with_capacity(windows as usize);
    let mut lo = 0;
    for k in 0..windows {
        let (start, end) = (first + k * dt, first + (k + 1) * dt);
        let hi = lo + stream.events[lo..].partition_point(|e| e.t < end);
        let slice = EventStream::with_events(stream.width, stream.height, stream.polarity_mode, stream.events[lo..hi].to_vec());
        let mut frame = CountImage::accumulate(&slice).render(cfg, Encoding::FixedInterval(dt));
        frame.source_window = Some(SourceWindow::Time { start, end });
        frames.push(frame);
        lo = hi;
    }
    Ok(frames)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::{Event, PolarityMode};

    fn stream(events: Vec<Event>) -> EventStream {
        EventStream::with_events(8, 8, PolarityMode::Signed, events)
    }

    #[test]
    fn empty_full_frame_is_black() {
        let f = encode_full(&stream(vec![]), &EncoderConfig::default());
        assert!(f.data().iter().all(|&v| v == 0.0));
        assert!(render_mono(&stream(vec![]), &EncoderConfig::default()).data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_positive_event() {
        let f = encode_full(&stream(vec![Event::new(3, 4, 0, Polarity::Positive)]), &EncoderConfig::default());
        assert_eq!(f.get(0, 3, 4), 1.0 / 3.0);
        let lit = f.data().iter().filter(|&&v| v != 0.0).count();
        assert_eq!(lit, 1);
        assert!(f.channel(1).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn negative_goes_blue_and_saturates() {
        let events = (0..5).map(|t| Event::new(1, 1, t, Polarity::Negative)).collect();
        let f = encode_full(&stream(events), &EncoderConfig::default());
        assert_eq!(f.get(2, 1, 1), 1.0);
        assert_eq!(f.get(0, 1, 1), 0.0);
    }

    #[test]
    fn mono_single_white_pixel() {
        let cfg = EncoderConfig { count_cap: 1, polarity_mode: FrameMode::Signed };
        let f = render_mono(&stream(vec![Event::new(0, 0, 0, Polarity::Negative)]), &cfg);
        assert_eq!((f.get(0, 0, 0), f.get(1, 0, 0), f.get(2, 0, 0)), (1.0, 1.0, 1.0));
        assert_eq!(f.encoding, Encoding::Mono);
    }

    #[test]
    fn fixed_count_drops_remainder() {
        let events: Vec<_> = (0..15_000).map(|t| Event::new((t % 8) as u16, 0, t, Polarity::Positive)).collect();
        let s = stream(events);
        let frames = encode_fixed_count(&s, 7_500, &EncoderConfig::default()).unwrap();
        assert_eq!(frames.len(), 2);
        assert_eq!(frames[1].source_window, Some(SourceWindow::Index { start: 7_500, end: 15_000 }));
        let short = s.slice_by_count(0, 7_499).unwrap();
        assert!(encode_fixed_count(&short, 7_500, &EncoderConfig::default()).unwrap().is_empty());
        assert!(encode_fixed_count(&s, 0, &EncoderConfig::default()).is_err());
    }

    #[test]
    fn fixed_interval_windows_start_at_first_event() {
        let events = [0u64, 8_000, 9_000].iter().map(|&t| Event::new(2, 2, t, Polarity::Positive)).collect();
        let cfg = EncoderConfig::default();
        let frames = encode_fixed_interval(&stream(events), 8_333, &cfg).unwrap();
        assert_eq!(frames.len(), 2);
        // [0, 8333) holds t = 0 and 8000; [8333, 16666) holds t = 9000.
        assert_eq!(frames[0].get(0, 2, 2), 2.0 / 3.0);
        assert_eq!(frames[1].get(0, 2, 2), 1.0 / 3.0);
        assert_eq!(frames[1].source_window, Some(SourceWindow::Time { start: 8_333, end: 16_666 }));
    }

    #[test]
    fn fixed_interval_single_event_and_gaps() {
        let cfg = EncoderConfig::default();
        let one = stream(vec![Event::new(0, 0, 123, Polarity::Positive)]);
        assert_eq!(encode_fixed_interval(&one, 15_000, &cfg).unwrap().len(), 1);
        let gap = stream(vec![Event::new(0, 0, 0, Polarity::Positive), Event::new(0, 0, 30, Polarity::Positive)]);
        let frames = encode_fixed_interval(&gap, 10, &cfg).unwrap();
        assert_eq!(frames.len(), 4);
        assert!(frames[1].data().iter().all(|&v| v == 0.0));
        assert!(frames[2].data().iter().all(|&v| v == 0.0));
        assert!(encode_fixed_interval(&stream(vec![]), 10, &cfg).unwrap().is_empty());
    }

    #[test]
    fn model_tensor_mapping() {
        let f = encode_full(&stream(vec![Event::new(3, 4, 0, Polarity::Positive)]), &EncoderConfig { count_cap: 1, ..Default::default() });
        let t = f.to_model_tensor();
        assert_eq!(t.shape(), &[3, 8, 8]);
        assert_eq!(t.data()[4 * 8 + 3], 1.0);
        assert_eq!(t.data()[0], -1.0);
        let back = EventFrame::from_model_tensor(&t.map(|v| v * 1.5)).unwrap();
        assert_eq!(back.data(), f.data());
    }

    #[test]
    fn preview_colours() {
        let cfg = EncoderConfig { count_cap: 1, ..Default::default() };
        let f = encode_full(
            &stream(vec![Event::new(0, 0, 0, Polarity::Positive), Event::new(1, 0, 0, Polarity::Negative)]),
            &cfg,
        );
        let p = f.preview();
        assert_eq!((p.get(0, 0, 0), p.get(1, 0, 0), p.get(2, 0, 0)), (1.0, 0.0, 0.0));
        assert_eq!((p.get(0, 1, 0), p.get(1, 1, 0), p.get(2, 1, 0)), (0.0, 0.0, 1.0));
        assert_eq!((p.get(0, 5, 5), p.get(1, 5, 5), p.get(2, 5, 5)), (1.0, 1.0, 1.0));
    }
}
