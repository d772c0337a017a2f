//! Portable pixmap I/O and the plain-text frame sidecar.
//!
//! Frames are written as binary P6 with max value 255; a value `v` in `[0, 1]`
//! is stored as `floor(255 v + 0.5)`. The reader also accepts P5 and P3 input.

use super::{Encoding, EventFrame, SourceWindow, CHANNELS};
use crate::error::{Error, Result};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

pub(crate) fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
}

/// Writes planar `[0,1]` channels as interleaved 8-bit RGB.
pub(crate) fn write_rgb_ppm<W: Write>(mut w: W, width: usize, height: usize, planes: &[f64]) -> std::io::Result<()> {
    let n = width * height;
    write!(w, "P6\n{width} {height}\n255\n")?;
    let mut bytes = Vec::with_capacity(3 * n);
    for i in 0..n {
        for c in 0..CHANNELS {
            bytes.push(quantize(planes[c * n + i]));
        }
    }
    w.write_all(&bytes)
}

pub fn write_ppm<W: Write>(w: W, frame: &EventFrame) -> std::io::Result<()> {
    write_rgb_ppm(w, frame.width, frame.height, frame.data())
}

/// A decoded pixmap as planar RGB in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pixmap {
    pub width: usize,
    pub height: usize,
    pub planes: Vec<f64>,
}

struct Tokens<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Tokens<'_> {
    fn next_token(&mut self) -> Option<&[u8]> {
        loop {
            while self.pos < self.buf.len() && self.buf[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            if self.pos < self.buf.len() && self.buf[self.pos] == b'#' {
                while self.pos < self.buf.len() && self.buf[self.pos] != b'\n' {
                    self.pos += 1;
                }
                continue;
            }
            break;
        }
        let start = self.pos;
        while self.pos < self.buf.len() && !self.buf[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        (self.pos > start).then(|| &self.buf[start..self.pos])
    }

    fn number(&mut self) -> Result<usize> {
        self.next_token()
            .and_then(|t| std::str::from_utf8(t).ok()?.parse().ok())
            .ok_or_else(|| Error::format("pixmap", "bad header number"))
    }
}

pub fn decode_pixmap(buf: &[u8]) -> Result<Pixmap> {
    let mut tok = Tokens { buf, pos: 0 };
    let magic = tok.next_token().ok_or_else(|| Error::format("pixmap", "empty file"))?.to_vec();
    let (width, height, maxval) = (tok.number()?, tok.number()?, tok.number()?);
    if width == 0 || height == 0 {
        return Err(Error::format("pixmap", "zero dimension"));
    }
    if maxval == 0 || maxval > 255 {
        return Err(Error::format("pixmap", format!("unsupported max value {maxval}")));
    }
    let n = width * height;
    let scale = maxval as f64;
    let samples: Vec<u8> = match magic.as_slice() {
        b"P6" | b"P5" => {
            let per = if magic == b"P6" { 3 } else { 1 };
            let start = tok.pos + 1;
            let end = start + per * n;
            if buf.len() < end {
                return Err(Error::format("pixmap", "truncated raster"));
            }
            buf[start..end].to_vec()
        }
        b"P3" => (0..3 * n)
            .map(|_| tok.number().and_then(|v| u8::try_from(v).map_err(|_| Error::format("pixmap", "sample too large"))))
            .collect::<Result<_>>()?,
        _ => return Err(Error::format("pixmap", "unsupported magic")),
    };
    let per = samples.len() / n;
    let mut planes = vec![0.0; CHANNELS * n];
    for i in 0..n {
        for c in 0..CHANNELS {
            let s = if per == 1 { samples[i] } else { samples[i * 3 + c] };
            planes[c * n + i] = (s as f64 / scale).min(1.0);
        }
    }
    Ok(Pixmap { width, height, planes })
}

pub fn read_pixmap(path: impl AsRef<Path>) -> Result<Pixmap> {
    let path = path.as_ref();
    let buf = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_pixmap(&buf).map_err(|e| match e {
        Error::Format { message, .. } => Error::format(path.display().to_string(), message),
        other => other,
    })
}

pub fn read_ppm(buf: &[u8], encoding: Encoding) -> Result<EventFrame> {
    let p = decode_pixmap(buf)?;
    EventFrame::from_data(p.width, p.height, p.planes, encoding)
}

/// Frame sidecar: encoding tag and source window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameMeta {
    pub encoding: Encoding,
    pub source_window: Option<SourceWindow>,
}

impl FrameMeta {
    pub fn to_text(&self) -> String {
        let enc = match self.encoding {
            Encoding::FixedCount(n) => format!("fixed_count {n}"),
            Encoding::FixedInterval(dt) => format!("fixed_interval {dt}"),
            Encoding::Full => "full".into(),
            Encoding::Mono => "mono".into(),
            Encoding::Generated => "generated".into(),
        };
        let win = match self.source_window {
            Some(SourceWindow::Time { start, end }) => format!("time {start} {end}"),
            Some(SourceWindow::Index { start, end }) => format!("index {start} {end}"),
            None => "none".into(),
        };
        format!("encoding {enc}\nwindow {win}\n")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |m: &str| Error::format("frame metadata", m.to_string());
        let mut encoding = None;
        let mut source_window = None;
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let parts: Vec<&str> = line.split_whitespace().collect();
            let num = |i: usize| -> Result<u64> {
                parts.get(i).and_then(|s| s.parse().ok()).ok_or_else(|| bad(line))
            };
            match parts[0] {
                "encoding" => {
                    encoding = Some(match parts.get(1).copied() {
                        Some("fixed_count") => Encoding::FixedCount(num(2)? as usize),
                        Some("fixed_interval") => Encoding::FixedInterval(num(2)?),
                        Some("full") => Encoding::Full,
                        Some("mono") => Encoding::Mono,
                        Some("generated") => Encoding::Generated,
                        _ => return Err(bad(line)),
                    })
                }
                "window" => {
                    source_window = match parts.get(1).copied() {
                        Some("time") => Some(SourceWindow::Time { start: num(2)?, end: num(3)? }),
                        Some("index") => Some(SourceWindow::Index { start: num(2)? as usize, end: num(3)? as usize }),
                        Some("none") => None,
                        _ => return Err(bad(line)),
                    }
                }
                _ => return Err(bad(line)),
            }
        }
        Ok(FrameMeta { encoding: encoding.ok_or_else(|| bad("missing encoding"))?, source_window })
    }
}

pub fn meta_path(frame_path: &Path) -> PathBuf {
    frame_path.with_extension("meta")
}

/// Writes `path` (P6) and its `.meta` sidecar.
pub fn save_frame(path: impl AsRef<Path>, frame: &EventFrame) -> Result<()> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    write_ppm(&mut bytes, frame).expect("in-memory write");
    fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    let meta = FrameMeta { encoding: frame.encoding, source_window: frame.source_window };
    let mp = meta_path(path);
    fs::write(&mp, meta.to_text()).map_err(|e| Error::io(mp, e))
}

/// Reads a frame and, if present, its sidecar. Without one the frame is tagged `Full`.
pub fn load_frame(path: impl AsRef<Path>) -> Result<EventFrame> {
    let path = path.as_ref();
    let pix = read_pixmap(path)?;
    let mut frame = EventFrame::from_data(pix.width, pix.height, pix.planes, Encoding::Full)?;
    let mp = meta_path(path);
    if mp.exists() {
        let text = fs::read_to_string(&mp).map_err(|e| Error::io(&mp, e))?;
        let meta = FrameMeta::parse(&text)?;
        frame.encoding = meta.encoding;
        frame.source_window = meta.source_window;
    }
    Ok(frame)
}
