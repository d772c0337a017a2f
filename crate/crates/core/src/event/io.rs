//! Binary and CSV stream files.
//!
//! Binary layout, all integers little-endian:
//!
//! ```text
//! header (16 bytes): "EVST" | version u16 | width u16 | height u16 | polarity_mode u8 | 5 reserved
//! record (16 bytes): x u16 | y u16 | t u64 | polarity i8 | 3 pad
//! ```
//!
//! `polarity_mode` is 0 for signed streams and 1 for polarity-free streams.
//! Reserved and pad bytes are written as zero and ignored on read.

use super::{Event, EventStream, Polarity, PolarityMode};
use crate::error::{Error, Result};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

pub const MAGIC: &[u8; 4] = b"EVST";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 16;
pub const RECORD_LEN: usize = 16;

fn mode_byte(mode: PolarityMode) -> u8 {
    match mode {
        PolarityMode::Signed => 0,
        PolarityMode::None => 1,
    }
}

pub fn write_stream<W: Write>(mut w: W, stream: &EventStream) -> std::io::Result<()> {
    let mut header = [0u8; HEADER_LEN];
    header[..4].copy_from_slice(MAGIC);
    header[4..6].copy_from_slice(&VERSION.to_le_bytes());
    header[6..8].copy_from_slice(&stream.width.to_le_bytes());
    header[8..10].copy_from_slice(&stream.height.to_le_bytes());
    header[10] = mode_byte(stream.polarity_mode);
    w.write_all(&header)?;
    let mut rec = [0u8; RECORD_LEN];
    for e in &stream.events {
        rec[0..2].copy_from_slice(&e.x.to_le_bytes());
        rec[2..4].copy_from_slice(&e.y.to_le_bytes());
        rec[4..12].copy_from_slice(&e.t.to_le_bytes());
        rec[12] = e.polarity.as_i8() as u8;
        w.write_all(&rec)?;
    }
    Ok(())
}

pub fn read_stream<R: Read>(mut r: R) -> Result<EventStream> {
    let ctx = "event stream";
    let mut buf = Vec::new();
    r.read_to_end(&mut buf).map_err(|e| Error::format(ctx, e.to_string()))?;
    if buf.len() < HEADER_LEN {
        return Err(Error::format(ctx, "truncated header"));
    }
    if &buf[..4] != MAGIC {
        return Err(Error::format(ctx, "bad magic"));
    }
    let u16_at = |i: usize| u16::from_le_bytes([buf[i], buf[i + 1]]);
    let version = u16_at(4);
    if version != VERSION {
        return Err(Error::format(ctx, format!("unsupported version {version}")));
    }
    let (width, height) = (u16_at(6), u16_at(8));
    let polarity_mode = match buf[10] {
        0 => PolarityMode::Signed,
        1 => PolarityMode::None,
        m => return Err(Error::format(ctx, format!("unknown polarity mode {m}"))),
    };
    let body = &buf[HEADER_LEN..];
    if body.len() % RECORD_LEN != 0 {
        return Err(Error::format(ctx, "trailing partial record"));
    }
    let events = body
        .chunks_exact(RECORD_LEN)
        .enumerate()
        .map(|(i, rec)| {
            let polarity = Polarity::from_i8(rec[12] as i8)
                .ok_or_else(|| Error::format(ctx, format!("bad polarity byte in record {i}")))?;
            Ok(Event {
                x: u16::from_le_bytes([rec[0], rec[1]]),
                y: u16::from_le_bytes([rec[2], rec[3]]),
                t: u64::from_le_bytes(rec[4..12].try_into().unwrap()),
                polarity,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EventStream { width, height, polarity_mode, events })
}

pub fn save_stream(path: impl AsRef<Path>, stream: &EventStream) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_stream(&mut w, stream).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

pub fn load_stream(path: impl AsRef<Path>) -> Result<EventStream> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_stream(BufReader::new(file))
}

#[derive(serde::Serialize, serde::Deserialize)]
struct CsvRow {
    x: u16,
    y: u16,
    t: u64,
    polarity: i8,
}

/// Writes `x,y,t,polarity` rows with polarity as 1, -1 or 0.
pub fn write_csv<W: Write>(w: W, stream: &EventStream) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for e in &stream.events {
        wtr.serialize(CsvRow { x: e.x, y: e.y, t: e.t, polarity: e.polarity.as_i8() })?;
    }
    wtr.flush().map_err(|e| Error::format("csv", e.to_string()))?;
    Ok(())
}

/// CSV carries no geometry, so the caller supplies it.
pub fn read_csv<R: Read>(
    r: R,
    width: u16,
    height: u16,
    polarity_mode: PolarityMode,
) -> Result<EventStream> {
    let mut rdr = csv::Reader::from_reader(r);
    let events = rdr
        .deserialize::<CsvRow>()
        .map(|row| {
            let row = row?;
            let polarity = Polarity::from_i8(row.polarity)
                .ok_or_else(|| Error::format("csv", format!("bad polarity {}", row.polarity)))?;
            Ok(Event { x: row.x, y: row.y, t: row.t, polarity })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EventStream { width, height, polarity_mode, events })
}

pub fn save_csv(path: impl AsRef<Path>, stream: &EventStream) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(BufWriter::new(file), stream)
}

pub fn load_csv(
    path: impl AsRef<Path>,
    width: u16,
    height: u16,
    polarity_mode: PolarityMode,
) -> Result<EventStream> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(BufReader::new(file), width, height, polarity_mode)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout_is_fixed() {
        let s = EventStream::with_events(
            640,
            480,
            PolarityMode::None,
            vec![Event::new(3, 4, 0x0102_0304_0506_0708, Polarity::None)],
        );
        let mut buf = Vec::new();
        write_stream(&mut buf, &s).unwrap();
        assert_eq!(buf.len(), HEADER_LEN + RECORD_LEN);
        assert_eq!(
            &buf[..HEADER_LEN],
            &[b'E', b'V', b'S', b'T', 1, 0, 0x80, 0x02, 0xe0, 0x01, 1, 0, 0, 0, 0, 0]
        );
        assert_eq!(
            &buf[HEADER_LEN..],
            &[3, 0, 4, 0, 8, 7, 6, 5, 4, 3, 2, 1, 0, 0, 0, 0]
        );
    }

    #[test]
    fn negative_polarity_byte() {
        let s = EventStream::with_events(2, 2, PolarityMode::Signed, vec![Event::new(0, 0, 0, Polarity::Negative)]);
        let mut buf = Vec::new();
        write_stream(&mut buf, &s).unwrap();
        assert_eq!(buf[HEADER_LEN + 12], 0xff);
    }

    #[test]
    fn rejects_corrupt_input() {
        assert!(read_stream(&b"EVST"[..]).is_err());
        let mut buf = Vec::new();
        write_stream(&mut buf, &EventStream::new(4, 4, PolarityMode::Signed)).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_stream(&bad[..]).is_err());
        let mut bad = buf.clone();
        bad.push(0);
        assert!(read_stream(&bad[..]).is_err());
        let mut bad = buf.clone();
        bad[10] = 9;
        assert!(read_stream(&bad[..]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let s = EventStream::with_events(
            8,
            8,
            PolarityMode::Signed,
            vec![Event::new(1, 2, 3, Polarity::Positive), Event::new(4, 5, 6, Polarity::Negative)],
        );
        let mut buf = Vec::new();
        write_csv(&mut buf, &s).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "x,y,t,polarity\n1,2,3,1\n4,5,6,-1\n");
        assert_eq!(read_csv(&buf[..], 8, 8, PolarityMode::Signed).unwrap(), s);
    }
}
