//! Parameter file: `"DNSR"`, version u16, reserved u16, spec hash u64,
//! count u64, then `count` little-endian f32 values in group order.

use super::{DenoiserParams, DenoiserSpec};
use crate::error::{Error, Result};
use std::io::{Read, Write};
use std::path::Path;

pub const PARAMS_MAGIC: &[u8; 4] = b"DNSR";
const VERSION: u16 = 1;

pub fn write_params(mut w: impl Write, params: &DenoiserParams) -> std::io::Result<()> {
    let mut buf = Vec::with_capacity(24 + 4 * params.len());
    buf.extend_from_slice(PARAMS_MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&0u16.to_le_bytes());
    buf.extend_from_slice(&params.spec().hash().to_le_bytes());
    buf.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for &v in params.values() {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    w.write_all(&buf)
}

pub fn read_params(mut r: impl Read, spec: DenoiserSpec) -> Result<DenoiserParams> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf).map_err(|e| Error::io("parameter stream", e))?;
    if buf.len() < 24 || &buf[..4] != PARAMS_MAGIC {
        return Err(Error::format("parameters", "missing DNSR header"));
    }
    let version = u16::from_le_bytes([buf[4], buf[5]]);
    if version != VERSION {
        return Err(Error::format("parameters", format!("unsupported version {version}")));
    }
    let hash = u64::from_le_bytes(buf[8..16].try_into().unwrap());
    if hash != spec.hash() {
        return Err(Error::format("parameters", "file was written for a different denoiser spec"));
    }
    let count = u64::from_le_bytes(buf[16..24].try_into().unwrap()) as usize;
    let body = &buf[24..];
    if count != spec.param_count() || body.len() != 4 * count {
        return Err(Error::ShapeMismatch { expected: vec![spec.param_count()], got: vec![body.len() / 4] });
    }
    let values = body.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64).collect();
    DenoiserParams::from_values(spec, values)
}

pub fn save_params(path: impl AsRef<Path>, params: &DenoiserParams) -> Result<()> {
    let path = path.as_ref();
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_params(std::io::BufWriter::new(f), params).map_err(|e| Error::io(path, e))
}

pub fn load_params(path: impl AsRef<Path>, spec: DenoiserSpec) -> Result<DenoiserParams> {
    let path = path.as_ref();
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_params(std::io::BufReader::new(f), spec)
}
