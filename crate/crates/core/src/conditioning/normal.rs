//! Normal maps of capsule bodies.
//!
//! The camera sits at the origin looking down `+z` with image `x` right and
//! `y` down; pixel `(u, v)` (centre at integer coordinates) casts the ray
//! `((u - cx) / f, (v - cy) / f, 1)`. Surface normals are reported in the usual
//! normal-map frame (`x` right, `y` up, `z` toward the viewer) and encoded as
//! `(n + 1) / 2`. Pixels that miss every capsule read 0.5 in all channels.

use super::ControlImage;
use crate::error::{Error, Result};

type Vec3 = [f64; 3];

fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}
fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}
fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}
fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

/// Segment `a`-`b` swept by a sphere of `radius`, in camera coordinates.
/// `a == b` gives a sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Capsule {
    pub a: Vec3,
    pub b: Vec3,
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intrinsics {
    pub focal: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Intrinsics {
    /// Principal point at the image centre.
    pub fn centered(width: usize, height: usize, focal: f64) -> Self {
        Self { focal, cx: width as f64 / 2.0, cy: height as f64 / 2.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapsuleBody {
    pub capsules: Vec<Capsule>,
    pub intrinsics: Intrinsics,
}

impl CapsuleBody {
    pub fn validate(&self) -> Result<()> {
        if self.capsules.is_empty() {
            return Err(Error::InvalidArgument("capsule body needs at least one capsule".into()));
        }
        if self.capsules.iter().any(|c| !(c.radius > 0.0)) {
            return Err(Error::InvalidArgument("capsule radii must be positive".into()));
        }
        if !(self.intrinsics.focal > 0.0) {
            return Err(Error::InvalidArgument("focal length must be positive".into()));
        }
        Ok(())
    }
}

const MIN_T: f64 = 1e-9;

fn sphere_hit(origin: Vec3, dir: Vec3, center: Vec3, r: f64) -> Option<f64> {
    let oc = sub(origin, center);
    let b = dot(dir, oc);
    let c = dot(oc, oc) - r * r;
    let h = b * b - c;
    if h < 0.0 {
        return None;
    }
    let s = h.sqrt();
    [-b - s, -b + s].into_iter().find(|&t| t > MIN_T)
}

/// Nearest positive ray parameter for a unit-length `dir`.
fn capsule_hit(origin: Vec3, dir: Vec3, cap: &Capsule) -> Option<f64> {
    let ba = sub(cap.b, cap.a);
    let oa = sub(origin, cap.a);
    let baba = dot(ba, ba);
    let mut best: Option<f64> = None;
    let mut consider = |t: f64| {
        if t > MIN_T && best.is_none_or(|b| t < b) {
            best = Some(t);
        }
    };
    if baba > 0.0 {
        let bard = dot(ba, dir);
        let baoa = dot(ba, oa);
        let qa = baba - bard * bard;
        let qb = baba * dot(dir, oa) - baoa * bard;
        let qc = baba * dot(oa, oa) - baoa * baoa - cap.radius * cap.radius * baba;
        let h = qb * qb - qa * qc;
        if qa > 1e-12 && h >= 0.0 {
            let s = h.sqrt();
            for t in [(-qb - s) / qa, (-qb + s) / qa] {
                let y = baoa + t * bard;
                if y > 0.0 && y < baba {
                    consider(t);
                }
            }
        }
    }
    for center in [cap.a, cap.b] {
        if let Some(t) = sphere_hit(origin, dir, center, cap.radius) {
            consider(t);
        }
    }
    best
}

fn capsule_normal(p: Vec3, cap: &Capsule) -> Vec3 {
    let ba = sub(cap.b, cap.a);
    let baba = dot(ba, ba);
    let s = if baba > 0.0 { (dot(sub(p, cap.a), ba) / baba).clamp(0.0, 1.0) } else { 0.0 };
    let n = sub(p, add(cap.a, scale(ba, s)));
    let len = dot(n, n).sqrt();
    scale(n, 1.0 / len)
}

/// Unit normals (normal-map frame) of the nearest surface per pixel, row-major.
pub fn capsule_normals(body: &CapsuleBody, width: usize, height: usize) -> Result<Vec<Option<Vec3>>> {
    body.validate()?;
    let k = &body.intrinsics;
    let mut out = Vec::with_capacity(width * height);
    for v in 0..height {
        for u in 0..width {
            let d = [(u as f64 - k.cx) / k.focal, (v as f64 - k.cy) / k.focal, 1.0];
            let dir = scale(d, 1.0 / dot(d, d).sqrt());
            let hit = body
                .capsules
                .iter()
                .filter_map(|c| capsule_hit([0.0; 3], dir, c).map(|t| (t, c)))
                .min_by(|a, b| a.0.total_cmp(&b.0));
            out.push(hit.map(|(t, c)| {
                let n = capsule_normal(scale(dir, t), c);
                [n[0], -n[1], -n[2]]
            }));
        }
    }
    Ok(out)
}

pub fn capsule_normal_map(body: &CapsuleBody, width: usize, height: usize) -> Result<ControlImage> {
    let normals = capsule_normals(body, width, height)?;
    let mut img = ControlImage::filled(width, height, 3, 0.5);
    for (i, n) in normals.iter().enumerate() {
        if let Some(n) = n {
            for c in 0..3 {
                img.data[c * width * height + i] = (n[c] + 1.0) / 2.0;
            }
        }
    }
    Ok(img)
}
