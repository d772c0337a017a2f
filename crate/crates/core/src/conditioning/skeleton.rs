//! 2D skeletons and their rasterised control images.
//!
//! Pixel `(x, y)` has its centre at integer coordinates. A bone lights every
//! pixel whose centre lies within `line_width / 2` of the segment, a joint every
//! pixel within `joint_radius` of the joint. Bones are drawn first in a
//! per-bone colour, joints on top in white. Only bones whose two joints are
//! visible are drawn.

use super::ControlImage;
use crate::error::{Error, Result};
use std::collections::BTreeMap;
use std::path::Path;

const DEFAULT_BONES: &str = include_str!("../../data/bones_13.txt");

const PALETTE: [[f64; 3]; 6] = [
    [1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, 0.0, 1.0],
    [1.0, 1.0, 0.0],
    [0.0, 1.0, 1.0],
    [1.0, 0.0, 1.0],
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Joint {
    pub x: f64,
    pub y: f64,
    pub visible: bool,
}

impl Joint {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y, visible: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Skeleton2D {
    pub joints: Vec<Joint>,
    pub bones: Vec<(usize, usize)>,
}

impl Skeleton2D {
    pub fn new(joints: Vec<Joint>, bones: Vec<(usize, usize)>) -> Result<Self> {
        let sk = Self { joints, bones };
        sk.validate()?;
        Ok(sk)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(&(a, b)) = self.bones.iter().find(|(a, b)| *a >= self.joints.len() || *b >= self.joints.len()) {
            return Err(Error::InvalidArgument(format!("bone ({a}, {b}) references a missing joint")));
        }
        if self.joints.iter().any(|j| !j.x.is_finite() || !j.y.is_finite()) {
            return Err(Error::NonFinite("skeleton joints"));
        }
        Ok(())
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        let joints = self.joints.iter().map(|j| Joint { x: j.x + dx, y: j.y + dy, ..*j }).collect();
        Self { joints, bones: self.bones.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RasterStyle {
    pub line_width: f64,
    pub joint_radius: f64,
}

impl RasterStyle {
    /// 3 px lines and 4 px joints at 64x64, scaled with the shorter side.
    pub fn for_size(width: usize, height: usize) -> Self {
        let s = width.min(height) as f64 / 64.0;
        Self { line_width: 3.0 * s, joint_radius: 4.0 * s }
    }
}

pub fn parse_bones(text: &str) -> Result<Vec<(usize, usize)>> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            let mut it = l.split_whitespace().map(str::parse::<usize>);
            match (it.next(), it.next(), it.next()) {
                (Some(Ok(a)), Some(Ok(b)), None) => Ok((a, b)),
                _ => Err(Error::format("bone table", format!("bad line `{l}`"))),
            }
        })
        .collect()
}

/// The 13-joint head/shoulders/elbows/wrists/hips/knees/ankles table.
pub fn default_bones() -> Vec<(usize, usize)> {
    parse_bones(DEFAULT_BONES).expect("bundled bone table")
}

pub fn read_bones(path: impl AsRef<Path>) -> Result<Vec<(usize, usize)>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_bones(&text)
}

#[derive(serde::Deserialize)]
struct SkeletonRow {
    frame: u64,
    joint: usize,
    x: f64,
    y: f64,
    visible: u8,
}

/// Reads `frame,joint,x,y,visible` rows into one skeleton per frame id.
/// Joint ids must run `0..n` within each frame.
pub fn load_skeletons(path: impl AsRef<Path>, bones: &[(usize, usize)]) -> Result<BTreeMap<u64, Skeleton2D>> {
    let path = path.as_ref();
    let mut rdr = csv::Reader::from_path(path)?;
    let mut frames: BTreeMap<u64, BTreeMap<usize, Joint>> = BTreeMap::new();
    for row in rdr.deserialize::<SkeletonRow>() {
        let row = row?;
        frames.entry(row.frame).or_default().insert(row.joint, Joint { x: row.x, y: row.y, visible: row.visible != 0 });
    }
    frames
        .into_iter()
        .map(|(frame, joints)| {
            if joints.keys().enumerate().any(|(i, &j)| i != j) {
                return Err(Error::format(path.display().to_string(), format!("frame {frame}: joint ids not contiguous")));
            }
            Ok((frame, Skeleton2D::new(joints.into_values().collect(), bones.to_vec())?))
        })
        .collect()
}

fn segment_distance(px: f64, py: f64, a: &Joint, b: &Joint) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    let s = if len2 == 0.0 { 0.0 } else { (((px - a.x) * dx + (py - a.y) * dy) / len2).clamp(0.0, 1.0) };
    let (qx, qy) = (a.x + s * dx, a.y + s * dy);
    ((px - qx).powi(2) + (py - qy).powi(2)).sqrt()
}

fn paint(img: &mut ControlImage, x0: f64, x1: f64, y0: f64, y1: f64, color: [f64; 3], inside: impl Fn(f64, f64) -> bool) {
    let (w, h) = (img.width as f64, img.height as f64);
    let clampx = |v: f64| v.clamp(0.0, w - 1.0) as usize;
    let clampy = |v: f64| v.clamp(0.0, h - 1.0) as usize;
    if x1 < 0.0 || y1 < 0.0 || x0 > img.width as f64 - 1.0 || y0 > img.height as f64 - 1.0 {
        return;
    }
    for y in clampy(y0.floor())..=clampy(y1.ceil()) {
        for x in clampx(x0.floor())..=clampx(x1.ceil()) {
            if inside(x as f64, y as f64) {
                for (c, v) in color.iter().enumerate() {
                    img.set(c, x, y, *v);
                }
            }
        }
    }
}

pub fn rasterize_skeleton(sk: &Skeleton2D, width: usize, height: usize, style: &RasterStyle) -> Result<ControlImage> {
    sk.validate()?;
    let mut img = ControlImage::blank(width, height, 3);
    if width == 0 || height == 0 {
        return Ok(img);
    }
    let half = style.line_width / 2.0;
    for (i, &(a, b)) in sk.bones.iter().enumerate() {
        let (ja, jb) = (&sk.joints[a], &sk.joints[b]);
        if !(ja.visible && jb.visible) {
            continue;
        }
        paint(
            &mut img,
            ja.x.min(jb.x) - half,
            ja.x.max(jb.x) + half,
            ja.y.min(jb.y) - half,
            ja.y.max(jb.y) + half,
            PALETTE[i % PALETTE.len()],
            |x, y| segment_distance(x, y, ja, jb) <= half,
        );
    }
    let r = style.joint_radius;
    for j in sk.joints.iter().filter(|j| j.visible) {
        paint(&mut img, j.x - r, j.x + r, j.y - r, j.y + r, [1.0; 3], |x, y| {
            (x - j.x).powi(2) + (y - j.y).powi(2) <= r * r
        });
    }
    Ok(img)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn style(line_width: f64, joint_radius: f64) -> RasterStyle {
        RasterStyle { line_width, joint_radius }
    }

    #[test]
    fn default_table_has_twelve_bones() {
        let bones = default_bones();
        assert_eq!(bones.len(), 12);
        assert_eq!(bones.iter().flat_map(|&(a, b)| [a, b]).max(), Some(12));
    }

    #[test]
    fn joint_disc_of_radius_two() {
        let sk = Skeleton2D::new(vec![Joint::new(32.0, 32.0)], vec![]).unwrap();
        let img = rasterize_skeleton(&sk, 64, 64, &style(3.0, 2.0)).unwrap();
        let lit = img.lit_pixels();
        assert_eq!(lit.len(), 13);
        assert!(lit.iter().all(|&(x, y)| (x as f64 - 32.0).powi(2) + (y as f64 - 32.0).powi(2) <= 4.0));
    }

    #[test]
    fn hidden_joints_draw_nothing() {
        let joints = vec![Joint { x: 3.0, y: 3.0, visible: false }, Joint::new(8.0, 8.0)];
        let sk = Skeleton2D::new(joints, vec![(0, 1)]).unwrap();
        let img = rasterize_skeleton(&sk, 16, 16, &style(1.0, 0.0)).unwrap();
        assert_eq!(img.lit_pixels(), vec![(8, 8)]);
        let none = Skeleton2D::new(vec![Joint { x: 3.0, y: 3.0, visible: false }], vec![]).unwrap();
        assert!(rasterize_skeleton(&none, 16, 16, &style(3.0, 4.0)).unwrap().lit_pixels().is_empty());
    }

    #[test]
    fn bone_table_must_match_joints() {
        assert!(Skeleton2D::new(vec![Joint::new(0.0, 0.0)], vec![(0, 1)]).is_err());
        assert!(Skeleton2D::new(vec![Joint::new(f64::NAN, 0.0)], vec![]).is_err());
        assert!(parse_bones("0 1\n# c\n2 x\n").is_err());
    }

    #[test]
    fn clipped_at_canvas_edges() {
        let sk = Skeleton2D::new(vec![Joint::new(-1.0, 0.0), Joint::new(40.0, 0.0)], vec![(0, 1)]).unwrap();
        let img = rasterize_skeleton(&sk, 8, 8, &style(1.0, 1.0)).unwrap();
        let lit = img.lit_pixels();
        assert!(lit.iter().all(|&(_, y)| y <= 1));
        assert_eq!(lit.iter().filter(|&&(_, y)| y == 0).count(), 8);
        let far = Skeleton2D::new(vec![Joint::new(-50.0, -50.0)], vec![]).unwrap();
        assert!(rasterize_skeleton(&far, 8, 8, &style(1.0, 3.0)).unwrap().lit_pixels().is_empty());
    }

    #[test]
    fn scaled_style() {
        assert_eq!(RasterStyle::for_size(64, 64), style(3.0, 4.0));
        assert_eq!(RasterStyle::for_size(128, 256), style(6.0, 8.0));
    }

    #[test]
    fn skeleton_csv() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sk.csv");
        std::fs::write(&p, "frame,joint,x,y,visible\n0,0,1,2,1\n0,1,3,4,0\n5,1,1,1,1\n5,0,2,2,1\n").unwrap();
        let sks = load_skeletons(&p, &[(0, 1)]).unwrap();
        assert_eq!(sks.len(), 2);
        assert!(!sks[&0].joints[1].visible);
        assert_eq!(sks[&5].joints[0], Joint::new(2.0, 2.0));
        std::fs::write(&p, "frame,joint,x,y,visible\n0,1,1,2,1\n").unwrap();
        assert!(load_skeletons(&p, &[]).is_err());
    }
}
