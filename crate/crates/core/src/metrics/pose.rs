use crate::error::{Error, Result};

/// Per-frame joint (or vertex) coordinates with optional per-joint visibility.
/// Visibility is read from the ground-truth side of a comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseSet<const D: usize> {
    pub frames: Vec<Vec<[f64; D]>>,
    pub visible: Option<Vec<Vec<bool>>>,
}

/// Pixels.
pub type PoseSet2D = PoseSet<2>;
/// Millimetres.
pub type PoseSet3D = PoseSet<3>;
/// Mesh vertices in millimetres.
pub type VertexSet = PoseSet<3>;

impl<const D: usize> PoseSet<D> {
    pub fn new(frames: Vec<Vec<[f64; D]>>) -> Self {
        Self { frames, visible: None }
    }

    pub fn with_visibility(frames: Vec<Vec<[f64; D]>>, visible: Vec<Vec<bool>>) -> Self {
        Self { frames, visible: Some(visible) }
    }

    fn is_visible(&self, f: usize, j: usize) -> bool {
        self.visible.as_ref().is_none_or(|v| v[f][j])
    }
}

/// Distances for every visible joint, frame-major.
fn errors<const D: usize>(p: &PoseSet<D>, g: &PoseSet<D>) -> Result<Vec<f64>> {
    let shape = |s: &PoseSet<D>| s.frames.iter().map(Vec::len).collect::<Vec<_>>();
    if shape(p) != shape(g) {
        return Err(Error::ShapeMismatch { expected: shape(g), got: shape(p) });
    }
    if let Some(v) = &g.visible {
        if v.iter().map(Vec::len).collect::<Vec<_>>() != shape(g) {
            return Err(Error::ShapeMismatch { expected: shape(g), got: v.iter().map(Vec::len).collect() });
        }
    }
    let mut out = Vec::new();
    for (f, (pf, gf)) in p.frames.iter().zip(&g.frames).enumerate() {
        for (j, (a, b)) in pf.iter().zip(gf).enumerate() {
            if !g.is_visible(f, j) {
                continue;
            }
            if a.iter().chain(b).any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("joint coordinates"));
            }
            out.push(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt());
        }
    }
    if out.is_empty() {
        return Err(Error::Empty("visible joints"));
    }
    Ok(out)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn percent_where(errs: &[f64], pass: impl Fn(f64) -> bool) -> f64 {
    100.0 * errs.iter().filter(|&&e| pass(e)).count() as f64 / errs.len() as f64
}

pub fn mpjpe_2d(p: &PoseSet2D, g: &PoseSet2D) -> Result<f64> {
    Ok(mean(&errors(p, g)?))
}

pub fn mpjpe_3d(p: &PoseSet3D, g: &PoseSet3D) -> Result<f64> {
    Ok(mean(&errors(p, g)?))
}

pub fn pve(p: &VertexSet, g: &VertexSet) -> Result<f64> {
    Ok(mean(&errors(p, g)?))
}

/// Percentage of visible joints within `fraction * image_height` pixels.
pub fn ap_at(p: &PoseSet2D, g: &PoseSet2D, fraction: f64, image_height: usize) -> Result<f64> {
    if !(fraction > 0.0 && fraction <= 1.0) || image_height == 0 {
        return Err(Error::InvalidArgument(format!("ap fraction {fraction} / height {image_height}")));
    }
    let limit = fraction * image_height as f64;
    Ok(percent_where(&errors(p, g)?, |e| e <= limit))
}

/// Percentage of joints with error strictly below `mm`.
pub fn pck_at(p: &PoseSet3D, g: &PoseSet3D, mm: f64) -> Result<f64> {
    if !(mm > 0.0) {
        return Err(Error::InvalidArgument(format!("pck threshold {mm}")));
    }
    Ok(percent_where(&errors(p, g)?, |e| e < mm))
}

/// Mean PCK over thresholds `step, 2 step, ..., mm_max`.
pub fn auc_pck(p: &PoseSet3D, g: &PoseSet3D, mm_max: f64, step: f64) -> Result<f64> {
    if !(step > 0.0 && mm_max > step && mm_max.is_finite()) {
        return Err(Error::InvalidArgument(format!("auc range {mm_max} step {step}")));
    }
    let errs = errors(p, g)?;
    let n = (mm_max / step + 1e-9).floor() as usize;
    Ok((1..=n).map(|k| percent_where(&errs, |e| e < k as f64 * step)).sum::<f64>() / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shifted<const D: usize>(g: &PoseSet<D>, off: [f64; D]) -> PoseSet<D> {
        let frames = g.frames.iter().map(|f| f.iter().map(|j| std::array::from_fn(|k| j[k] + off[k])).collect()).collect();
        PoseSet::new(frames)
    }

    fn grid2(frames: usize, joints: usize) -> PoseSet2D {
        PoseSet::new((0..frames).map(|f| (0..joints).map(|j| [f as f64, j as f64 * 2.0]).collect()).collect())
    }

    fn grid3(frames: usize, joints: usize) -> PoseSet3D {
        PoseSet::new((0..frames).map(|f| (0..joints).map(|j| [f as f64, j as f64, 100.0]).collect()).collect())
    }

    #[test]
    fn offsets() {
        let g = grid2(3, 5);
        assert_eq!(mpjpe_2d(&g, &g).unwrap(), 0.0);
        assert!((mpjpe_2d(&shifted(&g, [3.0, 4.0]), &g).unwrap() - 5.0).abs() < 1e-12);
        let g3 = grid3(2, 4);
        assert!((mpjpe_3d(&shifted(&g3, [0.0, 0.0, 10.0]), &g3).unwrap() - 10.0).abs() < 1e-12);
        assert!((pve(&shifted(&g3, [0.0, 0.0, 10.0]), &g3).unwrap() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn visibility_filters_joints() {
        let g = PoseSet::with_visibility(vec![vec![[0.0, 0.0], [0.0, 0.0]]], vec![vec![true, false]]);
        let p = PoseSet::new(vec![vec![[3.0, 4.0], [100.0, 0.0]]]);
        assert_eq!(mpjpe_2d(&p, &g).unwrap(), 5.0);
        let none = PoseSet::with_visibility(vec![vec![[0.0, 0.0]]], vec![vec![false]]);
        assert!(matches!(mpjpe_2d(&PoseSet::new(vec![vec![[0.0, 0.0]]]), &none), Err(Error::Empty(_))));
    }

    #[test]
    fn shape_mismatch() {
        assert!(mpjpe_2d(&grid2(2, 3), &grid2(2, 4)).is_err());
        assert!(mpjpe_2d(&grid2(3, 3), &grid2(2, 3)).is_err());
    }

    #[test]
    fn pck_and_auc_step_fixture() {
        let g = grid3(2, 5);
        let p = shifted(&g, [0.0, 30.0, 0.0]);
        assert_eq!(pck_at(&p, &g, 25.0).unwrap(), 0.0);
        assert_eq!(pck_at(&p, &g, 50.0).unwrap(), 100.0);
        assert!((auc_pck(&p, &g, 100.0, 1.0).unwrap() - 70.0).abs() < 1e-12);
        assert_eq!(auc_pck(&g, &g, 100.0, 1.0).unwrap(), 100.0);
        assert!(pck_at(&p, &g, 0.0).is_err());
        assert!(auc_pck(&p, &g, 1.0, 1.0).is_err());
    }

    #[test]
    fn ap_half_fixture() {
        let g = PoseSet::new(vec![vec![[10.0, 10.0]; 4]]);
        let p = PoseSet::new(vec![vec![[10.0, 12.0], [10.0, 10.0], [10.0, 40.0], [50.0, 10.0]]]);
        // Height 64, fraction 0.25: threshold 16 px.
        assert_eq!(ap_at(&p, &g, 0.25, 64).unwrap(), 50.0);
        assert_eq!(ap_at(&g, &g, 0.25, 64).unwrap(), 100.0);
        assert!(ap_at(&p, &g, 0.0, 64).is_err());
    }
}
