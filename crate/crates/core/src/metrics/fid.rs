use crate::error::{Error, Result};
use crate::frame::EventFrame;
use crate::rng::{self, Domain};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};

/// Frames are area-averaged to `FEATURE_SIDE x FEATURE_SIDE` grayscale before projection.
pub const FEATURE_SIDE: usize = 16;
const EIGEN_FLOOR: f64 = 1e-8;

/// `n x d` feature matrix, one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    rows: DMatrix<f64>,
}

impl FeatureSet {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map(Vec::len).ok_or(Error::Empty("feature rows"))?;
        if let Some(r) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::ShapeMismatch { expected: vec![d], got: vec![r.len()] });
        }
        let m = DMatrix::from_row_iterator(rows.len(), d, rows.iter().flatten().copied());
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("features"));
        }
        Ok(Self { rows: m })
    }

    pub fn len(&self) -> usize {
        self.rows.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.rows.ncols()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.rows.row(i).iter().copied().collect()
    }

    pub fn mean(&self) -> DVector<f64> {
        self.rows.row_mean().transpose()
    }

    /// Unbiased sample covariance.
    pub fn covariance(&self) -> Result<DMatrix<f64>> {
        let n = self.len();
        if n < 2 {
            return Err(Error::InvalidArgument(format!("covariance needs at least 2 samples, got {n}")));
        }
        let mu = self.rows.row_mean();
        let mut centered = self.rows.clone();
        for mut r in centered.row_iter_mut() {
            r -= &mu;
        }
        Ok(centered.transpose() * centered / (n as f64 - 1.0))
    }
}

/// Feature map applied after downsampling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Projection {
    /// `d x 256` matrix with N(0, 1) / 16 entries drawn from `seed`.
    Random { dim: usize, seed: u64 },
    /// The 256 downsampled pixels themselves.
    Identity,
}

fn area_downsample(values: &[f64], w: usize, h: usize, side: usize) -> Vec<f64> {
    // Overlap of source cell [i, i+1) with target cell j along an axis of n source cells.
    let weights = |n: usize| -> Vec<Vec<(usize, f64)>> {
        let scale = n as f64 / side as f64;
        (0..side)
            .map(|j| {
                let (a, b) = (j as f64 * scale, (j + 1) as f64 * scale);
                (a.floor() as usize..(b.ceil() as usize).min(n))
                    .map(|i| (i, ((i + 1) as f64).min(b) - (i as f64).max(a)))
                    .filter(|&(_, wt)| wt > 0.0)
                    .collect()
            })
            .collect()
    };
    let (wx, wy) = (weights(w), weights(h));
    let area = (w as f64 / side as f64) * (h as f64 / side as f64);
    let mut out = vec![0.0; side * side];
    for (ty, ys) in wy.iter().enumerate() {
        for (tx, xs) in wx.iter().enumerate() {
            let mut acc = 0.0;
            for &(y, fy) in ys {
                for &(x, fx) in xs {
                    acc += fy * fx * values[y * w + x];
                }
            }
            out[ty * side + tx] = acc / area;
        }
    }
    out
}

/// Downsampled grayscale frames mapped through `projection`, one row each.
pub fn extract_features(frames: &[EventFrame], projection: Projection) -> Result<FeatureSet> {
    if frames.is_empty() {
        return Err(Error::Empty("frame list"));
    }
    let n_pix = FEATURE_SIDE * FEATURE_SIDE;
    let matrix = match projection {
        Projection::Identity => None,
        Projection::Random { dim, seed } => {
            if dim == 0 {
                return Err(Error::InvalidArgument("feature dimension must be >= 1".into()));
            }
            let mut rng = rng::stream(seed, Domain::Features, 0);
            let scale = 1.0 / (n_pix as f64).sqrt();
            Some(DMatrix::from_fn(dim, n_pix, |_, _| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z * scale
            }))
        }
    };
    let rows: Vec<Vec<f64>> = frames
        .iter()
        .map(|f| {
            let small = area_downsample(&f.grayscale(), f.width, f.height, FEATURE_SIDE);
            match &matrix {
                None => small,
                Some(m) => (m * DVector::from_vec(small)).iter().copied().collect(),
            }
        })
        .collect();
    FeatureSet::from_rows(&rows)
}

fn sym_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(m.clone());
    let mut vals = eig.eigenvalues.clone();
    for v in vals.iter_mut() {
        if *v < -EIGEN_FLOOR {
            return Err(Error::Indefinite(*v));
        }
        *v = v.max(0.0).sqrt();
    }
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose())
}

/// Fréchet distance between two Gaussians given their moments.
pub fn fid_from_moments(mu_a: &DVector<f64>, cov_a: &DMatrix<f64>, mu_b: &DVector<f64>, cov_b: &DMatrix<f64>) -> Result<f64> {
    let d = mu_a.len();
    if mu_b.len() != d || cov_a.shape() != (d, d) || cov_b.shape() != (d, d) {
        return Err(Error::ShapeMismatch { expected: vec![d, d], got: vec![cov_b.nrows(), cov_b.ncols()] });
    }
    if mu_a.iter().chain(mu_b.iter()).chain(cov_a.iter()).chain(cov_b.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("fid moments"));
    }
    let sym = |m: &DMatrix<f64>| (m + m.transpose()) * 0.5;
    let root_a = sym_sqrt(&sym(cov_a))?;
    let inner = sym(&(&root_a * cov_b * &root_a));
    let eig = SymmetricEigen::new(inner);
    let mut trace_sqrt = 0.0;
    for &v in eig.eigenvalues.iter() {
        if v < -EIGEN_FLOOR {
            return Err(Error::Indefinite(v));
        }
        trace_sqrt += v.max(0.0).sqrt();
    }
    let diff = mu_a - mu_b;
    Ok(diff.dot(&diff) + cov_a.trace() + cov_b.trace() - 2.0 * trace_sqrt)
}

pub fn fid(a: &FeatureSet, b: &FeatureSet) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::ShapeMismatch { expected: vec![a.dim()], got: vec![b.dim()] });
    }
    fid_from_moments(&a.mean(), &a.covariance()?, &b.mean(), &b.covariance()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::Encoding;

    fn frame(seed: u64, w: usize, h: usize) -> EventFrame {
        use rand::Rng;
        let mut r = rng::stream(seed, Domain::Toy, 1);
        EventFrame::from_data(w, h, (0..3 * w * h).map(|_| r.random::<f64>()).collect(), Encoding::Full).unwrap()
    }

    #[test]
    fn identity_features_are_pixels() {
        let f = frame(1, 16, 16);
        let feats = extract_features(&[f.clone()], Projection::Identity).unwrap();
        for (a, b) in feats.row(0).iter().zip(f.grayscale()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn area_downsample_averages_blocks() {
        let values: Vec<f64> = (0..64).map(|i| i as f64).collect();
        let out = area_downsample(&values, 8, 8, 4);
        assert_eq!(out[0], (0.0 + 1.0 + 8.0 + 9.0) / 4.0);
        let mean_in = values.iter().sum::<f64>() / 64.0;
        let mean_out = out.iter().sum::<f64>() / 16.0;
        assert!((mean_in - mean_out).abs() < 1e-12);
        // Non-integer ratio keeps the mean.
        let values: Vec<f64> = (0..100).map(|i| (i % 7) as f64).collect();
        let out = area_downsample(&values, 10, 10, 4);
        let mean_out = out.iter().sum::<f64>() / 16.0;
        assert!((values.iter().sum::<f64>() / 100.0 - mean_out).abs() < 1e-12);
    }

    #[test]
    fn features_deterministic() {
        let frames = vec![frame(2, 32, 32), frame(2, 32, 32)];
        let p = Projection::Random { dim: 8, seed: 5 };
        let a = extract_features(&frames, p).unwrap();
        assert_eq!(a.row(0), a.row(1));
        assert_eq!(a, extract_features(&frames, p).unwrap());
        assert!(extract_features(&[], p).is_err());
    }

    #[test]
    fn fid_one_dimensional_closed_forms() {
        let v = |x: f64| DVector::from_vec(vec![x]);
        let m = |x: f64| DMatrix::from_vec(1, 1, vec![x]);
        assert!((fid_from_moments(&v(0.0), &m(1.0), &v(1.0), &m(1.0)).unwrap() - 1.0).abs() < 1e-12);
        assert!((fid_from_moments(&v(0.0), &m(4.0), &v(0.0), &m(1.0)).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fid_self_is_zero_and_errors() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, (i * i % 7) as f64, 1.0]).collect();
        let a = FeatureSet::from_rows(&rows).unwrap();
        assert!(fid(&a, &a).unwrap().abs() < 1e-8);
        let b = FeatureSet::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert!(fid(&a, &b).is_err());
        let single = FeatureSet::from_rows(&[vec![1.0, 2.0, 3.0]]).unwrap();
        assert!(fid(&single, &a).is_err());
        assert!(FeatureSet::from_rows(&[vec![f64::NAN]]).is_err());
        let v = DVector::from_vec(vec![0.0]);
        assert!(matches!(
            fid_from_moments(&v, &DMatrix::from_vec(1, 1, vec![-1.0]), &v, &DMatrix::from_vec(1, 1, vec![1.0])),
            Err(Error::Indefinite(_))
        ));
    }
}
