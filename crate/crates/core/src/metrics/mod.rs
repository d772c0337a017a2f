//! Evaluation metrics: FID on projected frame features, pose errors and
//! classification scores.
//!
//! FID values here come from a fixed random projection, not Inception
//! features, so only orderings between runs are meaningful.

mod fid;
mod pose;

pub use fid::{extract_features, fid, fid_from_moments, FeatureSet, Projection, FEATURE_SIDE};
pub use pose::{ap_at, auc_pck, mpjpe_2d, mpjpe_3d, pck_at, pve, PoseSet, PoseSet2D, PoseSet3D, VertexSet};

use crate::error::{Error, Result};
use std::collections::BTreeSet;
use std::io::Write;

/// `(accuracy %, macro precision %)`. Classes are the union of predicted and
/// true labels; a class that is never predicted has precision 0.
pub fn classification_scores<L: Ord>(pred: &[L], truth: &[L]) -> Result<(f64, f64)> {
    if pred.len() != truth.len() {
        return Err(Error::ShapeMismatch { expected: vec![truth.len()], got: vec![pred.len()] });
    }
    if pred.is_empty() {
        return Err(Error::Empty("label list"));
    }
    let correct = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    let classes: BTreeSet<&L> = pred.iter().chain(truth).collect();
    let precision_sum: f64 = classes
        .iter()
        .map(|&c| {
            let predicted = pred.iter().filter(|&p| p == c).count();
            if predicted == 0 {
                return 0.0;
            }
            let hits = pred.iter().zip(truth).filter(|&(p, t)| p == c && t == c).count();
            hits as f64 / predicted as f64
        })
        .sum();
    Ok((100.0 * correct as f64 / pred.len() as f64, 100.0 * precision_sum / classes.len() as f64))
}

/// Assigns each sample the label of the closest class mean (squared Euclidean,
/// ties to the smallest label).
#[derive(Debug, Clone, PartialEq)]
pub struct NearestCentroid<L> {
    centroids: Vec<(L, Vec<f64>)>,
}

impl<L: Ord + Clone> NearestCentroid<L> {
    pub fn fit(samples: &[(Vec<f64>, L)]) -> Result<Self> {
        let d = samples.first().map(|s| s.0.len()).ok_or(Error::Empty("training samples"))?;
        let mut sums: std::collections::BTreeMap<L, (Vec<f64>, usize)> = Default::default();
        for (x, l) in samples {
            if x.len() != d {
                return Err(Error::ShapeMismatch { expected: vec![d], got: vec![x.len()] });
            }
            let e = sums.entry(l.clone()).or_insert_with(|| (vec![0.0; d], 0));
            e.0.iter_mut().zip(x).for_each(|(a, b)| *a += b);
            e.1 += 1;
        }
        let centroids = sums.into_iter().map(|(l, (s, n))| (l, s.into_iter().map(|v| v / n as f64).collect())).collect();
        Ok(Self { centroids })
    }

    pub fn centroids(&self) -> &[(L, Vec<f64>)] {
        &self.centroids
    }

    pub fn predict(&self, x: &[f64]) -> &L {
        let dist = |c: &[f64]| c.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        let mut best = &self.centroids[0];
        for c in &self.centroids[1..] {
            if dist(&c.1) < dist(&best.1) {
                best = c;
            }
        }
        &best.0
    }
}

/// Writes `metric,value` rows.
pub fn write_metrics_csv(w: impl Write, rows: &[(String, f64)]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["metric", "value"])?;
    for (name, v) in rows {
        out.write_record([name.as_str(), &format!("{v:.6}")])?;
    }
    out.flush().map_err(|e| Error::io("metrics csv", e))
}

/// Aligned two-column text table.
pub fn format_table(rows: &[(String, f64)]) -> String {
    let width = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(0).max(6);
    let mut s = format!("{:<width$}  {:>12}\n", "metric", "value");
    for (name, v) in rows {
        s.push_str(&format!("{name:<width$}  {v:>12.4}\n"));
    }
    s
}
