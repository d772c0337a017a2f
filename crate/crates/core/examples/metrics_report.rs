//! Pose, classification and FID metrics on small fixtures, printed as a
//! table and written as CSV.

use evsynth::metrics::*;
use nalgebra::{DMatrix, DVector};

fn main() -> evsynth::Result<()> {
    let truth2 = PoseSet2D::new(vec![vec![[10.0, 10.0], [20.0, 12.0], [30.0, 30.0], [40.0, 8.0]]]);
    let pred2 = PoseSet2D::new(vec![vec![[13.0, 14.0], [23.0, 16.0], [33.0, 34.0], [43.0, 12.0]]]);
    let truth3 = PoseSet3D::new(vec![vec![[0.0, 0.0, 1000.0]; 5]; 2]);
    let pred3 = PoseSet3D::new(vec![vec![[0.0, 30.0, 1000.0]; 5]; 2]);
    let (acc, prec) = classification_scores(&["A", "A", "B", "B"], &["A", "B", "B", "B"])?;
    let m = |v: f64| DMatrix::from_element(1, 1, v);
    let v = |x: f64| DVector::from_element(1, x);

    let rows = vec![
        ("mpjpe_2d_px".to_string(), mpjpe_2d(&pred2, &truth2)?),
        ("ap@25%".to_string(), ap_at(&pred2, &truth2, 0.25, 64)?),
        ("mpjpe_3d_mm".to_string(), mpjpe_3d(&pred3, &truth3)?),
        ("pve_mm".to_string(), pve(&pred3, &truth3)?),
        ("pck@25mm".to_string(), pck_at(&pred3, &truth3, 25.0)?),
        ("pck@50mm".to_string(), pck_at(&pred3, &truth3, 50.0)?),
        ("auc_0_100mm".to_string(), auc_pck(&pred3, &truth3, 100.0, 1.0)?),
        ("accuracy".to_string(), acc),
        ("macro_precision".to_string(), prec),
        ("fid_1d_shift".to_string(), fid_from_moments(&v(0.0), &m(1.0), &v(1.0), &m(1.0))?),
        ("fid_1d_scale".to_string(), fid_from_moments(&v(0.0), &m(4.0), &v(0.0), &m(1.0))?),
    ];
    print!("{}", format_table(&rows));
    let mut csv = Vec::new();
    write_metrics_csv(&mut csv, &rows)?;
    println!("\n{}", String::from_utf8_lossy(&csv));
    Ok(())
}
