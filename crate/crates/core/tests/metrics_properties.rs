use evsynth::frame::{Encoding, EventFrame};
use evsynth::metrics::{
    auc_pck, classification_scores, extract_features, fid, mpjpe_2d, pck_at, FeatureSet, PoseSet2D, PoseSet3D,
    Projection,
};
use proptest::prelude::*;
use rand::Rng;

fn feature_rows(n: usize, d: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    proptest::collection::vec(proptest::collection::vec(-3.0f64..3.0, d), n)
}

fn poses3(n: usize, j: usize) -> impl Strategy<Value = Vec<Vec<[f64; 3]>>> {
    proptest::collection::vec(proptest::collection::vec(prop::array::uniform3(-60.0f64..60.0), j), n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn fid_is_symmetric_and_non_negative(a in feature_rows(12, 3), b in feature_rows(9, 3)) {
        let (fa, fb) = (FeatureSet::from_rows(&a).unwrap(), FeatureSet::from_rows(&b).unwrap());
        let ab = fid(&fa, &fb).unwrap();
        let ba = fid(&fb, &fa).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert!((ab - ba).abs() <= 1e-8 * ab.max(1.0));
    }

    #[test]
    fn fid_is_rotation_invariant(a in feature_rows(12, 3), b in feature_rows(9, 3), theta in 0.0f64..6.3) {
        let rot = |rows: &[Vec<f64>]| -> Vec<Vec<f64>> {
            rows.iter()
                .map(|r| vec![theta.cos() * r[0] - theta.sin() * r[1], theta.sin() * r[0] + theta.cos() * r[1], r[2]])
                .collect()
        };
        let base = fid(&FeatureSet::from_rows(&a).unwrap(), &FeatureSet::from_rows(&b).unwrap()).unwrap();
        let turned = fid(&FeatureSet::from_rows(&rot(&a)).unwrap(), &FeatureSet::from_rows(&rot(&b)).unwrap()).unwrap();
        prop_assert!((base - turned).abs() <= 1e-7 * base.max(1.0));
    }

    #[test]
    fn pck_is_monotone_and_bounds_auc(p in poses3(3, 4), g in poses3(3, 4)) {
        let (p, g) = (PoseSet3D::new(p), PoseSet3D::new(g));
        let mut prev = 0.0;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for mm in 1..=100 {
            let v = pck_at(&p, &g, mm as f64).unwrap();
            prop_assert!(v >= prev);
            prev = v;
            lo = lo.min(v);
            hi = hi.max(v);
        }
        let auc = auc_pck(&p, &g, 100.0, 1.0).unwrap();
        prop_assert!(auc >= lo - 1e-12 && auc <= hi + 1e-12);
    }

    #[test]
    fn mpjpe_matches_brute_force(
        p in proptest::collection::vec(proptest::collection::vec(prop::array::uniform2(-50.0f64..50.0), 5), 4),
        g in proptest::collection::vec(proptest::collection::vec(prop::array::uniform2(-50.0f64..50.0), 5), 4),
    ) {
        let mut total = 0.0;
        for f in 0..4 {
            for j in 0..5 {
                total += ((p[f][j][0] - g[f][j][0]).powi(2) + (p[f][j][1] - g[f][j][1]).powi(2)).sqrt();
            }
        }
        let got = mpjpe_2d(&PoseSet2D::new(p), &PoseSet2D::new(g)).unwrap();
        prop_assert!((got - total / 20.0).abs() < 1e-9);
    }

    #[test]
    fn classification_ignores_sample_order(pairs in proptest::collection::vec((0u8..4, 0u8..4), 1..40), rot in 0usize..40) {
        let mut shuffled = pairs.clone();
        shuffled.rotate_left(rot % pairs.len());
        shuffled.reverse();
        let split = |v: &[(u8, u8)]| -> (Vec<u8>, Vec<u8>) { v.iter().copied().unzip() };
        let (p1, t1) = split(&pairs);
        let (p2, t2) = split(&shuffled);
        let a = classification_scores(&p1, &t1).unwrap();
        let b = classification_scores(&p2, &t2).unwrap();
        prop_assert!((a.0 - b.0).abs() < 1e-9 && (a.1 - b.1).abs() < 1e-9);
    }
}

#[test]
fn random_projection_preserves_squared_norm_on_average() {
    let mut rng = evsynth::rng::stream(5, evsynth::rng::Domain::Toy, 0);
    let mut ratio = 0.0;
    let n = 1000;
    for i in 0..n {
        let data: Vec<f64> = (0..3 * 32 * 32).map(|_| rng.random_range(0.0..1.0)).collect();
        let frame = [EventFrame::from_data(32, 32, data, Encoding::Full).unwrap()];
        let raw = extract_features(&frame, Projection::Identity).unwrap().row(0);
        let proj = extract_features(&frame, Projection::Random { dim: 256, seed: i }).unwrap().row(0);
        let sq = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>();
        ratio += sq(&proj) / sq(&raw);
    }
    ratio /= n as f64;
    assert!((ratio - 1.0).abs() < 0.05, "{ratio}");
}
